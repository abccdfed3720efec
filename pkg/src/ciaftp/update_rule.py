"""The coupling construction: interval layout, evaluation, and slices.

For a context chain ``w`` the unit interval is tiled by half-open intervals,
one per (level, symbol): at level k the new mass gained by symbol g when the
context deepens from the last k-1 symbols of ``w`` to the last k.  A uniform
draw ``u`` lands in exactly one interval, whose symbol is the update value.
Whenever ``u`` is below the accumulated mass of a context, the update value
is already determined by that context alone; the minimal labeled trie of
contexts where this happens is the draw's *slice*.

Floating-point discipline: every routine in this module accumulates the
interval boundaries in one canonical order (ascending level; within a level,
alphabet order), so interval membership never disagrees between table
construction, pointwise evaluation, and slice expansion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

from .errors import InvariantViolation, MaxDepthExceeded
from .kernels import Kernel, RenewalSqrtKernel
from .tries import Context, ContextTrie, Symbol, prune_minimal

DEFAULT_MAX_DEPTH = 10_000


@dataclass(frozen=True)
class IntervalAssignment:
    level: int
    symbol: Symbol
    alpha: float
    beta: float


@dataclass(frozen=True)
class UpdateSlice:
    """The minimal trie on which the update map for one draw is constant."""

    u: float
    trie: ContextTrie  # leaf label: the symbol emitted on that ball
    depth: int
    node_touches: int

    @property
    def is_regeneration(self) -> bool:
        return self.trie.is_coalesced()


def _interval_stream(kernel: Kernel, w: Context) -> Iterator[IntervalAssignment]:
    """All intervals for levels 0..len(w), in canonical order.

    Zero-width intervals are emitted too; callers that only care about mass
    may skip them.
    """
    symbols = kernel.alphabet.symbols
    pos = 0.0
    prev = (0.0,) * len(symbols)
    for k in range(len(w) + 1):
        row = kernel.lower_bounds(w[len(w) - k:])
        for i, g in enumerate(symbols):
            inc = row.lower[i] - prev[i]
            yield IntervalAssignment(k, g, pos, pos + inc)
            pos += inc
        prev = row.lower


def interval_table(kernel: Kernel, w: Context, u_cap: float = 1.0) -> List[IntervalAssignment]:
    """Interval layout for the chain ``w``, stopping after the first level
    whose accumulated mass exceeds ``u_cap``."""
    out: List[IntervalAssignment] = []
    level_end = 0.0
    current_level = 0
    for iv in _interval_stream(kernel, w):
        if iv.level != current_level:
            if level_end > u_cap:
                break
            current_level = iv.level
        out.append(iv)
        level_end = iv.beta
    return out


def phi(kernel: Kernel, u: float, s: Context) -> Optional[Symbol]:
    """The update value at context ``s``, or None when ``s`` is too short
    to determine it (``u`` at or above the accumulated context mass)."""
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0, 1)")
    for iv in _interval_stream(kernel, s):
        if iv.alpha <= u < iv.beta:
            return iv.symbol
    return None


def build_slice(
    kernel: Kernel,
    u: float,
    max_depth: int = DEFAULT_MAX_DEPTH,
    generic: bool = False,
) -> UpdateSlice:
    """Expand the minimal slice trie for draw ``u``.

    Depth-first from the root: a node whose accumulated mass exceeds ``u``
    becomes a leaf labeled with the update value; otherwise all children
    are expanded.  Kernels with a closed-form slice shape (the renewal
    family) use it unless ``generic`` is set; both routes produce the same
    trie.
    """
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0, 1)")
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if not generic and isinstance(kernel, RenewalSqrtKernel):
        return _renewal_slice(kernel, u, max_depth)
    return _generic_slice(kernel, u, max_depth)


def _generic_slice(kernel: Kernel, u: float, max_depth: int) -> UpdateSlice:
    symbols = kernel.alphabet.symbols
    n_sym = len(symbols)
    touches = 0
    leaves = {}
    zeros = (0.0,) * n_sym
    # stack entries: (context, accumulated position, previous-level bounds)
    stack: List[Tuple[Context, float, Tuple[float, ...]]] = [((), 0.0, zeros)]
    while stack:
        ctx, pos, prev = stack.pop()
        touches += 1
        row = kernel.lower_bounds(ctx)
        symbol = None
        for i, g in enumerate(symbols):
            inc = row.lower[i] - prev[i]
            if pos <= u < pos + inc:
                symbol = g
            pos += inc
        if u < pos:
            if symbol is None:
                raise InvariantViolation(
                    f"draw {u!r} below mass {pos!r} at {ctx} but in no interval"
                )
            leaves[ctx] = symbol
        else:
            if len(ctx) >= max_depth:
                raise MaxDepthExceeded(
                    f"slice for u={u!r} did not resolve within depth {max_depth}"
                )
            for g in symbols:
                stack.append(((g,) + ctx, pos, row.lower))
    trie = prune_minimal(ContextTrie.from_leaves(kernel.alphabet, leaves))
    return UpdateSlice(u=u, trie=trie, depth=trie.depth(), node_touches=touches)


def renewal_slice_leaves(m: int) -> dict:
    """Leaf map of a depth-m renewal slice: after a 0 the value is 1; on
    the all-ones ball of depth m the value is 0."""
    leaves = {("0",) + ("1",) * j: "1" for j in range(m)}
    leaves[("1",) * m] = "0"
    return leaves


def _renewal_slice(kernel: RenewalSqrtKernel, u: float, max_depth: int) -> UpdateSlice:
    m = kernel.slice_depth(u)
    if m > max_depth:
        raise MaxDepthExceeded(
            f"slice for u={u!r} has depth {m}, above the {max_depth} bound"
        )
    trie = ContextTrie.from_leaves(kernel.alphabet, renewal_slice_leaves(m))
    # same node count the generic expansion would touch: the all-ones spine
    # plus both children of each spine node
    return UpdateSlice(u=u, trie=trie, depth=m, node_touches=2 * m + 1)


@dataclass
class MeasureReport:
    """Result of checking the interval layout against the kernel law."""

    context: Context
    ok: bool
    max_mass_error: float
    coverage_error: float
    failures: List[str]


def verify_measure(kernel: Kernel, w: Context, tolerance: float = 1e-9) -> MeasureReport:
    """Check that, at a resolving chain ``w``, per-symbol interval mass
    telescopes to the conditional law, and that the intervals tile [0, 1)."""
    row = kernel.lower_bounds(w)
    failures: List[str] = []
    if not row.resolved:
        failures.append(f"context {w} does not resolve the kernel (mass {row.mass})")
        return MeasureReport(w, False, float("inf"), float("inf"), failures)

    table = interval_table(kernel, w, u_cap=1.0)
    totals = {g: 0.0 for g in kernel.alphabet.symbols}
    cursor = 0.0
    for iv in table:
        if iv.beta < iv.alpha - 1e-15:
            failures.append(f"inverted interval {iv}")
        if iv.alpha < cursor - 1e-15:
            failures.append(f"interval {iv} overlaps its predecessor (cursor {cursor!r})")
        cursor = iv.beta
        totals[iv.symbol] += iv.beta - iv.alpha
    coverage_error = abs(cursor - 1.0)
    if coverage_error > tolerance:
        failures.append(f"intervals cover [0, {cursor!r}) instead of [0, 1)")
    max_err = 0.0
    for i, g in enumerate(kernel.alphabet.symbols):
        err = abs(totals[g] - row.lower[i])
        if err > max_err:
            max_err = err
        if err > tolerance:
            failures.append(
                f"symbol {g!r}: interval mass {totals[g]!r} vs law {row.lower[i]!r}"
            )
    return MeasureReport(w, not failures, max_err, coverage_error, failures)
