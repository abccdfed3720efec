"""The backward-coupling sampling loop and its diagnostics.

Each backward step consumes one uniform draw: the draw's slice tells which
context suffices to determine the new symbol, and the previous composite map
is looked up one symbol deeper.  The composite map is kept as a minimal
labeled trie whose leaf labels are full length-L windows; the run stops when
the trie collapses to its root, at which point the single label is an exact
stationary sample.

Two algorithm variants share the update rule:

* :func:`run` - the adaptive-trie loop (with a run-length-compressed fast
  path for the renewal kernel at window length 1, whose slice depth is too
  heavy-tailed to materialize node by node);
* :func:`pw_extended` - the classical baseline holding the full depth-d
  trie of an order-d chain, used for complexity comparisons.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .errors import (
    InvariantViolation,
    IterationLimitExceeded,
    MaxDepthExceeded,
    NodeBudgetExceeded,
    UnsupportedOperation,
)
from .kernels import Kernel, RenewalSqrtKernel
from .tries import Alphabet, Context, ContextTrie, complete_trie, prune_minimal
from .update_rule import DEFAULT_MAX_DEPTH, UpdateSlice, build_slice, phi

DEFAULT_MAX_ITER = 10**6
DEFAULT_MAX_NODES = 10**7

RNG_ALGORITHM = "pcg64"


class RngStream:
    """A named, seeded, portable uniform stream ([0, 1) doubles).

    Identical (algorithm, seed) gives an identical draw sequence on every
    platform; independent runs derive their seeds as base + run index.
    """

    def __init__(self, seed: int, algorithm: str = RNG_ALGORITHM):
        if algorithm != RNG_ALGORITHM:
            raise UnsupportedOperation(f"unknown RNG algorithm {algorithm!r}")
        self.seed = seed
        self.algorithm = algorithm
        self.count = 0
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def uniform(self) -> float:
        self.count += 1
        return self._gen.random()


@dataclass
class IterationRecord:
    t: int
    leaf_count: int
    depth: int
    node_touches: int


@dataclass
class RunDiagnostics:
    tau: Optional[int]
    iterations: int
    node_touches: int
    max_slice_depth: int
    regeneration_times: List[int] = field(default_factory=list)
    records: Optional[List[IterationRecord]] = None
    seed: Optional[int] = None
    rng_algorithm: str = RNG_ALGORITHM
    wall_ns: int = 0


@dataclass
class RunResult:
    sample: Context
    diagnostics: RunDiagnostics


@dataclass(frozen=True)
class Limits:
    max_iter: int = DEFAULT_MAX_ITER
    max_depth: int = DEFAULT_MAX_DEPTH
    max_nodes: int = DEFAULT_MAX_NODES

    def validate(self) -> None:
        if self.max_iter < 1 or self.max_depth < 1 or self.max_nodes < 1:
            raise ValueError("limits must be positive")


def init_state(alphabet: Alphabet, length: int) -> ContextTrie:
    """The initial composite map: the complete depth-L trie with every leaf
    labeled by its own window."""
    if length < 1:
        raise ValueError("window length must be >= 1")
    return complete_trie(alphabet, length, label_fn=lambda s: s)


def detect_regeneration(slice_: UpdateSlice) -> bool:
    """True iff a single draw already determines the next symbol for every
    past (the slice is the root-only trie)."""
    return slice_.is_regeneration


def step(
    kernel: Kernel,
    state: ContextTrie,
    u: float,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> Tuple[ContextTrie, UpdateSlice, ContextTrie]:
    """One backward iteration; returns (new state, slice, unpruned trie).

    The unpruned trie is rebuilt through the validating constructor, so the
    claim that it is a complete suffix dictionary is re-checked on every
    step.
    """
    slice_ = build_slice(kernel, u, max_depth)
    e_leaves: Dict[Context, Context] = {}
    for s, g in slice_.trie.leaves():
        target = s + (g,)
        hit = state.find_suffix(target)
        if hit is not None:
            e_leaves[s] = hit[1]
        else:
            # the previous dictionary needs older symbols: pull in its
            # subtree below `target`, one leaf per required extension
            node = state.node_at(target)
            stack = [(node, ())]
            while stack:
                nd, ext = stack.pop()
                if nd.children is None:
                    e_leaves[ext + s] = nd.label
                else:
                    for sym, child in nd.children.items():
                        stack.append((child, (sym,) + ext))
    e_trie = ContextTrie.from_leaves(kernel.alphabet, e_leaves)
    return prune_minimal(e_trie), slice_, e_trie


@dataclass
class StepAudit:
    """Per-iteration view handed to run(on_iteration=...)."""

    t: int
    slice_: UpdateSlice
    unpruned: ContextTrie
    state: ContextTrie
    prev_depth: int


def run(
    kernel: Kernel,
    length: int,
    rng: RngStream,
    *,
    max_iter: int = DEFAULT_MAX_ITER,
    max_depth: int = DEFAULT_MAX_DEPTH,
    max_nodes: int = DEFAULT_MAX_NODES,
    trace: bool = False,
    on_iteration: Optional[Callable[[StepAudit], None]] = None,
    force_generic: bool = False,
) -> RunResult:
    """Draw one exact stationary window of the given length.

    Draws are consumed in backward time order (the first draw belongs to
    time -1).  Budget violations raise with partial diagnostics attached.
    """
    Limits(max_iter, max_depth, max_nodes).validate()
    if (
        not force_generic
        and on_iteration is None
        and length == 1
        and isinstance(kernel, RenewalSqrtKernel)
    ):
        return _run_renewal_comb(kernel, rng, max_iter, max_depth, max_nodes, trace)

    start_ns = time.perf_counter_ns()
    state = init_state(kernel.alphabet, length)
    t = 0
    touches = 0
    max_slice_depth = 0
    regen: List[int] = []
    records: Optional[List[IterationRecord]] = [] if trace else None

    def diag(tau: Optional[int]) -> RunDiagnostics:
        return RunDiagnostics(
            tau=tau,
            iterations=-t,
            node_touches=touches,
            max_slice_depth=max_slice_depth,
            regeneration_times=regen,
            records=records,
            seed=rng.seed,
            wall_ns=time.perf_counter_ns() - start_ns,
        )

    while not state.is_coalesced():
        if -t >= max_iter:
            raise IterationLimitExceeded(
                f"no coalescence within {max_iter} iterations", diag(None)
            )
        u = rng.uniform()
        t -= 1
        prev_depth = state.depth()
        try:
            new_state, slice_, e_trie = step(kernel, state, u, max_depth)
        except MaxDepthExceeded as exc:
            raise MaxDepthExceeded(str(exc), diag(None)) from None
        if slice_.depth > max_slice_depth:
            max_slice_depth = slice_.depth
        if slice_.is_regeneration:
            regen.append(t)
        step_touches = slice_.node_touches + e_trie.node_count()
        touches += step_touches
        if touches > max_nodes:
            raise NodeBudgetExceeded(
                f"node budget {max_nodes} exhausted at t={t}", diag(None)
            )
        state = new_state
        if records is not None:
            records.append(IterationRecord(t, state.leaf_count(), state.depth(), step_touches))
        if on_iteration is not None:
            on_iteration(StepAudit(t, slice_, e_trie, state, prev_depth))

    sample = state.root_label()
    if len(sample) != length:
        raise InvariantViolation(f"coalesced label {sample} is not a length-{length} window")
    return RunResult(sample=sample, diagnostics=diag(t))


# -- renewal fast path ----------------------------------------------------
#
# For the renewal kernel every dictionary arising at window length 1 is a
# "comb": leaves 0, 01, 011, ..., 01^(a-1) plus the all-ones leaf 1^a.  A
# comb is stored as run-length-encoded labels along the 0-side plus the
# spine label, so a step costs O(number of label changes) regardless of the
# slice depth -- which has no finite expectation and cannot be materialized
# node by node.  The recursion (cross-checked against the generic loop):
#
#   new 0-side label at depth j = old label at depth j+1 (old spine past
#   the old end); new spine label = old label at depth 0; then equal labels
#   are absorbed into the spine from the deep end.

Label = Tuple[str, ...]
_Runs = List[Tuple[Label, int]]


def _run_renewal_comb(
    kernel: RenewalSqrtKernel,
    rng: RngStream,
    max_iter: int,
    max_depth: int,
    max_nodes: int,
    trace: bool,
) -> RunResult:
    start_ns = time.perf_counter_ns()
    runs: _Runs = [(("0",), 1)]
    spine: Label = ("1",)
    depth = 1
    t = 0
    touches = 0
    max_slice_depth = 0
    records: Optional[List[IterationRecord]] = [] if trace else None

    def diag(tau: Optional[int]) -> RunDiagnostics:
        return RunDiagnostics(
            tau=tau,
            iterations=-t,
            node_touches=touches,
            max_slice_depth=max_slice_depth,
            regeneration_times=[],
            records=records,
            seed=rng.seed,
            wall_ns=time.perf_counter_ns() - start_ns,
        )

    while True:
        if -t >= max_iter:
            raise IterationLimitExceeded(
                f"no coalescence within {max_iter} iterations", diag(None)
            )
        u = rng.uniform()
        t -= 1
        m = kernel.slice_depth(u)
        if m > max_depth:
            raise MaxDepthExceeded(
                f"slice for u={u!r} has depth {m}, above the {max_depth} bound", diag(None)
            )
        if m > max_slice_depth:
            max_slice_depth = m
        touches += 4 * m + 2  # slice nodes + rebuilt trie nodes
        if touches > max_nodes:
            raise NodeBudgetExceeded(f"node budget {max_nodes} exhausted at t={t}", diag(None))

        # shift the 0-side labels one step deeper in time
        head_label, head_count = runs[0]
        shifted = runs[1:] if head_count == 1 else [(head_label, head_count - 1)] + runs[1:]
        new_spine = head_label
        available = depth - 1
        if m <= available:
            new_runs: _Runs = []
            need = m
            for lab, cnt in shifted:
                if need <= 0:
                    break
                take = min(cnt, need)
                new_runs.append((lab, take))
                need -= take
        else:
            pad = m - available
            new_runs = list(shifted)
            if new_runs and new_runs[-1][0] == spine:
                new_runs[-1] = (spine, new_runs[-1][1] + pad)
            else:
                new_runs.append((spine, pad))
        # absorb equal labels into the spine from the deep end
        new_depth = m
        while new_runs and new_runs[-1][0] == new_spine:
            new_depth -= new_runs[-1][1]
            new_runs.pop()
        if not new_runs:
            # constant map: coalesced
            if records is not None:
                records.append(IterationRecord(t, 1, 0, 4 * m + 2))
            return RunResult(sample=new_spine, diagnostics=diag(t))
        runs, spine, depth = new_runs, new_spine, new_depth
        if records is not None:
            records.append(IterationRecord(t, depth + 1, depth, 4 * m + 2))


# -- extended Propp-Wilson baseline ---------------------------------------


def pw_extended(
    kernel: Kernel,
    length: int,
    rng: RngStream,
    *,
    max_iter: int = DEFAULT_MAX_ITER,
    max_depth: int = DEFAULT_MAX_DEPTH,
    max_nodes: int = DEFAULT_MAX_NODES,
    trace: bool = False,
) -> RunResult:
    """The classical baseline: the composite map over the full extended
    state space, with the same update rule and the same draw discipline as
    :func:`run` but no adaptive dictionary and no pruning benefit."""
    Limits(max_iter, max_depth, max_nodes).validate()
    order = kernel.order
    if order is None:
        raise UnsupportedOperation("pw_extended needs a finite-order kernel")
    order = max(order, 1)
    if length < 1:
        raise ValueError("window length must be >= 1")

    start_ns = time.perf_counter_ns()
    symbols = kernel.alphabet.symbols
    n_sym = len(symbols)
    import itertools

    m = max(order, length)
    window_map: Dict[Context, Context] = {
        h: h[-length:] for h in itertools.product(symbols, repeat=m)
    }
    t = 0
    touches = 0
    records: Optional[List[IterationRecord]] = [] if trace else None

    def diag(tau: Optional[int]) -> RunDiagnostics:
        return RunDiagnostics(
            tau=tau,
            iterations=-t,
            node_touches=touches,
            max_slice_depth=0,
            regeneration_times=[],
            records=records,
            seed=rng.seed,
            wall_ns=time.perf_counter_ns() - start_ns,
        )

    def coalesced() -> bool:
        values = iter(window_map.values())
        first = next(values)
        return all(v == first for v in values)

    while not coalesced():
        if -t >= max_iter:
            raise IterationLimitExceeded(
                f"no coalescence within {max_iter} iterations", diag(None)
            )
        u = rng.uniform()
        t -= 1
        m_next = max(order, m - 1)
        new_map: Dict[Context, Context] = {}
        for h in itertools.product(symbols, repeat=m_next):
            g = phi(kernel, u, h)
            if g is None:
                raise InvariantViolation(
                    f"order-{order} kernel unresolved at depth-{m_next} context {h}"
                )
            key = (h + (g,))[-m:]
            new_map[h] = window_map[key]
        window_map, m = new_map, m_next
        # every node of the full depth-m trie is held, not only the leaves
        touches += (n_sym ** (m + 1) - 1) // (n_sym - 1) if n_sym > 1 else m + 1
        if touches > max_nodes:
            raise NodeBudgetExceeded(f"node budget {max_nodes} exhausted at t={t}", diag(None))
        if records is not None:
            records.append(IterationRecord(t, n_sym**m, m, 0))

    sample = next(iter(window_map.values()))
    return RunResult(sample=sample, diagnostics=diag(t))


# -- batch driver ---------------------------------------------------------


@dataclass
class RunRow:
    """One line of the sample/bench reports."""

    run_id: int
    sample: Optional[Context]
    tau: Optional[int]
    iterations: int
    node_touches: int
    wall_ns: int
    error: Optional[str] = None
    max_slice_depth: int = 0


def run_many(
    kernel: Kernel,
    length: int,
    seed_base: int,
    start: int,
    count: int,
    *,
    algorithm: str = "ciaftp",
    max_iter: int = DEFAULT_MAX_ITER,
    max_depth: int = DEFAULT_MAX_DEPTH,
    max_nodes: int = DEFAULT_MAX_NODES,
    checker: Optional[Callable[[StepAudit], None]] = None,
    timing: bool = True,
) -> List[RunRow]:
    """Independent runs with seeds ``seed_base + run_id``; budget errors
    become rows with an error code instead of aborting the batch."""
    rows: List[RunRow] = []
    for idx in range(start, start + count):
        rng = RngStream(seed_base + idx)
        try:
            if algorithm == "ciaftp":
                result = run(
                    kernel,
                    length,
                    rng,
                    max_iter=max_iter,
                    max_depth=max_depth,
                    max_nodes=max_nodes,
                    on_iteration=checker,
                )
            elif algorithm == "pw_extended":
                result = pw_extended(
                    kernel,
                    length,
                    rng,
                    max_iter=max_iter,
                    max_depth=max_depth,
                    max_nodes=max_nodes,
                )
            else:
                raise ValueError(f"unknown algorithm {algorithm!r}")
        except (IterationLimitExceeded, MaxDepthExceeded, NodeBudgetExceeded) as exc:
            d = exc.diagnostics
            rows.append(
                RunRow(
                    run_id=idx,
                    sample=None,
                    tau=None,
                    iterations=d.iterations if d else 0,
                    node_touches=d.node_touches if d else 0,
                    wall_ns=d.wall_ns if (d and timing) else 0,
                    error=exc.code,
                )
            )
            continue
        d = result.diagnostics
        rows.append(
            RunRow(
                run_id=idx,
                sample=result.sample,
                tau=d.tau,
                iterations=d.iterations,
                node_touches=d.node_touches,
                wall_ns=d.wall_ns if timing else 0,
                max_slice_depth=d.max_slice_depth,
            )
        )
    return rows
