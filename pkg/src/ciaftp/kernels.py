"""Transition kernels and their coupling coefficients.

A kernel gives the law of the next symbol conditionally on the whole past.
The only capability the sampler needs is the per-context lower-bound row:
for a finite context ``s``, the infimum of ``P(g | past)`` over all pasts
ending with ``s``, for each symbol ``g``, together with their total mass.
Mass 1 means the context fully resolves the kernel.

Built-in families:

* ``ContextTreeKernel`` - variable-length Markov chain given by a minimal
  labeled trie of distributions (covers full order-d and memoryless chains).
* ``RenewalSqrtKernel`` - the binary infinite-memory renewal kernel with
  ``P(next=0 | r trailing ones) = 1 - 1/sqrt(r+1)`` and a forced 1 after
  each 0.  Not regenerating: the empty context carries mass 0.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from .errors import (
    BadProbability,
    EnumerationGuardExceeded,
    IncompleteDictionary,
    KernelSpecError,
    OverlappingContexts,
    TrieStructureError,
    UnknownSymbol,
    UnsupportedOperation,
)
from .tries import Alphabet, Context, ContextTrie, iter_leaves_below

PROB_TOL = 1e-12
ENUM_GUARD = 10**7

Distribution = Tuple[float, ...]


def check_distribution(alphabet: Alphabet, probs: Distribution, where: str = "") -> None:
    if len(probs) != alphabet.size:
        raise BadProbability(f"distribution{where} has {len(probs)} entries, expected {alphabet.size}")
    if any(p < 0.0 or p > 1.0 for p in probs):
        raise BadProbability(f"distribution{where} has entries outside [0, 1]: {probs}")
    total = math.fsum(probs)
    if abs(total - 1.0) > PROB_TOL:
        raise BadProbability(f"distribution{where} sums to {total!r}, not 1 within {PROB_TOL}")


@dataclass(frozen=True)
class LowerBoundRow:
    """Per-symbol conditional-probability infima over one context ball."""

    context: Context
    lower: Distribution
    mass: float

    @property
    def resolved(self) -> bool:
        return self.mass >= 1.0 - PROB_TOL


class Kernel:
    """Base class; subclasses implement :meth:`lower_bounds`."""

    family = "abstract"

    def __init__(self, alphabet: Alphabet):
        self.alphabet = alphabet

    @property
    def order(self) -> Optional[int]:
        """Markov order, or None for infinite memory."""
        return None

    def lower_bounds(self, s: Context) -> LowerBoundRow:
        raise NotImplementedError

    def distribution_at(self, s: Context) -> Distribution:
        """The exact next-symbol law at a resolving context."""
        row = self.lower_bounds(s)
        if not row.resolved:
            raise UnsupportedOperation(
                f"context {s} does not resolve the kernel (mass {row.mass})"
            )
        return row.lower

    def min_mass(self, k: int) -> float:
        """Worst-case lower-bound mass over all depth-k contexts."""
        if k < 0:
            raise ValueError("depth must be >= 0")
        if self.alphabet.size**k > ENUM_GUARD:
            raise EnumerationGuardExceeded(
                f"|G|^{k} = {self.alphabet.size ** k} exceeds the enumeration guard"
            )
        return min(
            self.lower_bounds(ctx).mass
            for ctx in itertools.product(self.alphabet.symbols, repeat=k)
        )


class ContextTreeKernel(Kernel):
    """A finite context tree: one distribution per dictionary leaf."""

    family = "context_tree"

    def __init__(self, trie: ContextTrie):
        super().__init__(trie.alphabet)
        for ctx, probs in trie.leaves():
            check_distribution(trie.alphabet, probs, where=f" at context {ctx}")
        self.trie = trie
        self._rows: Dict[Context, LowerBoundRow] = {}

    @property
    def order(self) -> int:
        return self.trie.depth()

    def lower_bounds(self, s: Context) -> LowerBoundRow:
        row = self._rows.get(s)
        if row is None:
            hit = self.trie.find_suffix(s)
            if hit is not None:
                dist = hit[1]
                row = LowerBoundRow(s, dist, 1.0)
            else:
                dists = [label for _, label in iter_leaves_below(self.trie, s)]
                lower = tuple(min(d[i] for d in dists) for i in range(self.alphabet.size))
                row = LowerBoundRow(s, lower, math.fsum(lower))
            self._rows[s] = row
        return row

    def min_mass(self, k: int) -> float:
        # beyond the dictionary depth every context resolves exactly
        if k >= self.trie.depth():
            if k < 0:
                raise ValueError("depth must be >= 0")
            return 1.0
        return super().min_mass(k)

    def oscillation(self, s: Context) -> float:
        """Largest total-variation distance between conditional laws of two
        pasts sharing suffix ``s``; zero once ``s`` resolves the tree."""
        if self.trie.find_suffix(s) is not None:
            return 0.0
        dists = [label for _, label in iter_leaves_below(self.trie, s)]
        best = 0.0
        for i in range(len(dists)):
            for j in range(i + 1, len(dists)):
                tv = 0.5 * math.fsum(abs(a - b) for a, b in zip(dists[i], dists[j]))
                if tv > best:
                    best = tv
        return best


def memoryless_kernel(alphabet: Alphabet, probs: Distribution) -> ContextTreeKernel:
    trie = ContextTrie.from_leaves(alphabet, {(): tuple(probs)})
    k = ContextTreeKernel(trie)
    return k


def full_markov_kernel(
    alphabet: Alphabet, order: int, table: Dict[Context, Distribution]
) -> ContextTreeKernel:
    """Order-d chain: a distribution for every d-tuple."""
    if order < 1:
        raise ValueError("order must be >= 1")
    leaves = {}
    for ctx in itertools.product(alphabet.symbols, repeat=order):
        if ctx not in table:
            raise IncompleteDictionary(f"missing distribution for context {ctx}")
        leaves[ctx] = tuple(table[ctx])
    if len(table) != len(leaves):
        extra = next(c for c in table if c not in leaves)
        raise KernelSpecError(f"context {extra} does not have length {order}")
    return ContextTreeKernel(ContextTrie.from_leaves(alphabet, leaves))


class RenewalSqrtKernel(Kernel):
    """Binary renewal kernel classified by the trailing-ones count r.

    After a 0 the next symbol is 1 with probability one; with r >= 1
    trailing ones the next symbol is 0 with probability 1 - 1/sqrt(r+1).
    An all-ones context of length k bounds only r >= k, leaving lower
    bounds (1 - 1/sqrt(k+1), 0); in particular the empty context carries
    mass 0 and slices can be arbitrarily deep.
    """

    family = "renewal_sqrt"

    def __init__(self) -> None:
        super().__init__(Alphabet(("0", "1")))

    @property
    def order(self) -> None:
        return None

    @staticmethod
    def p_zero(trailing_ones: int) -> float:
        return 1.0 - 1.0 / math.sqrt(trailing_ones + 1)

    def lower_bounds(self, s: Context) -> LowerBoundRow:
        r = 0
        for sym in reversed(s):
            if sym == "1":
                r += 1
            elif sym == "0":
                break
            else:
                raise UnknownSymbol(f"symbol {sym!r} not in alphabet ('0', '1')")
        if r == len(s):
            # all-ones context: only a lower bound on the 0-probability
            p0 = self.p_zero(r)
            return LowerBoundRow(s, (p0, 0.0), p0)
        if r == 0:
            return LowerBoundRow(s, (0.0, 1.0), 1.0)
        p0 = self.p_zero(r)
        return LowerBoundRow(s, (p0, 1.0 - p0), 1.0)

    def min_mass(self, k: int) -> float:
        # the minimizing depth-k context is the all-ones one
        return self.p_zero(k)

    def slice_depth(self, u: float) -> int:
        """Depth of the minimal slice for draw ``u``: the smallest m >= 1
        with ``u < 1 - 1/sqrt(m+1)``."""
        if not 0.0 <= u < 1.0:
            raise ValueError("u must lie in [0, 1)")
        # gallop then bisect on the exact float predicate, so the boundary
        # agrees bit-for-bit with the lower-bound rows
        hi = 1
        while not u < self.p_zero(hi):
            hi *= 2
        lo = hi // 2  # predicate is False at lo (or lo == 0)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if u < self.p_zero(mid):
                hi = mid
            else:
                lo = mid
        return hi


@dataclass
class DepthBoundReport:
    """Truncated evaluation of the expected slice-depth bound."""

    bound: float
    sum_finite: bool
    window: int
    truncation: int


def expected_depth_bound(kernel: Kernel, window: int, k_max: int = 200) -> DepthBoundReport:
    """Truncated bound on the expected dictionary depth for a length-
    ``window`` target, ``sum(1 - prod_{j>=k} A_j)`` with the tail of the
    product treated as 1 (so the value is a lower estimate).

    ``sum_finite`` reports whether ``sum_m prod_{k<=m} A_k`` looks finite
    numerically; finiteness means the classical regeneration-based
    termination criterion does NOT apply.
    """
    masses = [kernel.min_mass(k) for k in range(k_max + 1)]
    bound = 0.0
    for k in range(1, window + 1):
        prod = 1.0
        for j in range(k, k_max + 1):
            prod *= masses[j]
        bound += 1.0 - prod
    partial = 1.0
    for m in masses:
        partial *= m
    return DepthBoundReport(bound=bound, sum_finite=partial < 1e-9, window=window, truncation=k_max)


# -- kernel spec files ----------------------------------------------------

_FAMILIES = ("context_tree", "full_markov", "memoryless", "renewal_sqrt")


def parse_kernel_spec(text: str) -> Kernel:
    """Parse a UTF-8 JSON kernel spec into a validated kernel.

    Schema::

        {"alphabet": ["0", "1"],
         "type": "context_tree" | "full_markov" | "memoryless" | "renewal_sqrt",
         "contexts": [{"context": "<oldest-to-newest>", "probs": {"0": 0.4, ...}}, ...]}

    Context strings join symbol names without separator when every symbol
    is a single character, comma-joined otherwise.  The context set must
    form a complete suffix dictionary.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise KernelSpecError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise KernelSpecError("top level must be a JSON object")
    family = doc.get("type")
    if family not in _FAMILIES:
        raise KernelSpecError(f"type must be one of {_FAMILIES}, got {family!r}")

    if family == "renewal_sqrt":
        alphabet = doc.get("alphabet", ["0", "1"])
        if list(alphabet) != ["0", "1"]:
            raise KernelSpecError("renewal_sqrt requires alphabet ['0', '1']")
        return RenewalSqrtKernel()

    raw_alphabet = doc.get("alphabet")
    if not isinstance(raw_alphabet, list) or not raw_alphabet:
        raise KernelSpecError("alphabet must be a non-empty list of symbol names")
    try:
        alphabet = Alphabet(tuple(str(g) for g in raw_alphabet))
    except ValueError as exc:
        raise KernelSpecError(str(exc)) from exc

    entries = doc.get("contexts")
    if not isinstance(entries, list) or not entries:
        raise KernelSpecError("contexts must be a non-empty list")
    leaves: Dict[Context, Distribution] = {}
    for entry in entries:
        if not isinstance(entry, dict) or "context" not in entry or "probs" not in entry:
            raise KernelSpecError(f"each context entry needs 'context' and 'probs': {entry!r}")
        ctx = alphabet.parse_word(str(entry["context"]))
        probs_map = entry["probs"]
        if not isinstance(probs_map, dict):
            raise BadProbability(f"probs for context {ctx} must be an object")
        for sym in probs_map:
            if sym not in alphabet:
                raise UnknownSymbol(f"probs for context {ctx} name unknown symbol {sym!r}")
        try:
            probs = tuple(float(probs_map[g]) for g in alphabet)
        except KeyError as exc:
            raise BadProbability(f"probs for context {ctx} miss symbol {exc.args[0]!r}") from exc
        check_distribution(alphabet, probs, where=f" at context {ctx}")
        if ctx in leaves:
            raise OverlappingContexts(f"context {ctx} appears twice")
        leaves[ctx] = probs

    try:
        trie = ContextTrie.from_leaves(alphabet, leaves)
    except TrieStructureError as exc:
        msg = str(exc)
        if "incomplete" in msg or "uncovered" in msg:
            raise IncompleteDictionary(msg) from exc
        raise OverlappingContexts(msg) from exc

    if family == "memoryless" and trie.depth() != 0:
        raise KernelSpecError("memoryless kernels take exactly the empty context")
    if family == "full_markov":
        d = trie.depth()
        if any(len(c) != d for c in trie.leaf_contexts()):
            raise KernelSpecError("full_markov requires all contexts of one length")

    kernel = ContextTreeKernel(trie)
    kernel.family = family
    return kernel


def load_kernel(path: str) -> Kernel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kernel_spec(fh.read())


def kernel_spec_digest(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def kernel_to_spec(kernel: Kernel) -> str:
    """Serialize a kernel back to the JSON spec format."""
    if isinstance(kernel, RenewalSqrtKernel):
        doc = {"alphabet": list(kernel.alphabet.symbols), "type": "renewal_sqrt", "contexts": []}
    elif isinstance(kernel, ContextTreeKernel):
        contexts = [
            {
                "context": kernel.alphabet.format_word(ctx),
                "probs": {g: p for g, p in zip(kernel.alphabet.symbols, probs)},
            }
            for ctx, probs in sorted(kernel.trie.leaves())
        ]
        doc = {
            "alphabet": list(kernel.alphabet.symbols),
            "type": kernel.family,
            "contexts": contexts,
        }
    else:
        raise UnsupportedOperation(f"cannot serialize kernel family {kernel.family}")
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
