import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ciaftp.errors import MaxDepthExceeded
from ciaftp.kernels import RenewalSqrtKernel, memoryless_kernel
from ciaftp.update_rule import (
    build_slice,
    interval_table,
    phi,
    renewal_slice_leaves,
    verify_measure,
)

from helpers import BINARY, TERNARY, desk_vlmc, order1_chain, random_context, random_vlmc


def test_interval_layout_order1():
    k = order1_chain()
    # level 0: shared mass (0.6, 0.3); level 1 at context 0 adds (0.1, 0.0)
    table = interval_table(k, ("0",))
    widths = {(iv.level, iv.symbol): iv.beta - iv.alpha for iv in table}
    assert widths[(0, "0")] == pytest.approx(0.6, abs=1e-15)
    assert widths[(0, "1")] == pytest.approx(0.3, abs=1e-15)
    assert widths[(1, "0")] == pytest.approx(0.1, abs=1e-15)
    assert widths[(1, "1")] == 0.0
    # contiguous ascending intervals
    cursor = 0.0
    for iv in table:
        assert iv.alpha == pytest.approx(cursor, abs=1e-15)
        cursor = iv.beta
    assert cursor == pytest.approx(1.0, abs=1e-12)


def test_phi_order1():
    k = order1_chain()
    assert phi(k, 0.1, ()) == "0"
    assert phi(k, 0.7, ()) == "1"
    assert phi(k, 0.95, ()) is None  # above the level-0 mass 0.9
    assert phi(k, 0.95, ("0",)) == "0"
    assert phi(k, 0.95, ("1",)) == "1"
    with pytest.raises(ValueError):
        phi(k, 1.0, ())


def test_phi_constant_below_shared_mass():
    # draws below A(s) give the same symbol for every deeper context
    k = desk_vlmc()
    for u in (0.05, 0.2, 0.39):
        vals = {phi(k, u, ("1",) + ext) for ext in [(), ("0",), ("1",), ("0", "1")]}
        base = phi(k, u, ("1",))
        assert vals == {base}


def test_build_slice_regeneration():
    k = order1_chain()
    s = build_slice(k, 0.5)
    assert s.is_regeneration
    assert s.trie.root_label() == "0"
    assert s.depth == 0
    s2 = build_slice(k, 0.95)
    assert not s2.is_regeneration
    assert dict(s2.trie.leaves()) == {("0",): "0", ("1",): "1"}


def test_build_slice_memoryless_always_regenerates():
    k = memoryless_kernel(BINARY, (0.25, 0.75))
    for u in (0.0, 0.2, 0.6, 0.999):
        assert build_slice(k, u).is_regeneration


def test_renewal_slice_fixture():
    # u = 0.5 resolves at depth 4: 0->1, 01->1, 011->1, 0111->1, 1111->0
    s = build_slice(RenewalSqrtKernel(), 0.5)
    assert s.depth == 4
    assert dict(s.trie.leaves()) == {
        ("0",): "1",
        ("0", "1"): "1",
        ("0", "1", "1"): "1",
        ("0", "1", "1", "1"): "1",
        ("1", "1", "1", "1"): "0",
    }
    assert dict(s.trie.leaves()) == renewal_slice_leaves(4)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 0.97))
def test_renewal_slice_generic_agrees(u):
    k = RenewalSqrtKernel()
    fast = build_slice(k, u)
    slow = build_slice(k, u, generic=True)
    assert fast.trie == slow.trie
    assert fast.depth == slow.depth
    assert fast.node_touches == slow.node_touches


def test_build_slice_max_depth():
    k = RenewalSqrtKernel()
    u = 0.995  # depth ~ 40000
    with pytest.raises(MaxDepthExceeded):
        build_slice(k, u, max_depth=100)
    with pytest.raises(MaxDepthExceeded):
        build_slice(k, u, max_depth=100, generic=True)


@pytest.mark.parametrize("alphabet", [BINARY, TERNARY])
def test_slice_classifies_like_phi(alphabet):
    rng = np.random.Generator(np.random.PCG64(31))
    for _ in range(20):
        k = random_vlmc(rng, alphabet, int(rng.integers(1, 8)))
        d = k.trie.depth()
        for u in rng.random(10):
            s = build_slice(k, float(u))
            for _ in range(5):
                h = random_context(rng, alphabet, d + 2)
                direct = phi(k, float(u), h)
                via_slice = s.trie.find_suffix(h)[1]
                assert direct == via_slice


def test_verify_measure_desk():
    k = desk_vlmc()
    for w in [("0",), ("0", "1"), ("1", "1"), ("1", "0", "1")]:
        rep = verify_measure(k, w)
        assert rep.ok, rep.failures
        assert rep.max_mass_error <= 1e-9
        assert rep.coverage_error <= 1e-12
    # unresolved chains are reported, not silently accepted
    assert not verify_measure(k, ("1",)).ok


@pytest.mark.parametrize("alphabet", [BINARY, TERNARY])
def test_verify_measure_random(alphabet):
    rng = np.random.Generator(np.random.PCG64(77))
    for _ in range(15):
        k = random_vlmc(rng, alphabet, int(rng.integers(1, 8)))
        d = k.trie.depth()
        for _ in range(10):
            rep = verify_measure(k, random_context(rng, alphabet, d))
            assert rep.ok, rep.failures


def test_verify_measure_renewal_resolving_context():
    k = RenewalSqrtKernel()
    rep = verify_measure(k, ("0", "1", "1"))
    assert rep.ok, rep.failures


def test_interval_table_u_cap_stops_early():
    k = RenewalSqrtKernel()
    w = ("1",) * 50
    table = interval_table(k, w, u_cap=0.5)
    assert max(iv.level for iv in table) <= 5
    # the interval containing u agrees with phi
    u = 0.45
    hit = [iv for iv in table if iv.alpha <= u < iv.beta]
    assert len(hit) == 1
    assert hit[0].symbol == phi(k, u, w)
