import numpy as np
import pytest
from hypothesis import given, strategies as st

from trophy.lsr1 import CurvaturePairBuffer

from oracles import dense_sr1


def _random_pairs(rng, n, count):
    A = rng.standard_normal((n, n))
    H = A + A.T  # indefinite on purpose
    pairs = []
    for _ in range(count):
        s = rng.standard_normal(n)
        y = H @ s + 0.1 * rng.standard_normal(n)
        pairs.append((s, y))
    return pairs


def _retained_oracle(buf: CurvaturePairBuffer, offered):
    """Dense SR1 on the pairs the buffer kept, starting from its final gamma."""
    return dense_sr1(buf.pairs, buf.n, buf.gamma, buf.skip_tol)


def test_empty_buffer_is_scaled_identity():
    v = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(CurvaturePairBuffer(3).hvp(v), v)
    assert np.array_equal(CurvaturePairBuffer(3, b0_scale=0.5).hvp(v), 0.5 * v)


def test_single_pair():
    buf = CurvaturePairBuffer(3, rescale=False)
    assert buf.update([1.0, 0, 0], [2.0, 0, 0])
    assert np.allclose(buf.hvp([1.0, 0, 0]), [2.0, 0, 0])
    assert np.allclose(buf.hvp([0, 1.0, 0]), [0, 1.0, 0])


def test_consistent_pair_skipped():
    buf = CurvaturePairBuffer(3)
    assert not buf.update([1.0, 0, 0], [1.0, 0, 0])
    assert buf.n_skipped == 1 and len(buf) == 0


def test_shape_errors():
    buf = CurvaturePairBuffer(3)
    with pytest.raises(ValueError):
        buf.update([1.0, 0], [1.0, 0])
    with pytest.raises(ValueError):
        buf.update([0.0, 0, 0], [1.0, 0, 0])
    with pytest.raises(ValueError):
        buf.hvp([1.0])


def test_secant_condition_on_newest_pair():
    rng = np.random.default_rng(0)
    buf = CurvaturePairBuffer(6, memory=4)
    for s, y in _random_pairs(rng, 6, 12):
        if buf.update(s, y):
            assert np.allclose(buf.hvp(s), y, rtol=1e-8, atol=1e-8)


def test_matches_dense_oracle_n20():
    rng = np.random.default_rng(5)
    buf = CurvaturePairBuffer(20, memory=5)
    pairs = _random_pairs(rng, 20, 10)
    for s, y in pairs:
        buf.update(s, y)
    B = _retained_oracle(buf, pairs)
    for _ in range(5):
        v = rng.standard_normal(20)
        assert np.linalg.norm(buf.hvp(v) - B @ v) <= 1e-10 * np.linalg.norm(B @ v)


@given(st.integers(0, 2**32 - 1), st.integers(2, 20), st.integers(1, 15))
def test_dense_oracle_property(seed, n, count):
    rng = np.random.default_rng(seed)
    buf = CurvaturePairBuffer(n, memory=5)
    for s, y in _random_pairs(rng, n, count):
        buf.update(s, y)
    if buf.degenerate:
        return
    B = _retained_oracle(buf, None)
    v = rng.standard_normal(n)
    Bv = B @ v
    assert np.linalg.norm(buf.hvp(v) - Bv) <= 1e-10 * max(np.linalg.norm(Bv), 1.0)


def test_symmetric():
    rng = np.random.default_rng(2)
    buf = CurvaturePairBuffer(8, memory=5)
    for s, y in _random_pairs(rng, 8, 7):
        buf.update(s, y)
    B = np.column_stack([buf.hvp(e) for e in np.eye(8)])
    assert np.allclose(B, B.T, atol=1e-10)


def test_memory_evicts_oldest():
    rng = np.random.default_rng(1)
    buf = CurvaturePairBuffer(10, memory=3)
    pairs = _random_pairs(rng, 10, 6)
    for s, y in pairs:
        buf.update(s, y)
    assert len(buf) == 3
    kept = [p[0] for p in buf.pairs]
    assert np.array_equal(kept[-1], pairs[-1][0])


def test_reset_equivalence():
    rng = np.random.default_rng(4)
    pairs = _random_pairs(rng, 5, 11)
    used = CurvaturePairBuffer(5)
    for s, y in pairs[:10]:
        used.update(s, y)
    used.reset()
    v = rng.standard_normal(5)
    assert np.array_equal(used.hvp(v), v)
    fresh = CurvaturePairBuffer(5)
    used.update(*pairs[10])
    fresh.update(*pairs[10])
    assert np.array_equal(used.hvp(v), fresh.hvp(v))


def test_gamma_rescaling():
    buf = CurvaturePairBuffer(2)
    buf.update([1.0, 0.0], [3.0, 1.0])
    assert buf.gamma == pytest.approx(10.0 / 3.0)
    # negative s.y leaves gamma alone
    g = buf.gamma
    buf.update([0.0, 1.0], [0.5, -2.0])
    assert buf.gamma == g


def test_skip_rule_prevents_blowup():
    # y - Bs nearly orthogonal to s: denominator tiny relative to the norms
    buf = CurvaturePairBuffer(2, rescale=False)
    s = np.array([1.0, 0.0])
    y = np.array([1.0 + 1e-12, 1.0])
    assert not buf.update(s, y)
    assert np.all(np.abs(buf.hvp([1.0, 1.0])) < 10)


@given(st.integers(0, 2**32 - 1))
def test_hvp_stays_bounded(seed):
    # every accepted pair has |s.r| >= tol |s||r|, so the rank-one terms are
    # bounded by |r| / (tol |s|)
    rng = np.random.default_rng(seed)
    buf = CurvaturePairBuffer(4, memory=5)
    for s, y in _random_pairs(rng, 4, 8):
        buf.update(s, y)
        out = buf.hvp(rng.standard_normal(4))
        assert np.all(np.isfinite(out))


def test_singular_middle_matrix_falls_back():
    # two identical pairs make the middle matrix exactly singular
    buf = CurvaturePairBuffer(2, rescale=False, skip_tol=0.0)
    buf._pairs.append((np.array([1.0, 0.0]), np.array([2.0, 0.0])))
    buf._pairs.append((np.array([1.0, 0.0]), np.array([2.0, 0.0])))
    buf._rebuild()
    assert buf.degenerate
    assert np.array_equal(buf.hvp([1.0, 2.0]), [1.0, 2.0])
