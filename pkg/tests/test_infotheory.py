import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wisense import infotheory as it
from wisense import kernels
from wisense.infotheory import JointSource, HistoryModel, TypicalParams

BACKENDS = sorted(kernels.BACKENDS)


def seeded(seed, a=2, b=2, states=2, dependence=0.7):
    return it.random_source(np.random.default_rng(seed), a, b, n_states=states, dependence=dependence)


# ---------------------------------------------------------------- entropies

def test_entropy_examples():
    assert it.entropy([0.5, 0.5]) == pytest.approx(1.0)
    assert it.entropy([1.0, 0.0]) == 0.0
    assert it.entropy([0.25, 0.75]) == pytest.approx(0.8113, abs=1e-4)


def test_mutual_information_examples():
    assert it.mutual_information(JointSource(np.outer([0.3, 0.7], [0.6, 0.4]))) == pytest.approx(0, abs=1e-12)
    assert it.mutual_information(JointSource(np.eye(2) / 2)) == pytest.approx(1.0)
    bsc = it.symmetric_source(2, 0.1)
    h = -(0.1 * math.log2(0.1) + 0.9 * math.log2(0.9))
    assert it.mutual_information(bsc) == pytest.approx(1 - h)
    assert it.mutual_information(bsc) == pytest.approx(0.531, abs=1e-3)


@settings(max_examples=60)
@given(st.integers(0, 10**6), st.integers(2, 3), st.integers(2, 3))
def test_information_bounds(seed, a, b):
    src = it.random_source(np.random.default_rng(seed), a, b, n_states=2)
    assert it.mutual_information(src) >= 0
    assert it.entropy(src.p_m) <= math.log2(a) + 1e-12
    assert it.entropy(src.p_mhat) <= math.log2(b) + 1e-12
    assert 0 <= src.history_information <= it.entropy(src.p_mhat) + 1e-12
    np.testing.assert_allclose(src.history.mhat_marginal, src.p_mhat, atol=1e-9)


def test_source_validation():
    with pytest.raises(ValueError):
        JointSource(np.array([[0.5, 0.6], [0.0, -0.1]]))
    with pytest.raises(ValueError):
        JointSource(np.array([[0.5, 0.2], [0.2, 0.2]]))
    with pytest.raises(ValueError):
        JointSource(np.eye(2) / 2, HistoryModel([1.0], [[0.9, 0.1]]))
    with pytest.raises(ValueError):
        TypicalParams(0, 0.1)
    with pytest.raises(ValueError):
        TypicalParams(3, 0.0)


# ---------------------------------------------------------------- typicality

def brute_typical(m, mh, joint, eps, dist=None):
    """Second, loop-based implementation of the four typicality bands."""
    a, b = len(joint), len(joint[0])
    pm = [sum(joint[i][j] for j in range(b)) for i in range(a)]
    ph = [sum(joint[i][j] for i in range(a)) for j in range(b)]
    H = lambda ps: -sum(p * math.log2(p) for p in ps if p > 0)
    hm, hh = H(pm), H(ph)
    hj = H([joint[i][j] for i in range(a) for j in range(b)])
    dist = dist or [[float(i != j) for j in range(b)] for i in range(a)]
    D = sum(joint[i][j] * dist[i][j] for i in range(a) for j in range(b))
    n = len(m)

    def rate(ps):
        if any(p == 0 for p in ps):
            return math.inf
        return -sum(math.log2(p) for p in ps) / n

    return (abs(rate([pm[x] for x in m]) - hm) < eps and abs(rate([ph[y] for y in mh]) - hh) < eps
            and abs(rate([joint[x][y] for x, y in zip(m, mh)]) - hj) < eps
            and abs(sum(dist[x][y] for x, y in zip(m, mh)) / n - D) < eps)


@pytest.mark.parametrize("seed", range(5))
def test_typical_count_matches_brute_force(seed):
    src = seeded(seed, states=0)
    p = TypicalParams(4, 0.3)
    joint = src.joint_pmf.tolist()
    seqs = list(itertools.product(range(2), repeat=4))
    expect = sum(brute_typical(m, mh, joint, 0.3) for m in seqs for mh in seqs)
    got = sum(it.is_distortion_typical(m, mh, src, p) for m in seqs for mh in seqs)
    assert got == expect
    assert it.verify_lemma1(src, p).typical_pairs == expect


def test_typical_exact_empirical_match():
    src = JointSource(np.full((2, 2), 0.25))
    m, mh = [0, 1, 0, 1], [0, 0, 1, 1]
    assert it.is_distortion_typical(m, mh, src, TypicalParams(4, 0.5))


def test_zero_probability_not_typical():
    joint = np.array([[0.5, 0.0], [0.25, 0.25]])
    src = JointSource(joint, HistoryModel([1.0], [joint.sum(axis=0)]))
    p = TypicalParams(3, 10.0)
    assert not it.is_distortion_typical([0, 0, 1], [0, 1, 0], src, p)
    assert it.is_distortion_typical([0, 0, 1], [0, 0, 0], src, p)
    assert not it.is_temporal_distortion_typical([0, 0, 1], [0, 1, 0], 0, src, p)


def test_temporal_degenerates_without_dependence():
    base = seeded(3, states=0)
    hist = HistoryModel([0.4, 0.6], np.tile(base.p_mhat, (2, 1)))
    src = JointSource(base.joint_pmf, hist)
    p = TypicalParams(4, 0.2)
    seqs = list(itertools.product(range(2), repeat=4))
    for s in itertools.product(range(2), repeat=4):
        for m in seqs[::3]:
            for mh in seqs:
                assert it.is_temporal_distortion_typical(m, mh, s, src, p) == it.is_distortion_typical(m, mh, src, p)


def test_temporal_deterministic_history():
    # state s emits mhat = s; m is a noisy copy of mhat
    p_s = np.array([0.5, 0.5])
    joint = (p_s[:, None] * np.array([[0.9, 0.1], [0.2, 0.8]])).T
    src = JointSource(joint, HistoryModel(p_s, np.eye(2)))
    p = TypicalParams(4, 0.6)
    seqs = list(itertools.product(range(2), repeat=4))
    for s in seqs:
        passing = [(m, mh) for m in seqs for mh in seqs
                   if it.is_temporal_distortion_typical(m, mh, s, src, p)]
        assert passing
        assert all(mh == s for _, mh in passing)


def test_temporal_requires_history():
    src = seeded(0, states=0)
    with pytest.raises(it.HistoryModelError):
        it.is_temporal_distortion_typical([0], [0], 0, src, TypicalParams(1, 0.1))
    with pytest.raises(it.HistoryModelError):
        it.verify_lemma2(src, TypicalParams(2, 0.1))


# ---------------------------------------------------------------- lemmas

def brute_lemma1(src, p):
    n, eps = p.n, p.epsilon
    I = it.mutual_information(src)
    viol = 0
    for m in itertools.product(range(src.joint_pmf.shape[0]), repeat=n):
        pm = math.prod(src.p_m[x] for x in m)
        for mh in itertools.product(range(src.joint_pmf.shape[1]), repeat=n):
            if not it.is_distortion_typical(m, mh, src, p):
                continue
            lhs = math.prod(src.joint_pmf[x, y] for x, y in zip(m, mh)) / pm
            rhs = math.prod(src.p_mhat[y] for y in mh) * 2 ** (n * (I + 3 * eps))
            viol += lhs > rhs * (1 + 1e-9)
    return viol


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("seed", range(4))
def test_lemma1_random_sources(seed, backend):
    src = seeded(seed, states=0)
    r = it.verify_lemma1(src, TypicalParams(4, 0.2), backend=backend)
    assert r.violations == 0 and r.max_slack <= 1e-9
    assert r.pairs_enumerated == 256
    assert brute_lemma1(src, TypicalParams(4, 0.2)) == 0


def test_lemma1_independent_source():
    src = JointSource(np.outer([0.3, 0.7], [0.55, 0.45]))
    r = it.verify_lemma1(src, TypicalParams(6, 0.1))
    assert r.mutual_information == pytest.approx(0, abs=1e-12)
    assert r.violations == 0 and r.typical_pairs > 0


def test_lemma1_empty_typical_set():
    r = it.verify_lemma1(seeded(1, states=0), TypicalParams(3, 1e-9))
    assert r.typical_pairs == 0 and r.violations == 0


@pytest.mark.parametrize("backend", BACKENDS)
def test_lemma2_markov_toy(backend):
    src = seeded(5, states=2, dependence=0.9)
    r = it.verify_lemma2(src, TypicalParams(4, 0.25), backend=backend)
    assert r.ok and r.typical_pairs > 0
    assert r.history_information > 0


def test_lemma2_no_dependence_matches_lemma1():
    base = seeded(2, states=0)
    src = JointSource(base.joint_pmf, HistoryModel([0.3, 0.7], np.tile(base.p_mhat, (2, 1))))
    p = TypicalParams(4, 0.2)
    r1, r2 = it.verify_lemma1(src, p), it.verify_lemma2(src, p)
    assert r2.history_information == pytest.approx(0, abs=1e-12)
    assert r2.typical_pairs == 16 * r1.typical_pairs
    assert r2.violations == 0


def test_lemma2_strong_dependence():
    src = it.symmetric_source(2, 0.1, n_states=2, history_strength=0.98)
    assert src.history_information > 0.8 * it.entropy(src.p_mhat)
    r = it.verify_lemma2(src, TypicalParams(4, 0.5))
    assert r.ok and r.typical_pairs > 0


def test_enumeration_budget():
    with pytest.raises(it.EnumerationBudgetError):
        it.verify_lemma1(it.symmetric_source(3, 0.2), TypicalParams(8, 0.1))


def test_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend not built")
    for seed in range(6):
        src = seeded(seed, a=3, b=2, states=2)
        p = TypicalParams(3, 0.3)
        a = it.verify_lemma2(src, p, backend="python")
        b = it.verify_lemma2(src, p, backend="cython")
        assert (a.typical_pairs, a.violations) == (b.typical_pairs, b.violations)
        assert a.max_slack == pytest.approx(b.max_slack, abs=1e-12)
        ra = it.simulate_random_coding(src, TypicalParams(5, 0.3), 1.0, 40, seed=seed, conditioned=True, backend="python")
        rb = it.simulate_random_coding(src, TypicalParams(5, 0.3), 1.0, 40, seed=seed, conditioned=True, backend="cython")
        np.testing.assert_array_equal(ra.distortions, rb.distortions)


def test_typical_mass_grows_with_n():
    # average over sources of the typical-set probability, fixed eps
    masses = []
    for n in range(2, 9):
        masses.append(np.mean([it.verify_lemma1(seeded(s, states=0), TypicalParams(n, 0.3)).typical_mass
                               for s in range(10)]))
    assert all(b >= a - 1e-12 for a, b in zip(masses, masses[1:])), masses


# ---------------------------------------------------------------- bounds

def test_bounds_equal_without_history():
    src = seeded(0, states=0)
    a, b = it.distortion_bound(src, TypicalParams(6, 0.1), 1.2)
    assert a == b


@settings(max_examples=100)
@given(st.integers(0, 10**6), st.floats(0.0, 3.0), st.sampled_from([0.1, 0.2, 0.3]), st.integers(1, 12))
def test_bound_ordering(seed, rate, eps, n):
    src = seeded(seed, a=3, b=3, states=3)
    iid, tmp = it.distortion_bound(src, TypicalParams(n, eps), rate)
    assert tmp <= iid


def test_bound_closed_form():
    src = it.symmetric_source(2, 0.1, n_states=2, history_strength=0.5)
    p = TypicalParams(4, 0.1)
    I, Ih = it.mutual_information(src), src.history_information
    iid, tmp = it.distortion_bound(src, p, 1.0)
    assert iid == pytest.approx(0.1 + math.exp(-2 ** (4 * (1.0 - I - 0.3))) + 2 * 0.1)
    assert tmp == pytest.approx(0.1 + math.exp(-2 ** (4 * (1.0 - I + Ih - 0.3))) + 2 * 0.1)


# ---------------------------------------------------------------- random coding

def test_codebook_size():
    assert it.codebook_size(4, 1.0) == 16
    assert it.codebook_size(3, 0.5) == 3
    assert it.codebook_size(5, 0.0) == 1


def test_random_coding_deterministic_source():
    src = JointSource(np.array([[1.0, 0.0], [0.0, 0.0]]))
    r = it.simulate_random_coding(src, TypicalParams(6, 0.1), 1.0, 50)
    assert np.all(r.distortions == 0) and r.failure_rate == 0


def test_random_coding_zero_trials():
    with pytest.raises(ValueError):
        it.simulate_random_coding(seeded(0), TypicalParams(4, 0.2), 1.0, 0)


def reference_coder(src, p, rate, trials, seed, conditioned):
    """Materialises every codebook and scans it with the scalar predicates."""
    n = p.n
    C = it.codebook_size(n, rate)
    hist = src.history
    out = []
    for t in range(trials):
        r = it.trial_rng(seed, t, 0)
        s = it._inverse_cdf(r.random(n), hist.state_pmf)
        m = it._inverse_cdf(r.random(n), hist.mhat_given_state[s] @ src.m_given_mhat)
        rows = hist.mhat_given_state[s][None] if conditioned else src.p_mhat
        book = it._inverse_cdf(it.trial_rng(seed, t, 1).random((C, n)), rows)
        pick = book[0]
        for cw in book:
            ok = (it.is_temporal_distortion_typical(m, cw, s, src, p) if conditioned
                  else it.is_distortion_typical(m, cw, src, p))
            if ok:
                pick = cw
                break
        out.append(np.mean(m != pick))
    return np.array(out)


@pytest.mark.parametrize("conditioned", [False, True])
def test_lazy_codebook_matches_materialised(conditioned, monkeypatch):
    monkeypatch.setattr(it, "CODEBOOK_BLOCK_SYMBOLS", 64)  # force many small blocks
    src = it.symmetric_source(2, 0.15, n_states=2, history_strength=0.6)
    p = TypicalParams(6, 0.25)
    got = it.simulate_random_coding(src, p, 1.1, 30, seed=3, conditioned=conditioned, chunk=7)
    np.testing.assert_array_equal(got.distortions, reference_coder(src, p, 1.1, 30, 3, conditioned))


def test_random_coding_chunk_independent():
    src = seeded(4, states=2)
    p = TypicalParams(6, 0.3)
    a = it.simulate_random_coding(src, p, 0.9, 60, seed=1, chunk=5)
    b = it.simulate_random_coding(src, p, 0.9, 60, seed=1, chunk=64)
    np.testing.assert_array_equal(a.distortions, b.distortions)
    np.testing.assert_array_equal(a.failed, b.failed)


def test_random_coding_high_rate_meets_bound():
    src = it.symmetric_source(2, 0.1)
    p = TypicalParams(8, 0.25)
    rate = it.mutual_information(src) + 3 * 0.25 + 0.1
    r = it.simulate_random_coding(src, p, rate, 300, seed=0)
    assert r.mean <= r.bound
    assert r.codebook_size == it.codebook_size(8, rate)


def test_conditioned_needs_history():
    with pytest.raises(it.HistoryModelError):
        it.simulate_random_coding(seeded(0, states=0), TypicalParams(4, 0.2), 1.0, 5, conditioned=True)


def test_symmetric_source_history():
    src = it.symmetric_source(3, 0.2, n_states=3, history_strength=0.5)
    np.testing.assert_allclose(src.p_mhat, 1 / 3)
    with pytest.raises(ValueError):
        it.symmetric_source(3, 0.2, n_states=2)
