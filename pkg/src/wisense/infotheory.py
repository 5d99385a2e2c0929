"""Distortion typical sets on small discrete sources.

Everything here is in bits. A :class:`JointSource` holds p(m, mhat); an
optional :class:`HistoryModel` is a finite-state stand-in for the estimate
history: a state s with p(s) and p(mhat | s) whose mixture reproduces the
marginal p(mhat). Block-level quantities assume one history state per symbol,
so a block carries a state sequence s^n.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import kernels

ENUMERATION_BUDGET = 10 ** 7
SLACK_TOL = 1e-9
CODEBOOK_BLOCK_SYMBOLS = 1 << 20


class EnumerationBudgetError(ValueError):
    pass


class HistoryModelError(ValueError):
    pass


def entropy(pmf) -> float:
    p = np.asarray(pmf, dtype=float).ravel()
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def _log2(p):
    with np.errstate(divide="ignore"):
        return np.log2(np.asarray(p, dtype=float))


def _check_pmf(p, name, axis=None):
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError(f"{name} has negative entries")
    total = p.sum(axis=axis)
    if not np.allclose(total, 1.0, atol=1e-12, rtol=0):
        raise ValueError(f"{name} does not sum to 1 (got {total})")
    return p


@dataclass
class HistoryModel:
    state_pmf: np.ndarray         # (S,)
    mhat_given_state: np.ndarray  # (S, |Mhat|), rows sum to 1

    def __post_init__(self):
        self.state_pmf = _check_pmf(self.state_pmf, "state_pmf")
        self.mhat_given_state = _check_pmf(self.mhat_given_state, "mhat_given_state", axis=1)
        if self.mhat_given_state.shape[0] != self.state_pmf.size:
            raise ValueError("one conditional row per history state required")

    @property
    def n_states(self) -> int:
        return self.state_pmf.size

    @property
    def mhat_marginal(self) -> np.ndarray:
        return self.state_pmf @ self.mhat_given_state

    @property
    def conditional_entropy(self) -> float:
        """H(Mhat | history)."""
        return float(sum(ps * entropy(row) for ps, row in zip(self.state_pmf, self.mhat_given_state)))


@dataclass
class JointSource:
    joint_pmf: np.ndarray  # (|M|, |Mhat|)
    history: Optional[HistoryModel] = None
    alphabet_m: Optional[Sequence] = None
    alphabet_mhat: Optional[Sequence] = None

    def __post_init__(self):
        self.joint_pmf = _check_pmf(self.joint_pmf, "joint_pmf")
        if self.joint_pmf.ndim != 2:
            raise ValueError("joint_pmf must be a 2-D table p(m, mhat)")
        a, b = self.joint_pmf.shape
        self.alphabet_m = list(range(a)) if self.alphabet_m is None else list(self.alphabet_m)
        self.alphabet_mhat = list(range(b)) if self.alphabet_mhat is None else list(self.alphabet_mhat)
        if len(self.alphabet_m) != a or len(self.alphabet_mhat) != b:
            raise ValueError("alphabet sizes do not match joint_pmf")
        if self.history is not None:
            if self.history.mhat_given_state.shape[1] != b:
                raise ValueError("history model alphabet does not match Mhat")
            if not np.allclose(self.history.mhat_marginal, self.p_mhat, atol=1e-9, rtol=0):
                raise ValueError("history model marginal disagrees with p(mhat)")

    @property
    def p_m(self) -> np.ndarray:
        return self.joint_pmf.sum(axis=1)

    @property
    def p_mhat(self) -> np.ndarray:
        return self.joint_pmf.sum(axis=0)

    @property
    def m_given_mhat(self) -> np.ndarray:
        """p(m | mhat) as (|Mhat|, |M|); zero columns of p(mhat) give zero rows."""
        pm = self.p_mhat
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(pm[:, None] > 0, self.joint_pmf.T / pm[:, None], 0.0)
        return out

    def require_history(self) -> HistoryModel:
        if self.history is None:
            raise HistoryModelError("source has no history model")
        return self.history

    @property
    def history_information(self) -> float:
        """I(Mhat; history) = H(Mhat) - H(Mhat | history); 0 without a model."""
        if self.history is None:
            return 0.0
        return max(0.0, entropy(self.p_mhat) - self.history.conditional_entropy)


def mutual_information(src: JointSource) -> float:
    value = entropy(src.p_m) + entropy(src.p_mhat) - entropy(src.joint_pmf)
    return max(0.0, value)


def hamming(a: int, b: int) -> int:
    return int(a != b)


@dataclass
class TypicalParams:
    n: int
    epsilon: float
    distortion: Union[None, np.ndarray, Callable] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("block length n must be a positive integer")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def distortion_matrix(self, src: JointSource) -> np.ndarray:
        shape = src.joint_pmf.shape
        d = self.distortion
        if d is None:
            d = hamming
        if callable(d):
            mat = np.array([[d(a, b) for b in src.alphabet_mhat] for a in src.alphabet_m], dtype=float)
        else:
            mat = np.asarray(d, dtype=float)
        if mat.shape != shape:
            raise ValueError(f"distortion table shape {mat.shape} != {shape}")
        if np.any(mat < 0) or not np.all(np.isfinite(mat)):
            raise ValueError("distortion must be finite and non-negative")
        return mat


def expected_distortion(src: JointSource, params: TypicalParams) -> float:
    return float((src.joint_pmf * params.distortion_matrix(src)).sum())


def _targets(src, params):
    return (entropy(src.p_m), entropy(src.p_mhat), entropy(src.joint_pmf),
            expected_distortion(src, params))


def _as_index_seq(seq, n):
    arr = np.asarray(seq, dtype=np.int64)
    if arr.shape != (n,):
        raise ValueError(f"expected a sequence of length {n}")
    return arr


def _seq_logp(pmf, seq):
    return float(_log2(pmf)[seq].sum())


def _typical(m, mh, src, params, mh_logp, h_mh):
    n, eps = params.n, params.epsilon
    h_m, _, h_joint, d_mean = _targets(src, params)
    lp_m = _seq_logp(src.p_m, m)
    lp_joint = float(_log2(src.joint_pmf)[m, mh].sum())
    dist = float(params.distortion_matrix(src)[m, mh].mean())
    # log 0 = -inf makes -(1/n) log p infinite, which fails every band
    return (abs(-lp_m / n - h_m) < eps and abs(-mh_logp / n - h_mh) < eps
            and abs(-lp_joint / n - h_joint) < eps and abs(dist - d_mean) < eps)


def is_distortion_typical(m_seq, mhat_seq, src: JointSource, params: TypicalParams) -> bool:
    m = _as_index_seq(m_seq, params.n)
    mh = _as_index_seq(mhat_seq, params.n)
    return _typical(m, mh, src, params, _seq_logp(src.p_mhat, mh), entropy(src.p_mhat))


def _state_seq(history_state, n):
    s = np.asarray(history_state, dtype=np.int64)
    if s.ndim == 0:
        s = np.full(n, int(s))
    if s.shape != (n,):
        raise ValueError(f"history state must be a scalar or a length-{n} sequence")
    return s


def is_temporal_distortion_typical(m_seq, mhat_seq, history_state, src: JointSource,
                                   params: TypicalParams) -> bool:
    """Like :func:`is_distortion_typical` with the mhat band taken against
    p(mhat^n | s^n) and H(Mhat | history)."""
    hist = src.require_history()
    m = _as_index_seq(m_seq, params.n)
    mh = _as_index_seq(mhat_seq, params.n)
    s = _state_seq(history_state, params.n)
    lq = float(_log2(hist.mhat_given_state)[s, mh].sum())
    return _typical(m, mh, src, params, lq, hist.conditional_entropy)


# --------------------------------------------------------------------------
# exhaustive lemma checks

@dataclass
class LemmaReport:
    pairs_enumerated: int
    typical_pairs: int
    violations: int
    max_slack: float        # max over typical pairs of lhs - rhs in log2; <= 0 means satisfied
    typical_mass: float     # probability of the typical set (Def 1 only)
    mutual_information: float
    history_information: float = 0.0
    lower_bound_ordered: bool = True

    @property
    def ok(self) -> bool:
        return self.violations == 0 and self.lower_bound_ordered


def all_sequences(alphabet_size: int, n: int) -> np.ndarray:
    return np.array(list(itertools.product(range(alphabet_size), repeat=n)), dtype=np.int64).reshape(-1, n)


def _budget(count):
    if count > ENUMERATION_BUDGET:
        raise EnumerationBudgetError(f"enumeration of {count} pairs exceeds budget {ENUMERATION_BUDGET}")


def _sequence_logps(codes, pmf):
    return _log2(pmf)[codes].sum(axis=1)


def verify_lemma1(src: JointSource, params: TypicalParams, backend=None) -> LemmaReport:
    """Check p(mhat^n|m^n) <= p(mhat^n) 2^{n(I + 3 eps)} on every typical pair."""
    a, b = src.joint_pmf.shape
    n, eps = params.n, params.epsilon
    _budget(a ** n * b ** n)
    mc, hc = all_sequences(a, n), all_sequences(b, n)
    h_m, h_mh, h_joint, d_mean = _targets(src, params)
    info = mutual_information(src)
    count, mass, viol, slack = kernels.scan_pairs(
        mc, hc, _sequence_logps(mc, src.p_m), _sequence_logps(hc, src.p_mhat),
        _log2(src.joint_pmf), params.distortion_matrix(src),
        h_m, h_mh, h_joint, d_mean, eps, n * (info + 3 * eps), SLACK_TOL, backend=backend)
    return LemmaReport(len(mc) * len(hc), count, viol, slack, mass, info)


def verify_lemma2(src: JointSource, params: TypicalParams, backend=None) -> LemmaReport:
    """Check p(mhat^n|m^n) <= p(mhat^n|s^n) 2^{n(I - I_hist + 3 eps)} on every
    temporal typical pair, for every history state sequence s^n."""
    hist = src.require_history()
    a, b = src.joint_pmf.shape
    n, eps = params.n, params.epsilon
    states = all_sequences(hist.n_states, n)
    _budget(len(states) * a ** n * b ** n)
    mc, hc = all_sequences(a, n), all_sequences(b, n)
    h_m, _, h_joint, d_mean = _targets(src, params)
    h_cond = hist.conditional_entropy
    info, info_h = mutual_information(src), src.history_information
    m_logp = _sequence_logps(mc, src.p_m)
    log_joint, dist = _log2(src.joint_pmf), params.distortion_matrix(src)
    log_cond = _log2(hist.mhat_given_state)
    offset = n * (info - info_h + 3 * eps)
    total, viol, slack = 0, 0, -np.inf
    for s in states:
        lq = log_cond[s[None, :], hc].sum(axis=1)
        c, _, v, sl = kernels.scan_pairs(mc, hc, m_logp, lq, log_joint, dist, h_m, h_cond,
                                         h_joint, d_mean, eps, offset, SLACK_TOL, backend=backend)
        total += c
        viol += v
        slack = max(slack, sl)
    # lower bounds on p(mhat^n) vs p(mhat^n | s^n): ordered iff I_hist >= 0
    ordered = n * (info + 3 * eps) >= offset - 1e-12
    return LemmaReport(len(states) * len(mc) * len(hc), total, viol, slack, float("nan"),
                       info, info_h, ordered)


# --------------------------------------------------------------------------
# bounds and random coding

def _exp_neg_pow2(exponent_bits: float) -> float:
    with np.errstate(over="ignore"):
        return float(np.exp(-np.exp2(exponent_bits)))


def distortion_bound(src: JointSource, params: TypicalParams, rate: float) -> tuple[float, float]:
    """Upper bounds on expected distortion without and with history.

    D + d_max exp(-2^{n(R - I - 3eps)}) + (1 + d_max) eps, and the same with
    I replaced by I - I_hist.
    """
    n, eps = params.n, params.epsilon
    d = params.distortion_matrix(src)
    D, d_max = expected_distortion(src, params), float(d.max())
    info, info_h = mutual_information(src), src.history_information
    tail = (1 + d_max) * eps
    iid = D + d_max * _exp_neg_pow2(n * (rate - info - 3 * eps)) + tail
    temporal = D + d_max * _exp_neg_pow2(n * (rate - info + info_h - 3 * eps)) + tail
    return iid, temporal


@dataclass
class CodingResult:
    distortions: np.ndarray  # realized per-trial average distortion
    failed: np.ndarray       # True where no codeword was typical (w = 1 sent)
    codebook_size: int
    expected_distortion: float
    d_max: float
    epsilon: float
    conditioned: bool

    @property
    def failure_rate(self) -> float:
        return float(self.failed.mean())

    @property
    def mean(self) -> float:
        return float(self.distortions.mean())

    @property
    def bound(self) -> float:
        """D + eps + P_e d_max with the empirical failure rate."""
        return self.expected_distortion + self.epsilon + self.failure_rate * self.d_max


def codebook_size(n: int, rate: float) -> int:
    return int(math.ceil(2 ** (n * rate) - 1e-9))


def _inverse_cdf(u, pmf_rows):
    """Sample indices by inverse CDF; ``pmf_rows`` broadcasts against ``u``."""
    cdf = np.cumsum(pmf_rows, axis=-1)
    cdf[..., -1] = 1.0
    return (u[..., None] >= cdf).sum(axis=-1)


def trial_rng(seed: int, trial: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(trial), int(stream)])


def simulate_random_coding(src: JointSource, params: TypicalParams, rate: float, trials: int,
                           seed: int = 0, conditioned: bool = False, backend=None,
                           chunk: int = 256) -> CodingResult:
    """Random codebook + first-typical-codeword encoding, ``trials`` times.

    Per trial: draw the source block (given a history state sequence when the
    source has a history model), draw ``ceil(2^{nR})`` codewords i.i.d. from
    p(mhat) or, when ``conditioned``, from p(mhat | s_j), and send the least
    index forming a (temporal) typical pair, else index 0. Source and
    codebook uniforms come from per-trial substreams keyed by (seed, trial),
    so conditioned/unconditioned runs with equal seeds are paired.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if conditioned:
        src.require_history()
    n, eps = params.n, params.epsilon
    C = codebook_size(n, rate)
    dist = params.distortion_matrix(src)
    h_m, h_mh, h_joint, d_mean = _targets(src, params)
    hist = src.history
    if conditioned:
        h_mh = hist.conditional_entropy
    log_joint = _log2(src.joint_pmf)
    log_pm, log_pmh = _log2(src.p_m), _log2(src.p_mhat)
    m_given_mhat = src.m_given_mhat

    distortions = np.empty(trials)
    failed = np.empty(trials, dtype=bool)
    for lo in range(0, trials, chunk):
        ids = list(range(lo, min(trials, lo + chunk)))
        m_seqs, mh_tabs, rows, gens = [], [], [], []
        for t in ids:
            r_src = trial_rng(seed, t, 0)
            if hist is not None:
                s = _inverse_cdf(r_src.random(n), hist.state_pmf)
                p_m_given_s = hist.mhat_given_state[s] @ m_given_mhat   # (n, |M|)
                m = _inverse_cdf(r_src.random(n), p_m_given_s)
            else:
                s = None
                m = _inverse_cdf(r_src.random(n), src.p_m)
            if conditioned:
                r = hist.mhat_given_state[s]                             # (n, |Mhat|)
                rows.append(r[None, :, :])
                mh_tabs.append(_log2(r))
            else:
                rows.append(src.p_mhat)
                mh_tabs.append(np.broadcast_to(log_pmh, (n, log_pmh.size)))
            m_seqs.append(m)
            gens.append(trial_rng(seed, t, 1))
        m_seqs = np.array(m_seqs)
        mh_tabs = np.array(mh_tabs)
        m_logp = log_pm[m_seqs].sum(axis=1)
        chosen = np.empty_like(m_seqs)
        found = np.zeros(len(ids), dtype=bool)
        # codewords are drawn lazily in blocks from each trial's stream; the
        # stream is consumed in order, so this equals drawing all C up front
        with np.errstate(invalid="ignore"):
            pending = np.flatnonzero(np.abs(-m_logp / n - h_m) < eps)
        scanned = pending
        block = max(1, CODEBOOK_BLOCK_SYMBOLS // (n * max(1, len(ids))))
        first = None
        offset = 0
        while offset < C and pending.size:
            size = min(block, C - offset)
            books = np.array([_inverse_cdf(gens[i].random((size, n)), rows[i]) for i in pending])
            if first is None:
                first = books[:, 0]
            idx = kernels.encode_first(books, m_seqs[pending], m_logp[pending], mh_tabs[pending],
                                       log_joint, dist, h_m, h_mh, h_joint, d_mean, eps,
                                       backend=backend)
            hit = idx >= 0
            chosen[pending[hit]] = books[hit, idx[hit]]
            found[pending[hit]] = True
            pending = pending[~hit]
            offset += size
        # failures send the first codeword; draw it for trials never scanned
        fallback = {}
        if first is not None:
            fallback = dict(zip(scanned.tolist(), first))
        for i in np.flatnonzero(~found):
            cw = fallback.get(int(i))
            if cw is None:
                cw = _inverse_cdf(trial_rng(seed, ids[i], 1).random((1, n)), rows[i])[0]
            chosen[i] = cw
        sl = slice(lo, lo + len(ids))
        distortions[sl] = dist[m_seqs, chosen].mean(axis=1)
        failed[sl] = ~found
    return CodingResult(distortions, failed, C, d_mean, float(dist.max()), eps, conditioned)


# --------------------------------------------------------------------------
# random sources

def random_source(rng: np.random.Generator, n_m: int, n_mhat: int, n_states: int = 0,
                  dependence: float = 0.5, concentration: float = 1.0) -> JointSource:
    """Random joint source, optionally with a consistent history model.

    With a history model the reproduction variable is generated as
    s -> mhat -> m, so p(mhat) = sum_s p(s) p(mhat|s). ``dependence`` in
    [0, 1] blends each state's conditional between a shared base pmf (0, no
    dependence) and a state-specific pmf (1).
    """
    alpha_h = np.full(n_mhat, concentration)
    history = None
    if n_states:
        p_s = rng.dirichlet(np.ones(n_states))
        base = rng.dirichlet(alpha_h)
        specific = rng.dirichlet(alpha_h, size=n_states)
        cond = (1 - dependence) * base + dependence * specific
        cond /= cond.sum(axis=1, keepdims=True)
        p_s = p_s / p_s.sum()
        history = HistoryModel(p_s, cond)
        p_mhat = p_s @ cond
    else:
        p_mhat = rng.dirichlet(alpha_h)
    m_given = rng.dirichlet(np.full(n_m, concentration), size=n_mhat)  # (|Mhat|, |M|)
    joint = (p_mhat[:, None] * m_given).T
    joint /= joint.sum()
    if history is not None:
        # renormalisation above is at rounding level; rebuild conditionals on the exact marginal
        p_mhat = joint.sum(axis=0)
        cond = history.mhat_given_state
        scale = p_mhat / (history.state_pmf @ cond)
        cond = cond * scale
        cond /= cond.sum(axis=1, keepdims=True)
        history = _consistent_history(history.state_pmf, cond, p_mhat)
    return JointSource(joint, history)


def _consistent_history(p_s, cond, p_mhat):
    # absorb the residual mismatch into the most probable state's row
    resid = p_mhat - p_s @ cond
    k = int(np.argmax(p_s))
    cond = cond.copy()
    cond[k] += resid / p_s[k]
    if np.any(cond < 0):
        raise ValueError("could not build a consistent history model")
    return HistoryModel(p_s, cond / cond.sum(axis=1, keepdims=True))


def symmetric_source(alphabet: int, flip: float, n_states: int = 0,
                     history_strength: float = 0.0) -> JointSource:
    """Uniform M and Mhat with P(m != mhat) = ``flip`` spread evenly.

    With ``n_states == alphabet`` the history state points at one symbol:
    p(mhat | s) puts ``history_strength`` extra weight on mhat = s over the
    uniform pmf, keeping the marginal uniform when p(s) is uniform.
    """
    a = alphabet
    joint = np.full((a, a), flip / (a * (a - 1)) if a > 1 else 0.0)
    np.fill_diagonal(joint, (1 - flip) / a)
    history = None
    if n_states:
        if n_states != a:
            raise ValueError("symmetric history model needs one state per symbol")
        cond = np.full((a, a), (1 - history_strength) / a)
        cond[np.diag_indices(a)] += history_strength
        history = HistoryModel(np.full(a, 1.0 / a), cond)
    return JointSource(joint, history)
