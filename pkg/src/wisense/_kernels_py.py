"""Pure numpy implementations of the typical-set kernels.

Same signatures and results as the compiled ``_kernels`` module; used when
the extension is unavailable or ``WISENSE_PURE_PYTHON`` is set.
"""

import numpy as np

_CHUNK = 1 << 20


def _band(values, n, target, eps):
    with np.errstate(invalid="ignore"):
        return np.abs(-values / n - target) < eps


def scan_pairs(m_codes, mh_codes, m_logp, mh_logp, log_joint, dist,
               h_m, h_mh, h_joint, d_mean, eps, rhs_offset, tol):
    """Scan every (m^n, mhat^n) pair for distortion typicality.

    For each typical pair the bound slack
    ``log2 p(mhat^n | m^n) - (mh_logp + rhs_offset)`` is evaluated; a pair
    with slack above ``tol`` is a violation.

    Returns ``(count, mass, violations, max_slack)``.
    """
    n = m_codes.shape[1]
    rows = np.flatnonzero(_band(m_logp, n, h_m, eps))
    cols = np.flatnonzero(_band(mh_logp, n, h_mh, eps))
    count, mass, violations, max_slack = 0, 0.0, 0, -np.inf
    if rows.size == 0 or cols.size == 0:
        return count, mass, violations, max_slack
    B = mh_codes[cols]
    step = max(1, _CHUNK // cols.size)
    for lo in range(0, rows.size, step):
        r = rows[lo:lo + step]
        A = m_codes[r]
        lj = np.zeros((r.size, cols.size))
        ds = np.zeros((r.size, cols.size))
        for j in range(n):
            lj += log_joint[A[:, j][:, None], B[:, j][None, :]]
            ds += dist[A[:, j][:, None], B[:, j][None, :]]
        with np.errstate(invalid="ignore"):
            typ = _band(lj, n, h_joint, eps) & (np.abs(ds / n - d_mean) < eps)
        if not typ.any():
            continue
        slack = (lj - m_logp[r][:, None]) - (mh_logp[cols][None, :] + rhs_offset)
        s = slack[typ]
        count += int(typ.sum())
        mass += float(np.exp2(lj[typ]).sum())
        violations += int((s > tol).sum())
        max_slack = max(max_slack, float(s.max()))
    return count, mass, violations, max_slack


def encode_first(codebooks, m_seqs, m_logp, mh_logtab, log_joint, dist,
                 h_m, h_mh, h_joint, d_mean, eps):
    """Index of the first codeword typical with each source block, or -1.

    ``mh_logtab[t, j, b]`` is log2 of the probability of reproduction
    symbol ``b`` at position ``j`` of trial ``t`` (marginal or conditioned
    on the history state at that position).
    """
    T, C, n = codebooks.shape
    out = np.full(T, -1, dtype=np.int64)
    pos = np.arange(n)
    for t in range(T):
        if not abs(-m_logp[t] / n - h_m) < eps:
            continue
        cb = codebooks[t]
        m = m_seqs[t]
        lq = mh_logtab[t][pos, cb].sum(axis=1)
        lj = log_joint[m, cb].sum(axis=1)
        ds = dist[m, cb].sum(axis=1)
        ok = _band(lq, n, h_mh, eps) & _band(lj, n, h_joint, eps) & (np.abs(ds / n - d_mean) < eps)
        hits = np.flatnonzero(ok)
        if hits.size:
            out[t] = hits[0]
    return out
