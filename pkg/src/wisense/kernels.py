"""Backend selection for the typical-set kernels.

The compiled extension is used when importable; set ``WISENSE_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKENDS = {"python": _kernels_py}

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None
else:
    BACKENDS["cython"] = _compiled

if _compiled is not None and not os.environ.get("WISENSE_PURE_PYTHON"):
    BACKEND = "cython"
else:
    BACKEND = "python"


def get_backend(name=None):
    name = name or BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available; have {sorted(BACKENDS)}") from None


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def scan_pairs(m_codes, mh_codes, m_logp, mh_logp, log_joint, dist, h_m, h_mh, h_joint,
               d_mean, eps, rhs_offset, tol=1e-9, backend=None):
    impl = get_backend(backend)
    count, mass, violations, max_slack = impl.scan_pairs(
        _i64(m_codes), _i64(mh_codes), _f64(m_logp), _f64(mh_logp), _f64(log_joint), _f64(dist),
        float(h_m), float(h_mh), float(h_joint), float(d_mean), float(eps),
        float(rhs_offset), float(tol))
    return int(count), float(mass), int(violations), float(max_slack)


def encode_first(codebooks, m_seqs, m_logp, mh_logtab, log_joint, dist, h_m, h_mh, h_joint,
                 d_mean, eps, backend=None):
    impl = get_backend(backend)
    return impl.encode_first(
        _i64(codebooks), _i64(m_seqs), _f64(m_logp), _f64(mh_logtab), _f64(log_joint), _f64(dist),
        float(h_m), float(h_mh), float(h_joint), float(d_mean), float(eps))
