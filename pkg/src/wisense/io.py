"""Binary and CSV formats.

CSIS  raw CSI:      "CSIS" u32 version, u32 T, N_r, N_t, N_sub, f64 sample_rate,
                    then complex64 (T, N_r, N_t, N_sub); time starts at 0
CSID  dynamic:      "CSID" u32 version, u32 T, K, N_sub, ref, f64 sample_rate,
                    f64 start_time, then float32 (T, 2, K, N_sub)
WSNW  weights:      "WSNW" u32 version, u32 header length, JSON header, then
                    tagged tensors: u16 name length, name, u8 ndim, u32 dims,
                    float64 data

All integers and floats are little-endian; arrays are C-ordered.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from .chansim import CsiSequence
from .estimator.data import TruthTrack
from .estimator.model import PARAM_ORDER, EstimatorConfig, Model

FORMAT_VERSION = 1
_CSIS = struct.Struct("<4sIIIIId")
_CSID = struct.Struct("<4sIIIIIdd")


class FormatError(ValueError):
    pass


def _read_header(f, st: struct.Struct, magic: bytes):
    raw = f.read(st.size)
    if len(raw) != st.size:
        raise FormatError("truncated header")
    fields = st.unpack(raw)
    if fields[0] != magic:
        raise FormatError(f"bad magic {fields[0]!r}, expected {magic!r}")
    if fields[1] != FORMAT_VERSION:
        raise FormatError(f"unsupported version {fields[1]}")
    return fields[2:]


def _read_payload(f, dtype, shape):
    count = int(np.prod(shape))
    want = count * np.dtype(dtype).itemsize
    raw = f.read(want)
    if len(raw) != want:
        raise FormatError(f"payload has {len(raw)} of {want} bytes")
    return np.frombuffer(raw, dtype=dtype).reshape(shape)


# --------------------------------------------------------------------------
# CSIS

def write_csis(path, values: np.ndarray, sample_rate: float):
    values = np.asarray(values)
    if values.ndim != 4:
        raise ValueError("CSI values must be (T, N_r, N_t, N_sub)")
    T, nr, nt, ns = values.shape
    with open(path, "wb") as f:
        f.write(_CSIS.pack(b"CSIS", FORMAT_VERSION, T, nr, nt, ns, float(sample_rate)))
        f.write(np.ascontiguousarray(values, dtype="<c8").tobytes())


def read_csis(path) -> CsiSequence:
    with open(path, "rb") as f:
        T, nr, nt, ns, rate = _read_header(f, _CSIS, b"CSIS")
        values = _read_payload(f, "<c8", (T, nr, nt, ns))
    return CsiSequence(values.astype(np.complex128), rate)


def write_sequence(path, seq: CsiSequence):
    if seq.start_time != 0.0:
        raise ValueError("CSIS sequences start at t=0")
    write_csis(path, seq.values, seq.sample_rate)


# --------------------------------------------------------------------------
# CSID

def write_csid(path, tensors: np.ndarray, sample_rate: float, start_time: float = 0.0, ref: int = 0):
    tensors = np.asarray(tensors)
    if tensors.ndim != 4 or tensors.shape[1] != 2:
        raise ValueError("dynamic tensors must be (T, 2, K, N_sub)")
    T, _, K, ns = tensors.shape
    with open(path, "wb") as f:
        f.write(_CSID.pack(b"CSID", FORMAT_VERSION, T, K, ns, int(ref), float(sample_rate), float(start_time)))
        f.write(np.ascontiguousarray(tensors, dtype="<f4").tobytes())


def read_csid(path):
    """-> (tensors float32 (T, 2, K, N_sub), timestamps, sample_rate, ref)."""
    with open(path, "rb") as f:
        T, K, ns, ref, rate, start = _read_header(f, _CSID, b"CSID")
        tensors = _read_payload(f, "<f4", (T, 2, K, ns))
    timestamps = start + np.arange(T) / rate
    return np.array(tensors, dtype=np.float32), timestamps, rate, ref


# --------------------------------------------------------------------------
# weights

def write_weights(path, params: dict, header: dict, order=None):
    order = list(order) if order is not None else sorted(params)
    head = json.dumps({**header, "tensors": order}, sort_keys=True).encode()
    buf = io.BytesIO()
    buf.write(b"WSNW")
    buf.write(struct.pack("<II", FORMAT_VERSION, len(head)))
    buf.write(head)
    for name in order:
        arr = np.ascontiguousarray(params[name], dtype="<f8")
        tag = name.encode()
        buf.write(struct.pack("<HB", len(tag), arr.ndim))
        buf.write(tag)
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(arr.tobytes())
    Path(path).write_bytes(buf.getvalue())


def read_weights(path) -> tuple[dict, dict]:
    with open(path, "rb") as f:
        if f.read(4) != b"WSNW":
            raise FormatError("not a weights file")
        version, hlen = struct.unpack("<II", f.read(8))
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported weights version {version}")
        header = json.loads(f.read(hlen))
        params = {}
        for _ in header["tensors"]:
            nlen, ndim = struct.unpack("<HB", f.read(3))
            name = f.read(nlen).decode()
            shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim))
            params[name] = np.array(_read_payload(f, "<f8", shape))
    return params, header


def save_model(path, model):
    params = dict(model.params)
    params["_feat_mean"] = model.feat_mean
    params["_feat_std"] = model.feat_std
    write_weights(path, params, {"config": model.cfg.to_dict()},
                  list(PARAM_ORDER) + ["_feat_mean", "_feat_std"])


def load_model(path):
    params, header = read_weights(path)
    mean, std = params.pop("_feat_mean"), params.pop("_feat_std")
    return Model(EstimatorConfig.from_dict(header["config"]), params, mean, std)


# --------------------------------------------------------------------------
# CSV

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def read_csv(path) -> tuple[list, list]:
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r)
        return header, [row for row in r]


def truth_header(k: int) -> list:
    cols = ["timestamp", "x", "y", "depth_bin"]
    for i in range(k):
        cols += [f"kp{i}_dx", f"kp{i}_dy"]
    return cols


def write_truth_csv(path, truth):
    k = truth.pose.shape[1]
    rows = []
    for t, loc, pose, d in zip(truth.timestamps, truth.location, truth.pose, truth.depth):
        rows.append([float(t), float(loc[0]), float(loc[1]), int(d)] + [float(v) for v in pose.ravel()])
    write_csv(path, truth_header(k), rows)


def read_truth_csv(path):
    header, rows = read_csv(path)
    if header[:4] != ["timestamp", "x", "y", "depth_bin"] or (len(header) - 4) % 2:
        raise FormatError(f"unexpected truth columns {header}")
    k = (len(header) - 4) // 2
    a = np.array(rows, dtype=float).reshape(-1, len(header))
    return TruthTrack(a[:, 0], a[:, 1:3], a[:, 4:].reshape(-1, k, 2), a[:, 3].astype(int))


METRIC_HEADER = ["timestamp_index", "mean_loc_err_m", "mean_pose_err_m"]


def write_metrics_csv(path, table):
    rows = [[int(i), float(l), float(p)] for i, l, p in zip(table.timestamp_index, table.loc_err, table.pose_err)]
    write_csv(path, METRIC_HEADER, rows)


HISTORY_HEADER = ["stage", "epoch", "c", "train_loss", "val_loss"]


def history_rows(stage: str, hist) -> list:
    return [[stage, e, c, tl, vl] for e, c, tl, vl in hist.rows()]


INFOTHEORY_HEADER = ["source_id", "n", "epsilon", "pairs_checked", "violations", "bound_iid",
                     "bound_temporal", "mc_mean_iid", "mc_mean_temporal"]
