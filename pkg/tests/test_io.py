import struct

import numpy as np
import pytest

from wisense import chansim, io
from wisense.estimator import EstimatorConfig, Model
from wisense.estimator.data import TruthTrack


def test_csis_roundtrip_and_layout(tmp_path):
    seq = chansim.synthesize_sequence(chansim.default_scene(1, noise_std=0.01), 0.05)
    path = tmp_path / "a.csis"
    io.write_sequence(path, seq)
    raw = path.read_bytes()
    magic, version, T, nr, nt, ns, rate = struct.unpack_from("<4sIIIIId", raw)
    assert (magic, version, T, nr, nt, ns, rate) == (b"CSIS", 1, 50, 3, 3, 30, 1000.0)
    header = struct.calcsize("<4sIIIIId")
    assert len(raw) == header + 50 * 9 * 30 * 8
    # interleaved float32 (re, im), time-major then (n, m, subcarrier)
    first = np.frombuffer(raw[header:header + 8], "<f4")
    v = seq.values[0, 0, 0, 0]
    np.testing.assert_allclose(first, [v.real, v.imag], rtol=1e-6)
    back = io.read_csis(path)
    np.testing.assert_allclose(back.values, seq.values.astype(np.complex64))
    assert back.sample_rate == 1000.0


def test_csis_rejects_bad_input(tmp_path):
    p = tmp_path / "x.csis"
    p.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(io.FormatError):
        io.read_csis(p)
    io.write_csis(p, np.zeros((4, 1, 1, 2), complex), 100.0)
    p.write_bytes(p.read_bytes()[:-3])
    with pytest.raises(io.FormatError):
        io.read_csis(p)
    with pytest.raises(ValueError):
        io.write_csis(p, np.zeros((4, 2)), 100.0)


def test_csid_roundtrip(tmp_path, rng):
    t = rng.standard_normal((7, 2, 9, 30)).astype(np.float32)
    io.write_csid(tmp_path / "d.csid", t, 1000.0, 0.25, ref=4)
    back, times, rate, ref = io.read_csid(tmp_path / "d.csid")
    np.testing.assert_array_equal(back, t)
    np.testing.assert_allclose(times, 0.25 + np.arange(7) / 1000)
    assert (rate, ref) == (1000.0, 4)


def test_weights_roundtrip(tmp_path, rng):
    cfg = EstimatorConfig(hidden=5, gru_hidden=4, temporal=True, seed=3)
    model = Model.fresh(cfg, rng.standard_normal((10, 171)))
    io.save_model(tmp_path / "w.bin", model)
    back = io.load_model(tmp_path / "w.bin")
    assert back.cfg == cfg
    for k in model.params:
        np.testing.assert_array_equal(back.params[k], model.params[k])
    np.testing.assert_array_equal(back.feat_std, model.feat_std)
    (tmp_path / "bad.bin").write_bytes(b"XXXX")
    with pytest.raises(io.FormatError):
        io.read_weights(tmp_path / "bad.bin")


def test_truth_csv_roundtrip(tmp_path, rng):
    tr = TruthTrack(np.arange(5) / 30, rng.uniform(0, 5, (5, 2)), rng.normal(0, 0.3, (5, 4, 2)),
                    rng.integers(0, 8, 5))
    io.write_truth_csv(tmp_path / "t.csv", tr)
    header, _ = io.read_csv(tmp_path / "t.csv")
    assert header == ["timestamp", "x", "y", "depth_bin", "kp0_dx", "kp0_dy", "kp1_dx", "kp1_dy",
                      "kp2_dx", "kp2_dy", "kp3_dx", "kp3_dy"]
    back = io.read_truth_csv(tmp_path / "t.csv")
    for a, b in zip((tr.timestamps, tr.location, tr.pose, tr.depth),
                    (back.timestamps, back.location, back.pose, back.depth)):
        np.testing.assert_array_equal(a, b)


def test_csv_floats_exact(tmp_path):
    vals = [0.1, 1 / 3, 2.5e-17]
    io.write_csv(tmp_path / "f.csv", ["a", "b", "c"], [vals])
    _, rows = io.read_csv(tmp_path / "f.csv")
    assert [float(v) for v in rows[0]] == vals
