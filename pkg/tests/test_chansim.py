import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wisense import chansim
from wisense.chansim import LinearTrajectory, Scatterer
from wisense.resolution import SPEED_OF_LIGHT as C

from conftest import make_scene


def test_path_delay_collocated_is_zero():
    s = Scatterer("dynamic", trajectory=LinearTrajectory([0, 0, 0], [0, 0, 0]))
    scene = make_scene([s], d_rt=0.0)
    assert chansim.path_delay(scene, s, 0, 0, 0.5) == 0.0


def test_path_delay_static_length():
    s = Scatterer("static", path_length=299.792458)
    scene = make_scene([s])
    assert chansim.path_delay(scene, s, 0, 0, 0.0) == pytest.approx(1e-6, rel=1e-12)


def test_path_delay_radial_rate():
    v = 1.7
    s = Scatterer("dynamic", trajectory=LinearTrajectory([2.0, 0, 0], [v, 0, 0]))
    scene = make_scene([s], d_rt=0.0)
    h = 1e-3
    rate = (chansim.path_delay(scene, s, 0, 0, 1 + h) - chansim.path_delay(scene, s, 0, 0, 1 - h)) / (2 * h)
    assert rate == pytest.approx(2 * v / C, rel=1e-9)


def test_bistatic_length_not_below_baseline(rng):
    s = Scatterer("dynamic", trajectory=LinearTrajectory(rng.uniform(-5, 5, 3), rng.uniform(-1, 1, 3)))
    scene = make_scene([s], n=3)
    d = chansim.path_lengths(scene, s, np.linspace(0, 3, 50))
    baseline = np.linalg.norm(scene.rx_elements[:, None] - scene.tx_elements[None], axis=-1)
    assert np.all(d >= baseline - 1e-12)


def test_empty_scene_frame_is_zero():
    scene = make_scene([], n=3)
    fr = chansim.synthesize_frame(scene, 0.1)
    assert fr.values.shape == (3, 3, 30)
    assert np.all(fr.values == 0)


def test_unit_static_path_frame():
    s = Scatterer("static", gain=1.0, path_length=0.0, falloff=False)
    fr = chansim.synthesize_frame(make_scene([s]), 0.0)
    np.testing.assert_allclose(fr.values, 1.0 + 0j, atol=0)


def test_half_period_delay_flips_sign():
    f = 5.32e9
    s = Scatterer("static", gain=1.0, path_length=C / (2 * f), falloff=False)
    fr = chansim.synthesize_frame(make_scene([s], freqs=[f]), 0.0)
    np.testing.assert_allclose(fr.values, -1.0 + 0j, atol=1e-12)


def test_scene_validation():
    with pytest.raises(ValueError):
        make_scene([], freqs=[2.0, 1.0])
    with pytest.raises(ValueError):
        make_scene([], freqs=[])
    with pytest.raises(ValueError):
        make_scene([], sample_rate=0.0)
    with pytest.raises(ValueError):
        Scatterer("dynamic")
    with pytest.raises(ValueError):
        Scatterer("moving", path_length=1.0)


def test_sequence_length_and_spacing():
    seq = chansim.synthesize_sequence(chansim.default_scene(0), 1.0)
    assert len(seq) == 1000
    np.testing.assert_allclose(np.diff(seq.timestamps), 1e-3)
    with pytest.raises(ValueError):
        chansim.synthesize_sequence(chansim.default_scene(0), 0.0)


def test_sequence_deterministic():
    a = chansim.synthesize_sequence(chansim.default_scene(5, noise_std=0.01), 0.2)
    b = chansim.synthesize_sequence(chansim.default_scene(5, noise_std=0.01), 0.2)
    assert a.values.tobytes() == b.values.tobytes()
    c = chansim.synthesize_sequence(chansim.default_scene(6, noise_std=0.01), 0.2)
    assert not np.array_equal(a.values, c.values)


@pytest.mark.parametrize("model", ["zero", "uniform", "linear"])
def test_ground_truth_recomposition(model):
    scene = chansim.default_scene(3, noise_std=0.05, phase_distortion=model)
    seq = chansim.synthesize_sequence(scene, 0.3)
    rec = seq.ground_truth.recompose()
    assert np.max(np.abs(rec - seq.values)) <= 1e-12 * np.max(np.abs(seq.values))


def test_frame_matches_sequence_substream():
    scene = chansim.default_scene(2, noise_std=0.02)
    seq = chansim.synthesize_sequence(scene, 0.05)
    fr = chansim.synthesize_frame(scene, 17 / 1000)
    np.testing.assert_allclose(fr.values, seq.values[17], atol=1e-12)


def test_static_only_predicted_power_constant():
    scene = chansim.default_scene(4, targets=[])
    f = scene.subcarrier_freqs[7]
    vals = [chansim.predicted_power(scene, f, t, 1, 2)[0] for t in (0.0, 0.5, 2.0)]
    hs = chansim.static_component(scene)[1, 2, 7]
    np.testing.assert_allclose(vals, abs(hs) ** 2, rtol=1e-12)


def _two_walkers(seed):
    rng = np.random.default_rng(seed)
    targets = [Scatterer("dynamic", gain=rng.uniform(0.1, 0.5) * np.exp(1j * rng.uniform(0, 6)),
                         trajectory=LinearTrajectory(rng.uniform([1, 1, 0], [6, 3, 0]),
                                                     rng.uniform(-1, 1, 3)))
               for _ in range(2)]
    return chansim.default_scene(seed, targets=targets, phase_distortion="uniform")


@pytest.mark.parametrize("seed", range(4))
def test_power_expansion_matches_simulation(seed):
    scene = _two_walkers(seed)
    seq = chansim.synthesize_sequence(scene, 0.5)
    for ti in (0, 123, 499):
        for n, m, k in ((0, 0, 0), (2, 1, 15), (1, 2, 29)):
            f = scene.subcarrier_freqs[k]
            three, _ = chansim.predicted_power(scene, f, seq.timestamps[ti], n, m)
            assert abs(three - abs(seq.values[ti, n, m, k]) ** 2) <= 1e-9 * three


def test_two_term_close_for_strong_static():
    scene = chansim.default_scene(1)
    scene = chansim.scale_dynamic_to_ratio(scene, 100.0)
    f = scene.subcarrier_freqs[3]
    for t in (0.0, 0.4, 0.9):
        three, two = chansim.predicted_power(scene, f, t, 0, 0)
        assert abs(three - two) / three < 0.01


def test_power_spectrum_peak_at_doppler():
    # target beyond the receiver moving along the baseline: path length grows at ~2 m/s
    s = Scatterer("dynamic", gain=0.05, trajectory=LinearTrajectory([8.0, 0.0, 0.0], [1.0, 0.0, 0.0]))
    scene = make_scene([Scatterer("static", gain=1.0, falloff=True), s], phase_distortion="uniform")
    seq = chansim.synthesize_sequence(scene, 4.0)
    k = 10
    f = scene.subcarrier_freqs[k]
    p = np.abs(seq.values[:, 0, 0, k]) ** 2
    spectrum = np.abs(np.fft.rfft(p - p.mean()))
    freqs = np.fft.rfftfreq(len(p), 1 / scene.sample_rate)
    d = chansim.path_lengths(scene, s, seq.timestamps)[:, 0, 0]
    v = (d[-1] - d[0]) / (seq.timestamps[-1] - seq.timestamps[0])
    assert abs(freqs[np.argmax(spectrum)] - f * v / C) <= freqs[1]


@pytest.mark.parametrize("model", ["zero", "uniform", "linear"])
def test_conjugate_product_cancels_distortion(model):
    base = chansim.default_scene(9, phase_distortion="zero")
    other = base.replace(phase_distortion=model, seed=99)
    a = chansim.synthesize_frame(base, 0.2).values
    b = chansim.synthesize_frame(other, 0.2).values
    ref = (0, 0)
    pa = a * np.conj(a[ref][None, None, :])
    pb = b * np.conj(b[ref][None, None, :])
    np.testing.assert_allclose(pa, pb, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(5.0, 500.0))
def test_scale_dynamic_to_ratio(seed, ratio):
    scene = chansim.scale_dynamic_to_ratio(chansim.default_scene(seed), ratio, duration=0.1)
    seq = chansim.synthesize_sequence(scene.replace(noise_std=0.0), 0.1)
    assert chansim.static_to_dynamic_ratio(seq.ground_truth) == pytest.approx(ratio, rel=1e-9)
