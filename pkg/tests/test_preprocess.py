import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from wisense import chansim, preprocess as pp
from wisense.chansim import CsiSequence


def test_vectorize_order():
    a, b, c, d = 1, 2j, 3, 4 - 1j
    frame = np.array([[a, b], [c, d]], dtype=complex)[..., None]
    np.testing.assert_array_equal(pp.vectorize(frame)[0], [a, b, c, d])


def test_vectorize_default_shape(rng):
    x = rng.standard_normal((3, 3, 30)) + 1j * rng.standard_normal((3, 3, 30))
    v = pp.vectorize(x)
    assert v.shape == (30, 9)
    np.testing.assert_array_equal(pp.unvectorize(v, 3, 3), x)


@given(hnp.arrays(np.complex128, hnp.array_shapes(min_dims=4, max_dims=4, max_side=4),
                  elements=st.complex_numbers(max_magnitude=1e3, allow_nan=False)))
def test_vectorize_roundtrip(x):
    nr, nt = x.shape[1:3]
    np.testing.assert_array_equal(pp.unvectorize(pp.vectorize(x), nr, nt), x)


def test_select_reference_dominant(rng):
    v = rng.uniform(0.5, 1.0, (20, 3, 3, 4)).astype(complex)
    v[:, 1, 2, :] *= 10  # element 5 in receive-major order
    assert list(pp.select_reference(v, 1)) == [5]


def test_select_reference_tie():
    v = np.ones((5, 3, 3, 2), dtype=complex)
    v[:, 0, 2] = 3.0
    v[:, 2, 1] = 3.0
    assert list(pp.select_reference(v, 1)) == [2]
    assert list(pp.select_reference(v, 2)) == [2, 7]


def test_select_reference_errors():
    with pytest.raises(pp.PreprocessError):
        pp.select_reference(np.zeros((0, 3, 3, 2), complex))
    with pytest.raises(pp.PreprocessError):
        pp.select_reference(np.ones((2, 3, 3, 2), complex), n_ref=9)


def test_conjugate_product_examples():
    e = np.zeros(4, complex)
    e[2] = 1
    expect = np.zeros((4, 4))
    expect[2, 2] = 1
    np.testing.assert_array_equal(pp.conjugate_product(e), expect)
    np.testing.assert_allclose(pp.conjugate_product(np.array([1 + 1j, 2])),
                               [[2, 2 + 2j], [2 - 2j, 4]])


@given(hnp.arrays(np.complex128, st.integers(1, 9),
                  elements=st.complex_numbers(max_magnitude=1e3, allow_nan=False)))
def test_conjugate_product_hermitian(v):
    p = pp.conjugate_product(v)
    np.testing.assert_allclose(p, p.conj().T)
    assert np.all(np.diag(p).real >= 0) and np.all(np.diag(p).imag == 0)


def test_high_pass_constant():
    y = pp.high_pass(np.full((2000, 3), 4.2 - 1j))
    assert np.max(np.abs(y)) < 1e-12


@pytest.mark.parametrize("cutoff", [None, 2.0])
def test_high_pass_passes_sinusoid(cutoff):
    t = np.arange(4000) / 1000
    s = np.sin(2 * np.pi * 10 * t)
    y = pp.high_pass(3.0 + s, pp.HighPassConfig(1000.0, 1.0, cutoff))
    mid = slice(1000, 3000)
    amp = np.sqrt(2) * np.std(y[mid])
    assert abs(amp - 1) < 0.05
    # in phase as well as in amplitude for the plain window
    if cutoff is None:
        assert np.max(np.abs(y[mid] - s[mid])) < 0.05


def test_high_pass_short_series():
    with pytest.raises(pp.PreprocessError):
        pp.high_pass(np.zeros(10), pp.HighPassConfig(1000.0, 1.0))


def _static_scene(seed, model="uniform"):
    return chansim.default_scene(seed, targets=[], phase_distortion=model)


def test_static_scene_gives_zero():
    seq = chansim.synthesize_sequence(_static_scene(2), 1.5)
    ref = int(pp.select_reference(seq)[0])
    d = pp.beta_augmented_product(seq, ref)
    vec = pp.vectorize(seq.values)
    static_power = np.max(np.abs(pp.augment_reference(vec, [ref], 100.0)) ** 2)
    assert np.max(np.abs(d)) < 1e-9 * static_power
    stream = pp.preprocess_sequence(seq)
    assert np.max(stream.tensors[:, 0]) < 1e-6 * static_power


def test_output_shape_and_ranges():
    seq = chansim.synthesize_sequence(chansim.default_scene(1), 1.2)
    st_ = pp.preprocess_sequence(seq)
    assert st_.tensors.shape == (1200, 2, 9, 30)
    assert np.all(st_.tensors[:, 0] >= 0)
    ph = st_.tensors[:, 1]
    assert np.all(ph > -np.pi) and np.all(ph <= np.pi)


def test_full_product_hermitian_and_column_consistent():
    seq = chansim.synthesize_sequence(chansim.default_scene(4), 1.0)
    ref = int(pp.select_reference(seq)[0])
    full = pp.beta_augmented_product(seq, ref)
    np.testing.assert_allclose(full, np.conj(np.swapaxes(full, -1, -2)), atol=1e-9 * np.abs(full).max())
    col = pp.beta_augmented_product(seq, ref, column_only=True)
    np.testing.assert_allclose(pp.reference_column(full, ref), col, rtol=1e-12, atol=1e-12 * np.abs(col).max())


def test_phase_distortion_immunity():
    scene = chansim.default_scene(7, phase_distortion="zero")
    outs = []
    for model in ("zero", "uniform", "linear"):
        seq = chansim.synthesize_sequence(scene.replace(phase_distortion=model), 1.0)
        outs.append(pp.preprocess_sequence(seq, keep_column=True).column)
    scale = np.abs(outs[0]).max()
    for o in outs[1:]:
        assert np.max(np.abs(o - outs[0])) <= 1e-12 * scale


def test_column_exactly_linear_when_reference_static(rng):
    # With no dynamic energy on the reference element, D'[:, ref] is the
    # high-passed h_d times a constant; this is the exact form of the linear model.
    T, K, ns, ref = 1500, 9, 4, 3
    hs = (rng.standard_normal((K, ns)) + 1j * rng.standard_normal((K, ns))) * 5
    hd = 0.1 * (rng.standard_normal((T, K, ns)) + 1j * rng.standard_normal((T, K, ns)))
    hd[:, ref] = 0
    phi = rng.uniform(0, 2 * np.pi, T)
    h = (hs + hd) * np.exp(-1j * phi)[:, None, None]
    values = pp.unvectorize(np.swapaxes(h, 1, 2), 3, 3)
    seq = CsiSequence(values, 1000.0)
    col = pp.beta_augmented_product(seq, ref, kappa=100.0, column_only=True)
    const = np.conj(hs[ref] * 101.0)[:, None]
    expect = pp.high_pass(np.swapaxes(hd, 1, 2)) * const
    np.testing.assert_allclose(col, expect, atol=1e-9 * np.abs(expect).max())


def test_kappa_warning():
    seq = chansim.synthesize_sequence(chansim.default_scene(0), 1.0)
    with pytest.warns(UserWarning):
        pp.beta_augmented_product(seq, 0, kappa=0.5)


def test_complex_correlation():
    rng = np.random.default_rng(0)
    a = rng.standard_normal(100) + 1j * rng.standard_normal(100)
    assert pp.complex_correlation(a, (2 - 3j) * a + 7) == pytest.approx(1.0)
    assert pp.complex_correlation(a, np.zeros(100)) == 0.0
