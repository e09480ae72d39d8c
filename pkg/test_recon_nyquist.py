import numpy as np
import pytest

from exceptions import DerivativeOrderExceeded, InvalidKernel, TabulationRangeExceeded
from kernels import AverageKernel, Profile, kernel_fourier
from pw_core import PWFunction, local_average, sinc
from recon_nyquist import (DecayBound, GuardBandWindow, KernelGrid, build_kernel, check_decay, decay_constant,
                           dual_pairing, reconstruct, smoothstep, tail_bound, window_eval)
from services.quadrature_service import QuadratureService

BOX = AverageKernel.symmetric(0.3)


@pytest.fixture(scope="module")
def plain_kernel():
    return build_kernel(BOX, None, KernelGrid(half_width=12.0))


@pytest.fixture(scope="module")
def windowed_kernel():
    return build_kernel(BOX, GuardBandWindow(0.8 * np.pi, 3), KernelGrid.for_truncation(60, 5.0))


@pytest.mark.parametrize("p", [2, 3, 5])
def test_smoothstep_is_flat_at_both_ends(p):
    s = smoothstep(p)
    assert s(0.0) == pytest.approx(0.0, abs=1e-14)
    assert s(1.0) == pytest.approx(1.0, abs=1e-12)
    for d in range(1, p + 1):
        assert s.deriv(d)(0.0) == pytest.approx(0.0, abs=1e-10)
        assert s.deriv(d)(1.0) == pytest.approx(0.0, abs=1e-6)


def test_window_values():
    w = GuardBandWindow(2.0, 3)
    np.testing.assert_allclose(window_eval(w, [-1.5, 0.0, 2.0]), 1.0)
    np.testing.assert_allclose(window_eval(w, [np.pi, -3.5]), 0.0)
    inside = window_eval(w, np.linspace(2.0, np.pi, 50))
    assert np.all((inside >= 0) & (inside <= 1))
    assert np.all(np.diff(inside) <= 1e-15)
    assert float(w(2.0 + 1e-9)) == pytest.approx(1.0, abs=1e-6)
    assert float(window_eval(w, 1.0, 2)) == 0.0


def test_window_validation():
    with pytest.raises(InvalidKernel):
        GuardBandWindow(np.pi, 2)
    with pytest.raises(InvalidKernel):
        GuardBandWindow(2.0, 1)
    with pytest.raises(DerivativeOrderExceeded):
        window_eval(GuardBandWindow(2.0, 2), 2.5, 3)


def test_window_derivative_matches_finite_difference():
    w = GuardBandWindow(2.0, 3)
    xi, h = 2.6, 1e-6
    expected = (float(w(xi + h)) - float(w(xi - h))) / (2 * h)
    assert float(window_eval(w, xi, 1)) == pytest.approx(expected, rel=1e-6)
    assert float(window_eval(w, -xi, 1)) == pytest.approx(-expected, rel=1e-6)


def test_spectrum_identity(windowed_kernel):
    xi = np.linspace(-np.pi, np.pi, 2001)
    product = kernel_fourier(BOX, xi) * np.conj(windowed_kernel.spectrum(xi))
    np.testing.assert_allclose(product, windowed_kernel.window(xi), atol=1e-10)


def test_biorthogonality(plain_kernel):
    offsets = np.arange(-5, 6)
    pairing = dual_pairing(plain_kernel, offsets)
    np.testing.assert_allclose(pairing, (offsets == 0).astype(float), atol=1e-6)


def test_asymmetric_kernel_is_real():
    kernel = build_kernel(AverageKernel(0.0, 0.1, 0.2), None, KernelGrid(half_width=4.0))
    assert kernel.is_real
    assert np.isrealobj(kernel.values)


def test_table_matches_exact(windowed_kernel):
    x = np.linspace(-40.0, 40.0, 97) + 1 / 128
    np.testing.assert_allclose(windowed_kernel(x), windowed_kernel.exact(x), atol=1e-7)


def test_reconstruct_zero_and_out_of_range(plain_kernel):
    assert float(reconstruct({}, plain_kernel, 0.3, 5)) == 0.0
    with pytest.raises(TabulationRangeExceeded):
        reconstruct({0: 1.0}, plain_kernel, 1000.0, 0)


def test_consistency_of_reconstructed_averages(plain_kernel):
    averages = {n: float(np.cos(0.7 * n)) / (1 + n * n) for n in range(-8, 9)}
    # <f_rec, u(. - m)> = sum_n a_n <u(. - m), s(. - n)>
    pairing = dual_pairing(plain_kernel, np.arange(-16, 17))
    for m in range(-3, 4):
        value = sum(a * pairing[16 + m - n] for n, a in averages.items())
        assert value == pytest.approx(averages[m], abs=1e-6)


def test_deterministic_reconstruction_inside_the_guard_band(windowed_kernel):
    window = windowed_kernel.window
    f = PWFunction({0: 1.0, 3: -2.0}, omega=window.omega / np.pi)
    N = 60
    averages = {n: local_average(f, BOX.shifted(float(n))) for n in range(-N, N + 1)}
    t = np.linspace(-5.0, 5.0, 11)
    error = np.abs(reconstruct(averages, windowed_kernel, t, N) - f(t))
    assert error.max() < 1e-4
    amplitude = float(np.sum(np.abs(f.values)))
    for s, e in zip(t, error):
        assert e <= tail_bound(decay_constant(BOX, window, float(s)), N, amplitude)

    plain = build_kernel(BOX, None, KernelGrid.for_truncation(N, 5.0))
    plain_error = np.abs(reconstruct(averages, plain, t, N) - f(t))
    assert error.max() <= plain_error.max()


@pytest.mark.parametrize("u, window, t", [
    (BOX, GuardBandWindow(2.0, 3), 0.7),
    (AverageKernel.symmetric(0.4, profile=Profile.TRIANGLE), GuardBandWindow(2.2, 2), 0.0),
    (AverageKernel(0.0, 0.1, 0.2, Profile.RAISED_COSINE), GuardBandWindow(2.5, 4), -1.3),
])
def test_decay_bound_holds(u, window, t):
    kernel = build_kernel(u, window, KernelGrid(half_width=4.0))
    decay = decay_constant(u, window, t)
    assert decay.p == window.p
    assert check_decay(kernel, decay, 500) <= 1.0 + 1e-6


def test_decay_constant_needs_a_window():
    with pytest.raises(DerivativeOrderExceeded):
        decay_constant(BOX, None, 0.0)


def test_tail_bound_formula():
    assert tail_bound(DecayBound(3, 0.0, 2.0), 10) == pytest.approx(0.02)
    assert tail_bound(DecayBound(2, 0.0, 1.0), 4, amplitude=3.0) == pytest.approx(1.5)


def test_kernel_export(tmp_path, plain_kernel):
    header = plain_kernel.header([DecayBound(2, 0.0, 1.0)])
    assert header["window"] is None
    assert header["A"] <= header["B"]
    assert header["C_p"] == [{"t": 0.0, "p": 2, "C": 1.0}]
    target = tmp_path / "kernel.csv"
    plain_kernel.to_csv(target)
    lines = target.read_text().splitlines()
    assert lines[0] == "t,s"
    assert len(lines) == plain_kernel.nodes.size + 1


def test_narrow_box_dual_is_the_sinc():
    kernel = build_kernel(AverageKernel.symmetric(1e-4), None, KernelGrid(half_width=4.0))
    x = np.linspace(-3.7, 3.7, 15)
    np.testing.assert_allclose(kernel.exact(x), sinc(x), atol=1e-6)


def test_wide_box_dual_overshoots_at_zero():
    kernel = build_kernel(AverageKernel.symmetric(0.5), None, KernelGrid(half_width=4.0))
    assert float(kernel.exact(0.0)) > 1.0


def test_decay_constant_is_continuous_in_t():
    window = GuardBandWindow(2.0, 3)
    here = decay_constant(BOX, window, 0.37).constant
    nearby = decay_constant(BOX, window, 0.37 + 1e-6).constant
    assert nearby == pytest.approx(here, rel=1e-4)


def test_narrow_box_decay_constant_is_the_window_curvature():
    window = GuardBandWindow(2.0, 2)
    decay = decay_constant(AverageKernel.symmetric(1e-4), window, 0.0)

    def curvature(xi):
        return np.abs(window_eval(window, xi, 2)) / (2 * np.pi)

    expected = QuadratureService(atol=1e-13).integrate(curvature, (-np.pi, -2.0, 0.0, 2.0, np.pi))
    assert decay.constant == pytest.approx(float(expected), rel=1e-5)
