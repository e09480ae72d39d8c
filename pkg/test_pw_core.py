import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import sici

from kernels import AverageKernel, Profile
from pw_core import (CompactFunction, PWFunction, StepFunction, basis_averages, eval_pw, inner_product,
                     local_average, project_pw, sinc, sinc_derivative, wsk_reconstruct, zak_supremum,
                     zak_transform)


def test_sinc_exact_zeros():
    n = np.arange(-50, 51)
    values = sinc(n)
    assert values[50] == 1.0
    assert np.all(values[n != 0] == 0.0)
    assert float(sinc(0.5)) == pytest.approx(2 / np.pi)


@pytest.mark.parametrize("x", [-2.3, -0.5, 5e-4, 2e-3, 0.4, 7.25])
def test_sinc_derivative(x):
    h = 1e-5
    expected = (sinc(x + h) - sinc(x - h)) / (2 * h)
    assert float(sinc_derivative(x)) == pytest.approx(float(expected), abs=1e-8)


def test_eval_pw_at_the_nodes():
    f = PWFunction({0: 1.0, 3: -2.0})
    np.testing.assert_allclose(eval_pw(f, [0.0, 3.0, 1.0]), [1.0, -2.0, 0.0], atol=1e-15)
    g = PWFunction({1: 1.0}, omega=2.0)
    assert float(g(0.5)) == pytest.approx(1.0)


@settings(max_examples=25, deadline=None)
@given(st.dictionaries(st.integers(-5, 5), st.floats(-3, 3), max_size=4),
       st.dictionaries(st.integers(-5, 5), st.floats(-3, 3), max_size=4),
       st.floats(-2, 2),
       st.floats(-6, 6))
def test_series_are_linear(c1, c2, alpha, t):
    f, g = PWFunction(c1), PWFunction(c2)
    combined = alpha * f + g
    assert float(combined(t)) == pytest.approx(alpha * float(f(t)) + float(g(t)), abs=1e-9)


def test_local_average_of_sinc():
    f = PWFunction({0: 1.0})
    box = AverageKernel.symmetric(0.5)
    expected = 4 / np.pi * sici(np.pi / 4)[0]
    assert local_average(f, box) == pytest.approx(expected, abs=1e-12)
    assert local_average(PWFunction({}), box) == 0.0


def test_basis_averages_shift():
    box = AverageKernel.symmetric(0.3, center=2.0)
    values = basis_averages(1.0, [2, 0], box)
    centred = basis_averages(1.0, [0], AverageKernel.symmetric(0.3))
    assert values[0] == pytest.approx(centred[0], abs=1e-13)


def test_project_box_kernel():
    box = AverageKernel.symmetric(0.5)
    projected = project_pw(CompactFunction.from_kernel(box), 1.0)
    assert projected.coefficients[0] == pytest.approx(4 / np.pi * sici(np.pi / 4)[0], abs=1e-12)


def test_step_projection_matches_quadrature():
    step = StepFunction(np.array([-0.25, 0.25]), np.array([2.0]))
    box = CompactFunction.from_kernel(AverageKernel.symmetric(0.5))
    indices = np.arange(-10, 11)
    closed = project_pw(step, 1.0, indices=indices)
    numeric = project_pw(box, 1.0, indices=indices)
    np.testing.assert_allclose(closed.dense(indices), numeric.dense(indices), atol=1e-10)


def test_projection_of_a_series_is_the_identity():
    f = PWFunction({-1: 0.5, 2: 1.5}, omega=0.8)
    assert project_pw(f, 0.8) == f
    with pytest.raises(ValueError):
        project_pw(f, 1.0)


def test_projection_of_a_table():
    times = np.linspace(-1.0, 1.0, 201)
    table = CompactFunction.from_table(times, np.cos(np.pi * times / 2))
    direct = CompactFunction(lambda x: np.cos(np.pi * x / 2), -1.0, 1.0)
    indices = np.arange(-5, 6)
    np.testing.assert_allclose(project_pw(table, 1.0, indices=indices).dense(indices),
                               project_pw(direct, 1.0, indices=indices).dense(indices), atol=1e-7)


def test_inner_product():
    assert inner_product(PWFunction({0: 1.0}), PWFunction({0: 1.0})) == pytest.approx(1.0)
    assert inner_product(PWFunction({0: 1.0}, 2.0), PWFunction({0: 1.0}, 2.0)) == pytest.approx(0.5)
    assert inner_product(PWFunction({0: 1.0}), PWFunction({1: 1.0})) == 0.0


def test_wsk_reconstruct_reproduces_finite_series():
    f = PWFunction({0: 1.0, 3: -2.0})
    samples = {n: float(f(n)) for n in range(-5, 6)}
    t = np.linspace(-4, 4, 17)
    np.testing.assert_allclose(wsk_reconstruct(samples, 1.0, t, 5), f(t), atol=1e-14)
    # missing samples count as zero
    np.testing.assert_allclose(wsk_reconstruct({0: 1.0}, 1.0, t, 5), sinc(t), atol=1e-15)


def test_series_document():
    f = PWFunction({-2: 0.5, 4: 1.0}, omega=0.8)
    assert f.to_dict() == {"omega": 0.8, "coeffs": {"-2": 0.5, "4": 1.0}}
    assert PWFunction.from_dict(f.to_dict()) == f


def test_zak_sinc_unimodular_at_zero():
    xi = np.linspace(-np.pi, np.pi, 1024)
    values = zak_transform("sinc", 0.0, xi, 10_000)
    assert np.max(np.abs(np.abs(values) - 1.0)) < 1e-12


def test_zak_sinc_is_a_phase():
    value = zak_transform("sinc", 0.3, 1.0, 10_000)
    assert value == pytest.approx(np.exp(0.3j), abs=1e-3)


def test_zak_sinc_derivative_supremum():
    supremum = zak_supremum("sinc_derivative", np.linspace(0.0, 1.0, 33), np.linspace(-np.pi, np.pi, 65), 10_000)
    assert 0.98 * np.pi <= supremum <= 1.02 * np.pi


def test_zak_unknown_profile():
    with pytest.raises(ValueError):
        zak_transform("gauss", 0.0, 0.0, 10)


def test_triangle_average_is_symmetric():
    f = PWFunction({0: 1.0})
    left = local_average(f, AverageKernel(-0.5, 0.2, 0.2, Profile.TRIANGLE))
    right = local_average(f, AverageKernel(0.5, 0.2, 0.2, Profile.TRIANGLE))
    assert left == pytest.approx(right, abs=1e-13)


def test_projection_preserves_inner_products_with_the_band():
    box = AverageKernel.symmetric(0.3, center=0.2)
    h = PWFunction({-3: 0.4, -1: 1.0, 0: -0.7, 2: 0.25, 3: 1.5})
    projected = project_pw(CompactFunction.from_kernel(box), 1.0)
    assert inner_product(projected, h) == pytest.approx(local_average(h, box), abs=1e-10)


def test_narrow_average_is_a_point_sample():
    f = PWFunction({-1: 0.3, 0: 1.0, 2: -0.5})
    narrow = AverageKernel.symmetric(1e-4, center=0.3)
    assert abs(local_average(f, narrow) - float(f(0.3))) < 1e-6
