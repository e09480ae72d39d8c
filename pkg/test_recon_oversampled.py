import numpy as np
import pytest

from exceptions import Diverged, InvalidKernel
from kernels import AverageKernel, SamplingScheme
from pw_core import PWFunction, local_average
from recon_oversampled import (OversampledOperator, approx_operator, cell_edges, iterate_reconstruct,
                               quasi_interpolant, sampled_averages)

DENSE = SamplingScheme.uniform(-20.0, 20.0, 0.2, 0.1)


@pytest.fixture(scope="module")
def target():
    rng = np.random.default_rng(7)
    extra = PWFunction({int(n): float(c) for n, c in zip(rng.choice(np.arange(-5, 6), 5, replace=False),
                                                          rng.normal(size=5))})
    return PWFunction({0: 1.0, 1: 1.0}) + extra


@pytest.fixture(scope="module")
def target_averages(target):
    return sampled_averages(target, DENSE)


def test_cell_edges():
    scheme = SamplingScheme.from_centers([0.0, 1.0, 3.0], AverageKernel.symmetric(0.2))
    np.testing.assert_allclose(cell_edges(scheme), [-0.5, 0.5, 2.0, 4.0])


def test_quasi_interpolant_of_constant_averages():
    scheme = SamplingScheme.uniform(-2.0, 2.0, 0.2, 0.1)
    step = quasi_interpolant({n: 3.0 for n in scheme.indices}, scheme)
    assert step.lo == pytest.approx(-2.1)
    assert step.hi == pytest.approx(2.1)
    np.testing.assert_allclose(step(np.linspace(-2.09, 2.09, 50)), 3.0)
    assert float(step(2.5)) == 0.0


def test_approx_operator_is_linear():
    scheme = SamplingScheme.uniform(-6.0, 6.0, 0.2, 0.1)
    rng = np.random.default_rng(1)
    first = {n: float(v) for n, v in zip(scheme.indices, rng.normal(size=len(scheme.indices)))}
    second = {n: float(v) for n, v in zip(scheme.indices, rng.normal(size=len(scheme.indices)))}
    both = {n: 2.0 * first[n] - second[n] for n in scheme.indices}

    indices = OversampledOperator(scheme, 1.0).indices
    combined = (2.0 * approx_operator(first, scheme, 1.0).dense(indices)
                - approx_operator(second, scheme, 1.0).dense(indices))
    np.testing.assert_allclose(approx_operator(both, scheme, 1.0).dense(indices), combined, atol=1e-10)
    assert approx_operator({}, scheme, 1.0).coefficients == {}


def test_sampled_averages_match_local_averages(target):
    averages = sampled_averages(target, DENSE)
    for n in (0, 57, 100, 143, 200):
        assert averages[n] == pytest.approx(local_average(target, DENSE.kernels[n]), abs=1e-10)
    assert set(sampled_averages(PWFunction({}), DENSE).values()) == {0.0}


def test_iterative_recovery(target, target_averages):
    state = iterate_reconstruct(target_averages, DENSE, 1.0)
    assert state.guarantee
    assert state.converged
    assert 0.0 < state.gamma < 1.0
    indices = np.arange(-8, 9)
    np.testing.assert_allclose(state.estimate.dense(indices), target.dense(indices), atol=1e-8)
    assert state.to_dict()["iterations"] == state.iterations


def test_exact_start_is_a_fixed_point(target, target_averages):
    state = iterate_reconstruct(target_averages, DENSE, 1.0, tol=1e-8, initial=target)
    assert state.converged
    assert state.iterations == 1


def test_coarse_scheme_has_no_guarantee(target):
    coarse = SamplingScheme.uniform(-20.0, 20.0, 0.4, 0.1)
    averages = sampled_averages(target, coarse)
    try:
        state = iterate_reconstruct(averages, coarse, 1.0, max_iter=20)
    except Diverged as exc:
        assert exc.history
    else:
        assert not state.guarantee


def test_shift_invariant_scheme_rejected():
    scheme = SamplingScheme.shift_invariant(AverageKernel.symmetric(0.3), -3, 3)
    with pytest.raises(InvalidKernel):
        iterate_reconstruct({}, scheme, 1.0)
    with pytest.raises(InvalidKernel):
        quasi_interpolant({}, scheme)


def test_operator_validation():
    with pytest.raises(ValueError):
        OversampledOperator(DENSE, 0.0)


def test_reconstruction_reproduces_its_averages(target_averages):
    state = iterate_reconstruct(target_averages, DENSE, 1.0)
    lo, hi = OversampledOperator(DENSE, 1.0).trusted
    rebuilt = sampled_averages(state.estimate, DENSE)
    inside = [n for n, c in zip(DENSE.indices, DENSE.centers) if lo <= c <= hi]
    assert inside
    for n in inside:
        assert rebuilt[n] == pytest.approx(target_averages[n], abs=1e-9)


def test_iteration_is_linear(target_averages):
    other = sampled_averages(PWFunction({-2: 0.5, 3: -1.0}), DENSE)
    both = {n: 2.0 * target_averages[n] - other[n] for n in DENSE.indices}
    indices = OversampledOperator(DENSE, 1.0).indices

    def run(averages):
        return iterate_reconstruct(averages, DENSE, 1.0, tol=0.0, max_iter=5).estimate.dense(indices)

    np.testing.assert_allclose(run(both), 2.0 * run(target_averages) - run(other), atol=1e-8)


def test_iterations_do_not_grow_as_the_gap_shrinks(target):
    counts = []
    for gap in (0.2, 0.1, 0.05):
        scheme = SamplingScheme.uniform(-20.0, 20.0, gap, 0.1)
        state = iterate_reconstruct(sampled_averages(target, scheme), scheme, 1.0)
        assert state.converged
        counts.append(state.iterations)
    assert counts[1] <= counts[0] and counts[2] <= counts[1]


def test_one_step_approximation_is_close_on_a_fine_scheme(target):
    scheme = SamplingScheme.uniform(-20.0, 20.0, 0.05, 0.025)
    indices = OversampledOperator(scheme, 1.0).indices
    approx = approx_operator(sampled_averages(target, scheme), scheme, 1.0).dense(indices)
    truth = target.dense(indices)
    assert np.linalg.norm(approx - truth) < 0.25 * np.linalg.norm(truth)
