import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from exceptions import Diverged, InvalidKernel
from kernels import Regime, SamplingScheme, check_oversampled_condition
from pw_core import (PWFunction, StepFunction, basis_averages, basis_matrix,
                     project_pw, step_projection_matrix)
from services.quadrature_service import QuadratureService, quadrature

logger = logging.getLogger(__name__)

BOUNDARY_MARGIN = 10.0
RESIDUAL_SPACING = 1.0 / 32
TRUSTED_FRACTION = 0.8
GROWTH_LIMIT = 3


@dataclass
class IterationState:
    estimate: PWFunction
    residuals: List[float] = field(default_factory=list)
    gamma: float = 0.0
    iterations: int = 0
    converged: bool = False
    guarantee: bool = False

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate.to_dict(),
            "residuals": list(self.residuals),
            "gamma": self.gamma,
            "iterations": self.iterations,
            "converged": self.converged,
            "guarantee": self.guarantee,
        }


def _require_oversampled(scheme: SamplingScheme) -> None:
    if scheme.regime is not Regime.OVERSAMPLED:
        raise InvalidKernel("iterative reconstruction runs on oversampled schemes")
    if len(scheme.centers) < 2:
        raise InvalidKernel("iterative reconstruction needs at least two centers")


def cell_edges(scheme: SamplingScheme) -> np.ndarray:
    """Midpoints between neighbouring centers, closed off half a gap past each end."""
    centers = np.asarray(scheme.centers)
    mids = 0.5 * (centers[1:] + centers[:-1])
    first = centers[0] - 0.5 * (centers[1] - centers[0])
    last = centers[-1] + 0.5 * (centers[-1] - centers[-2])
    return np.concatenate([[first], mids, [last]])


def averages_vector(averages: Mapping[int, float], scheme: SamplingScheme) -> np.ndarray:
    return np.array([averages.get(n, 0.0) for n in scheme.indices], dtype=float)


def quasi_interpolant(averages: Mapping[int, float], scheme: SamplingScheme) -> StepFunction:
    """Piecewise constant function equal to averages[n] on the n-th midpoint cell."""
    _require_oversampled(scheme)
    return StepFunction(cell_edges(scheme), averages_vector(averages, scheme))


class OversampledOperator:
    """Matrices of the approximation operator A = P Q and of the sampling map.

    Coefficients live on the indices n with n / omega inside the centers'
    span shrunk by half the boundary margin; residuals are measured on the
    inner part of the span shrunk by the full margin.
    """

    def __init__(self, scheme: SamplingScheme, omega: float, margin: float = BOUNDARY_MARGIN,
                 quad: QuadratureService = quadrature):
        _require_oversampled(scheme)
        if omega <= 0:
            raise ValueError("omega must be positive")
        self.scheme = scheme
        self.omega = float(omega)
        self.quad = quad
        lo, hi = scheme.centers[0], scheme.centers[-1]
        half = min(margin / 2, (hi - lo) / 4)
        self.indices = np.arange(int(np.ceil(omega * (lo + half))), int(np.floor(omega * (hi - half))) + 1)
        inner_lo, inner_hi = lo + margin, hi - margin
        if inner_hi <= inner_lo:
            inner_lo, inner_hi = lo + (hi - lo) / 5, hi - (hi - lo) / 5
        center, radius = 0.5 * (inner_lo + inner_hi), 0.5 * TRUSTED_FRACTION * (inner_hi - inner_lo)
        self.trusted = (center - radius, center + radius)
        self.grid = np.arange(self.trusted[0], self.trusted[1] + RESIDUAL_SPACING / 2, RESIDUAL_SPACING)

    @cached_property
    def projection(self) -> np.ndarray:
        return step_projection_matrix(cell_edges(self.scheme), self.omega, self.indices)

    @cached_property
    def sampling(self) -> np.ndarray:
        rows = [basis_averages(self.omega, self.indices, k, self.quad) for k in self.scheme.kernels]
        return np.vstack(rows)

    @cached_property
    def evaluation(self) -> np.ndarray:
        return basis_matrix(self.omega, self.indices, self.grid)

    def residual_norm(self, coeffs: np.ndarray) -> float:
        """Discrete L2 norm over the trusted grid; the worst column for a block of coefficients."""
        values = self.evaluation @ coeffs
        norms = np.sqrt(RESIDUAL_SPACING * np.sum(values ** 2, axis=0))
        return float(np.max(norms, initial=0.0))

    def to_function(self, coeffs: np.ndarray) -> PWFunction:
        return PWFunction.from_arrays(self.indices, coeffs, self.omega)


def approx_operator(averages: Mapping[int, float], scheme: SamplingScheme, omega: float,
                    margin: float = BOUNDARY_MARGIN) -> PWFunction:
    """A(averages) = P applied to the quasi-interpolant step function."""
    op = OversampledOperator(scheme, omega, margin)
    step = quasi_interpolant(averages, scheme)
    return project_pw(step, omega, indices=op.indices)


def sampled_averages(f: PWFunction, scheme: SamplingScheme, quad: QuadratureService = quadrature) -> dict:
    """<f, u_n> for every kernel of the scheme, keyed by scheme index."""
    if not f.coefficients:
        return {n: 0.0 for n in scheme.indices}
    return {n: float(basis_averages(f.omega, f.indices, k, quad) @ f.values)
            for n, k in zip(scheme.indices, scheme.kernels)}


def iterate_reconstruct(averages: Mapping[int, float], scheme: SamplingScheme, omega: float,
                        tol: float = 1e-10, max_iter: int = 200, initial: Optional[PWFunction] = None,
                        margin: float = BOUNDARY_MARGIN) -> IterationState:
    """f_{k+1} = f_k + A(averages) - A(averages of f_k), from f_0 = A(averages) or ``initial``."""
    guarantee = check_oversampled_condition(scheme, omega)
    if not guarantee:
        logger.warning(f"Oversampling condition fails for omega={omega}; running without a convergence guarantee")
    op = OversampledOperator(scheme, omega, margin)
    data = op.projection @ averages_vector(averages, scheme)
    start = initial.dense(op.indices) if initial is not None else None
    coeffs, residuals, converged = iterate_block(op, data, tol, max_iter, start)

    state = IterationState(op.to_function(coeffs), residuals, iterations=len(residuals),
                           converged=converged, guarantee=guarantee)
    state.gamma = contraction_estimate(residuals)
    logger.info(f"Oversampled reconstruction: {state.iterations} iterations, converged={converged}, "
                f"gamma={state.gamma:.3f}, guarantee={guarantee}")
    return state


def iterate_block(op: OversampledOperator, data: np.ndarray, tol: float = 1e-10, max_iter: int = 200,
                  initial: Optional[np.ndarray] = None) -> Tuple[np.ndarray, List[float], bool]:
    """Runs c_{k+1} = c_k + data - P S c_k on every column of ``data`` at once.

    The iteration is linear, so one call reconstructs many data vectors;
    the residual of a step is that of its worst column. With ``max_iter=0``
    the result is the one-step approximation A(averages).
    """
    coeffs = np.array(data if initial is None else initial, dtype=float)
    residuals: List[float] = []
    if data.size == 0:
        return coeffs, residuals, True

    growth = 0
    for k in range(1, max_iter + 1):
        update = data - op.projection @ (op.sampling @ coeffs)
        coeffs = coeffs + update
        residual = op.residual_norm(update)
        residuals.append(residual)
        logger.debug(f"iteration {k} residual {residual:.3e}")
        if residual < tol:
            return coeffs, residuals, True
        # three rises in a row count as divergence
        if len(residuals) > 1 and residual > residuals[-2]:
            growth += 1
            if growth >= GROWTH_LIMIT:
                raise Diverged(f"residuals grew for {GROWTH_LIMIT} consecutive iterations", residuals)
        else:
            growth = 0
    return coeffs, residuals, False


def contraction_estimate(residuals: Sequence[float]) -> float:
    """Largest ratio of successive residuals, 0 when there are fewer than two."""
    history = np.asarray(residuals)
    if history.size > 1 and np.all(history[:-1] > 0):
        return float(np.max(history[1:] / history[:-1]))
    return 0.0
