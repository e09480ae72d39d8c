import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from exceptions import InvalidKernel
from kernels import AverageKernel, SamplingScheme, check_oversampled_condition, kernel_fourier
from pw_core import sinc, wsk_reconstruct
from recon_nyquist import DecayBound, ReconstructionKernel, decay_constant, reconstruct
from recon_oversampled import BOUNDARY_MARGIN, OversampledOperator, iterate_block
from services.monte_carlo_service import MonteCarloService
from services.quadrature_service import QuadratureService, quadrature
from spectral import SamplePath, SpectralMeasure, synthesize_path

logger = logging.getLogger(__name__)

MIN_TRIALS = 100
MARGIN_SIGMAS = 3.0


@dataclass(frozen=True, eq=False)
class TruncationExperiment:
    model: SpectralMeasure
    kernel: ReconstructionKernel
    t: float
    n_values: Tuple[int, ...]
    trials: int = 2000
    seed: int = 0
    decay: Optional[DecayBound] = None

    def __post_init__(self):
        if self.trials < MIN_TRIALS:
            raise ValueError(f"a truncation experiment needs at least {MIN_TRIALS} trials")
        values = tuple(int(n) for n in self.n_values)
        if not values or min(values) < 1:
            raise ValueError("truncation orders N must be positive")
        object.__setattr__(self, "n_values", tuple(sorted(values)))
        if self.kernel.window is not None and not self.applicable:
            logger.warning(f"Model spectrum reaches past the guard band at {self.kernel.window.omega:.4f}; "
                           f"the truncation bound is not asserted")

    @property
    def applicable(self) -> bool:
        """The bound holds only for spectra inside the flat part of the window."""
        window = self.kernel.window
        if window is None:
            return self.decay is not None
        return bool(np.max(np.abs(self.model.frequencies), initial=0.0) <= window.omega)


@dataclass
class ErrorReport:
    n: int
    mse: float
    stderr: float
    bound: Optional[float]
    satisfied: Optional[bool]
    slope: Optional[float] = None
    exact_mse: float = 0.0
    allowance: float = 0.0
    mean_error: float = 0.0
    mean_stderr: float = 0.0

    @property
    def looseness(self) -> Optional[float]:
        if self.bound is None or self.mse <= 0:
            return None
        return self.bound / self.mse

    def to_row(self) -> dict:
        row = asdict(self)
        row["looseness"] = self.looseness
        return row


def generator_moments(freqs: np.ndarray, u: AverageKernel,
                      quad: QuadratureService = quadrature) -> Tuple[np.ndarray, np.ndarray]:
    """∫ cos(lambda y) u(y) dy and ∫ sin(lambda y) u(y) dy for every frequency."""
    if freqs.size == 0:
        return np.zeros(0), np.zeros(0)

    def integrand(y):
        phase = np.multiply.outer(freqs, y)
        return np.concatenate([np.cos(phase), np.sin(phase)]) * u(y)[None, :]

    moments = np.atleast_1d(quad.integrate(integrand, u.breakpoints))
    return moments[:freqs.size], moments[freqs.size:]


def averaging_matrices(model: SpectralMeasure, u: AverageKernel, n: Sequence[int],
                       quad: QuadratureService = quadrature) -> Tuple[np.ndarray, np.ndarray]:
    """<cos(lambda .), u(. - n)> and <sin(lambda .), u(. - n)>, atoms by rows, indices by columns."""
    freqs, _ = model.positive
    cu, su = generator_moments(freqs, u, quad)
    phase = np.multiply.outer(freqs, np.asarray(n, dtype=float))
    cos_n, sin_n = np.cos(phase), np.sin(phase)
    return cos_n * cu[:, None] - sin_n * su[:, None], sin_n * cu[:, None] + cos_n * su[:, None]


def projected_averaging_matrices(model: SpectralMeasure, u: AverageKernel,
                                 n: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """Averages against P u(. - n): <exp(i lambda .), P u_n> = conj(û(lambda)) exp(i n lambda) on [-pi, pi]."""
    freqs, _ = model.positive
    inband = np.abs(freqs) <= np.pi
    values = np.conj(kernel_fourier(u, freqs))[:, None] * np.exp(1j * np.multiply.outer(freqs, np.asarray(n)))
    values = np.where(inband[:, None], values, 0.0)
    return values.real, values.imag


def path_averages(path: SamplePath, u: AverageKernel, n_range: Sequence[int],
                  quad: QuadratureService = quadrature) -> Dict[int, float]:
    """<X, u(. - n)> for one sample path, integrated from its closed form."""
    n = np.asarray(list(n_range))
    if path.model.frequencies.size == 0:
        return {int(i): 0.0 for i in n}
    _, amplitudes = path.model.positive
    cos_avg, sin_avg = averaging_matrices(path.model, u, n, quad)
    values = (amplitudes * path.xi) @ cos_avg + (amplitudes * path.eta) @ sin_avg
    return {int(i): float(v) for i, v in zip(n, values)}


def ase_reconstruct_path(averages: Mapping[int, float], kernel: ReconstructionKernel, t, N: int):
    return reconstruct(averages, kernel, t, N)


def mse_truncation_bound(R0: float, decay: DecayBound, N: int) -> float:
    """4 R_X(0) C_p(t)^2 / ((p - 1)^2 N^(2(p - 1)))."""
    if R0 < 0:
        raise ValueError("R_X(0) cannot be negative")
    if decay.p < 2 or N < 1:
        raise ValueError("the bound needs p >= 2 and N >= 1")
    return 4.0 * R0 * decay.constant ** 2 / ((decay.p - 1) ** 2 * N ** (2 * (decay.p - 1)))


def aliasing_error(m: SpectralMeasure) -> float:
    """Spectral mass strictly outside [-pi, pi]."""
    return math.fsum(m.masses[np.abs(m.frequencies) > np.pi])


def _residual_weights(model: SpectralMeasure, cos_avg: np.ndarray, sin_avg: np.ndarray,
                      s_values: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """Per-atom coefficients of X(t) - X_N(t) in the cosine and sine draws."""
    freqs, amplitudes = model.positive
    ec = np.cos(freqs * t) - cos_avg @ s_values
    es = np.sin(freqs * t) - sin_avg @ s_values
    return amplitudes * ec, amplitudes * es


def _monte_carlo(model: SpectralMeasure, mc: MonteCarloService, weights_c: np.ndarray,
                 weights_s: np.ndarray) -> np.ndarray:
    xi, eta = mc.draws(model)
    return xi @ weights_c + eta @ weights_s


def exact_mse(model: SpectralMeasure, kernel: ReconstructionKernel, t: float, N: int,
              projected: bool = False) -> float:
    """E|X(t) - X_N(t)|^2 in closed form for the atom model."""
    n = np.arange(-N, N + 1)
    matrices = projected_averaging_matrices if projected else averaging_matrices
    cos_avg, sin_avg = matrices(model, kernel.generator, n)
    wc, ws = _residual_weights(model, cos_avg, sin_avg, kernel.exact(t - n), t)
    return math.fsum(wc ** 2) + math.fsum(ws ** 2)


def _slope(n_values: Sequence[int], mse: Sequence[float]) -> Optional[float]:
    if len(n_values) < 2 or min(mse) <= 0:
        return None
    return float(np.polyfit(np.log(n_values), np.log(mse), 1)[0])


def empirical_mse(exp: TruncationExperiment, threads: int = 1) -> List[ErrorReport]:
    """Monte Carlo E|X(t) - X_N(t)|^2 for every N of the sweep, against the truncation bound."""
    model, kernel = exp.model, exp.kernel
    n_max = max(exp.n_values)
    n = np.arange(-n_max, n_max + 1)
    s_values = kernel.exact(exp.t - n)
    cos_avg, sin_avg = averaging_matrices(model, kernel.generator, n)

    decay = None
    if exp.applicable:
        decay = exp.decay or decay_constant(kernel.generator, kernel.window, exp.t)
    R0 = model.total_mass

    mc = MonteCarloService(exp.seed, exp.trials, threads)
    xi, eta = mc.draws(model)
    freqs, amplitudes = model.positive
    averages = (xi * amplitudes) @ cos_avg + (eta * amplitudes) @ sin_avg
    target = (xi * amplitudes) @ np.cos(freqs * exp.t) + (eta * amplitudes) @ np.sin(freqs * exp.t)

    reports = []
    for N in exp.n_values:
        mask = np.abs(n) <= N
        error = target - averages[:, mask] @ s_values[mask]
        mse, stderr = mc.summarize(error ** 2)
        mean, mean_se = mc.summarize(error)
        wc, ws = _residual_weights(model, cos_avg[:, mask], sin_avg[:, mask], s_values[mask], exp.t)
        bound = mse_truncation_bound(R0, decay, N) if decay is not None else None
        # within three standard errors of the bound counts as satisfied
        satisfied = bool(mse - MARGIN_SIGMAS * stderr <= bound) if bound is not None else None
        reports.append(ErrorReport(
            n=N, mse=mse, stderr=stderr, bound=bound, satisfied=satisfied,
            exact_mse=math.fsum(wc ** 2) + math.fsum(ws ** 2),
            mean_error=mean, mean_stderr=mean_se,
        ))
        logger.info(f"N={N} mse={mse:.3e} stderr={stderr:.1e} bound={bound}")

    slope = _slope(exp.n_values, [r.mse for r in reports])
    for report in reports:
        report.slope = slope
    return reports


def empirical_aliasing(m: SpectralMeasure, kernel: ReconstructionKernel, t: float, N: int,
                       trials: int = 2000, seed: int = 0, threads: int = 1) -> ErrorReport:
    """Monte Carlo E|X(t) - P̃X(t)|^2 against the out-of-band mass.

    The allowance is the exact in-band truncation error of the |n| <= N sum;
    the report is satisfied when |mse - aliasing| <= 3 stderr + allowance.
    """
    if kernel.window is not None:
        raise InvalidKernel("the projection identity uses the window-free dual kernel")
    n = np.arange(-N, N + 1)
    cos_avg, sin_avg = projected_averaging_matrices(m, kernel.generator, n)
    wc, ws = _residual_weights(m, cos_avg, sin_avg, kernel.exact(t - n), t)

    mc = MonteCarloService(seed, trials, threads)
    error = _monte_carlo(m, mc, wc, ws)
    mse, stderr = mc.summarize(error ** 2)
    mean, mean_se = mc.summarize(error)

    aliasing = aliasing_error(m)
    total = math.fsum(wc ** 2) + math.fsum(ws ** 2)
    allowance = max(0.0, total - aliasing)
    satisfied = abs(mse - aliasing) <= MARGIN_SIGMAS * stderr + allowance
    logger.info(f"aliasing: mse={mse:.4e} stderr={stderr:.1e} formula={aliasing:.4e} allowance={allowance:.1e}")
    return ErrorReport(n=N, mse=mse, stderr=stderr, bound=aliasing + allowance, satisfied=bool(satisfied),
                       exact_mse=total, allowance=allowance, mean_error=mean, mean_stderr=mean_se)


def pathwise_errors(model: SpectralMeasure, kernel: ReconstructionKernel, seeds: Sequence[int],
                    t_grid: Sequence[float], n_values: Sequence[int]) -> np.ndarray:
    """max_t |X(t) - X_N(t)| for each seed (rows) and truncation order (columns)."""
    t_grid = np.asarray(t_grid, dtype=float)
    n_max = max(n_values)
    n = np.arange(-n_max, n_max + 1)
    s_table = kernel.exact(t_grid[:, None] - n[None, :])
    out = np.empty((len(seeds), len(n_values)))
    for row, seed in enumerate(seeds):
        path = synthesize_path(model, seed, t_grid)
        averages = path_averages(path, kernel.generator, n)
        a = np.array([averages[int(i)] for i in n])
        for col, N in enumerate(n_values):
            mask = np.abs(n) <= N
            out[row, col] = np.max(np.abs(path.values - s_table[:, mask] @ a[mask]))
    return out


def projected_path_averages(path: SamplePath, u: AverageKernel, n_range: Sequence[int]) -> Dict[int, float]:
    """<X, P u(. - n)> for one sample path; out-of-band atoms contribute nothing."""
    n = np.asarray(list(n_range))
    if path.model.frequencies.size == 0:
        return {int(i): 0.0 for i in n}
    _, amplitudes = path.model.positive
    cos_avg, sin_avg = projected_averaging_matrices(path.model, u, n)
    values = (amplitudes * path.xi) @ cos_avg + (amplitudes * path.eta) @ sin_avg
    return {int(i): float(v) for i, v in zip(n, values)}


def projected_reconstruct(path: SamplePath, kernel: ReconstructionKernel, t, N: int) -> np.ndarray:
    """P̃X(t) = sum_{|n| <= N} <X, P u(. - n)> s(t - n) with the window-free dual."""
    if kernel.window is not None:
        raise InvalidKernel("the projection identity uses the window-free dual kernel")
    averages = projected_path_averages(path, kernel.generator, range(-N, N + 1))
    n = np.arange(-N, N + 1)
    t = np.asarray(t, dtype=float)
    values = np.array([averages[int(i)] for i in n])
    return kernel.exact(t[..., None] - n) @ values


def wsk_path_baseline(path: SamplePath, t, N: int, omega: float = 1.0) -> np.ndarray:
    """Point-sampling expansion of the same path from X(n / omega), |n| <= N."""
    n = np.arange(-N, N + 1)
    samples = dict(zip(n.tolist(), path.at(n / omega).tolist()))
    return wsk_reconstruct(samples, omega, t, N)


def scheme_averaging_matrices(model: SpectralMeasure, scheme: SamplingScheme,
                              quad: QuadratureService = quadrature) -> Tuple[np.ndarray, np.ndarray]:
    """<cos(lambda .), u_k> and <sin(lambda .), u_k> for every kernel of a scheme, atoms by rows.

    Kernels of one shape share their generator moments; each center only
    shifts the phase.
    """
    freqs, _ = model.positive
    centers = np.asarray(scheme.centers)
    cos_avg = np.empty((freqs.size, centers.size))
    sin_avg = np.empty((freqs.size, centers.size))
    shapes: Dict[tuple, List[int]] = {}
    for column, k in enumerate(scheme.kernels):
        shapes.setdefault((k.a, k.b, k.profile), []).append(column)
    for (a, b, profile), columns in shapes.items():
        template = AverageKernel(0.0, a, b, profile)
        cos_avg[:, columns], sin_avg[:, columns] = averaging_matrices(model, template, centers[columns], quad)
    return cos_avg, sin_avg


def _grid_report(model: SpectralMeasure, weights_c: np.ndarray, weights_s: np.ndarray, n: int, trials: int,
                 seed: int, threads: int, satisfied: Optional[bool] = None) -> ErrorReport:
    """Mean over grid points (rows of the weights) of the squared error, sampled and in closed form."""
    mc = MonteCarloService(seed, trials, threads)
    xi, eta = mc.draws(model)
    error = xi @ weights_c.T + eta @ weights_s.T
    mse, stderr = mc.summarize(np.mean(error ** 2, axis=1))
    mean, mean_se = mc.summarize(np.mean(error, axis=1))
    exact = (math.fsum(np.ravel(weights_c ** 2)) + math.fsum(np.ravel(weights_s ** 2))) / max(weights_c.shape[0], 1)
    return ErrorReport(n=n, mse=mse, stderr=stderr, bound=None, satisfied=satisfied, exact_mse=exact,
                       mean_error=mean, mean_stderr=mean_se)


def oversampled_path_mse(model: SpectralMeasure, scheme: SamplingScheme, omega: float, trials: int = 2000,
                         seed: int = 0, threads: int = 1, tol: float = 1e-10, max_iter: int = 200,
                         margin: float = BOUNDARY_MARGIN) -> ErrorReport:
    """E|X(t) - X_rec(t)|^2 averaged over the trusted interval for the oversampled iteration.

    The cosine and sine part of every atom is reconstructed once, as the
    columns of a single block iteration; each path is then an amplitude
    weighted sum of those columns. ``n`` of the report is the iteration
    count. There is no closed-form bound: the run is satisfied when the
    iteration converged under the oversampling condition, and ``satisfied``
    is None without that condition.
    """
    op = OversampledOperator(scheme, omega, margin)
    guarantee = check_oversampled_condition(scheme, omega)
    freqs, amplitudes = model.positive
    cos_avg, sin_avg = scheme_averaging_matrices(model, scheme, op.quad)
    data = op.projection @ np.hstack([cos_avg.T, sin_avg.T])
    coeffs, residuals, converged = iterate_block(op, data, tol, max_iter)

    rec = op.evaluation @ coeffs
    phase = np.multiply.outer(op.grid, freqs)
    weights_c = amplitudes * (np.cos(phase) - rec[:, :freqs.size])
    weights_s = amplitudes * (np.sin(phase) - rec[:, freqs.size:])
    report = _grid_report(model, weights_c, weights_s, len(residuals), trials, seed, threads,
                          satisfied=converged if guarantee else None)
    logger.info(f"oversampled paths: {len(residuals)} iterations, converged={converged}, "
                f"mse={report.mse:.3e} stderr={report.stderr:.1e} exact={report.exact_mse:.3e}")
    return report


def wsk_path_mse(model: SpectralMeasure, t, N: int, trials: int = 2000, seed: int = 0,
                 omega: float = 1.0, threads: int = 1) -> ErrorReport:
    """E|X(t) - sum_{|n| <= N} X(n / omega) sinc(omega t - n)|^2 averaged over the points ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    freqs, amplitudes = model.positive
    n = np.arange(-N, N + 1)
    basis = sinc(omega * t[:, None] - n)
    nodes = np.multiply.outer(n / omega, freqs)
    phase = np.multiply.outer(t, freqs)
    weights_c = amplitudes * (np.cos(phase) - basis @ np.cos(nodes))
    weights_s = amplitudes * (np.sin(phase) - basis @ np.sin(nodes))
    return _grid_report(model, weights_c, weights_s, N, trials, seed, threads)
