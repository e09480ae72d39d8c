import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import sici

from exceptions import InvalidKernel
from kernels import AverageKernel
from services.quadrature_service import QuadratureService, quadrature

logger = logging.getLogger(__name__)

COEFFICIENT_CUTOFF = 1e-12
PROJECTION_MARGIN = 64

ArrayLike = Union[float, Sequence[float], np.ndarray]


def sinc(x: ArrayLike) -> np.ndarray:
    """sin(pi x) / (pi x) with exact zeros at the nonzero integers."""
    x = np.asarray(x, dtype=float)
    k = np.round(x)
    sign = np.where(np.mod(k, 2) == 0, 1.0, -1.0)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - (np.pi * x) ** 2 / 6, sign * np.sin(np.pi * (x - k)) / (np.pi * safe))


def sinc_derivative(x: ArrayLike) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    k = np.round(x)
    sign = np.where(np.mod(k, 2) == 0, 1.0, -1.0)
    small = np.abs(x) < 1e-3
    safe = np.where(small, 1.0, x)
    closed = (sign * np.cos(np.pi * (x - k)) - sinc(safe)) / safe
    series = -np.pi ** 2 * x / 3 + np.pi ** 4 * x ** 3 / 30
    return np.where(small, series, closed)


@dataclass(frozen=True)
class PWFunction:
    """f(t) = sum_n c_n sinc(omega t - n), a finite sinc series in PW_{pi omega}."""

    coefficients: Mapping[int, float] = field(default_factory=dict)
    omega: float = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise InvalidKernel(f"bandwidth omega must be positive, got {self.omega}")
        clean = {int(n): float(c) for n, c in sorted(self.coefficients.items())}
        if not all(np.isfinite(c) for c in clean.values()):
            raise InvalidKernel("coefficients must be finite")
        object.__setattr__(self, "coefficients", clean)
        object.__setattr__(self, "omega", float(self.omega))

    @classmethod
    def from_arrays(cls, indices: Sequence[int], values: Sequence[float], omega: float = 1.0,
                    cutoff: float = 0.0) -> "PWFunction":
        return cls({int(n): float(c) for n, c in zip(indices, values) if abs(c) > cutoff}, omega)

    @property
    def indices(self) -> np.ndarray:
        return np.fromiter(self.coefficients.keys(), dtype=int, count=len(self.coefficients))

    @property
    def values(self) -> np.ndarray:
        return np.fromiter(self.coefficients.values(), dtype=float, count=len(self.coefficients))

    def dense(self, indices: Sequence[int]) -> np.ndarray:
        return np.array([self.coefficients.get(int(n), 0.0) for n in indices])

    def __call__(self, t: ArrayLike) -> np.ndarray:
        return eval_pw(self, t)

    def __add__(self, other: "PWFunction") -> "PWFunction":
        if other.omega != self.omega:
            raise ValueError("cannot add sinc series of different bandwidth")
        merged = dict(self.coefficients)
        for n, c in other.coefficients.items():
            merged[n] = merged.get(n, 0.0) + c
        return PWFunction(merged, self.omega)

    def __rmul__(self, scale: float) -> "PWFunction":
        return PWFunction({n: scale * c for n, c in self.coefficients.items()}, self.omega)

    def to_dict(self) -> dict:
        return {"omega": self.omega, "coeffs": {str(n): c for n, c in self.coefficients.items()}}

    @classmethod
    def from_dict(cls, data: dict) -> "PWFunction":
        return cls({int(n): c for n, c in data.get("coeffs", {}).items()}, data.get("omega", 1.0))


@dataclass(frozen=True)
class CompactFunction:
    """A compactly supported real function on [lo, hi], zero outside."""

    func: Callable[[np.ndarray], np.ndarray]
    lo: float
    hi: float
    breakpoints: Tuple[float, ...] = ()

    @classmethod
    def from_kernel(cls, k: AverageKernel) -> "CompactFunction":
        lo, hi = k.support
        return cls(k, lo, hi, k.breakpoints)

    @classmethod
    def from_table(cls, times: Sequence[float], values: Sequence[float]) -> "CompactFunction":
        times = np.asarray(times, dtype=float)
        spline = CubicSpline(times, np.asarray(values, dtype=float))
        lo, hi = float(times[0]), float(times[-1])

        def func(x):
            x = np.asarray(x, dtype=float)
            return np.where((x >= lo) & (x <= hi), spline(np.clip(x, lo, hi)), 0.0)

        return cls(func, lo, hi, tuple(times))

    @property
    def edges(self) -> Tuple[float, ...]:
        return tuple(sorted({self.lo, self.hi, *(b for b in self.breakpoints if self.lo <= b <= self.hi)}))

    def __call__(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.where((t >= self.lo) & (t <= self.hi), self.func(t), 0.0)


@dataclass(frozen=True)
class StepFunction:
    """Piecewise constant: values[j] on [edges[j], edges[j + 1]), zero outside."""

    edges: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if edges.size != values.size + 1 or np.any(np.diff(edges) <= 0):
            raise ValueError("a step function needs increasing edges, one more than values")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "values", values)

    @property
    def lo(self) -> float:
        return float(self.edges[0])

    @property
    def hi(self) -> float:
        return float(self.edges[-1])

    def __call__(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        j = np.searchsorted(self.edges, t, side="right") - 1
        inside = (j >= 0) & (j < self.values.size)
        return np.where(inside, self.values[np.clip(j, 0, self.values.size - 1)], 0.0)


def eval_pw(f: PWFunction, t: ArrayLike) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if not f.coefficients:
        return np.zeros_like(t)
    return sinc(f.omega * t[..., None] - f.indices) @ f.values


def basis_matrix(omega: float, indices: Sequence[int], t: ArrayLike) -> np.ndarray:
    """Rows: time points, columns: sinc(omega t - n) for each index n."""
    t = np.asarray(t, dtype=float)
    return sinc(omega * t[:, None] - np.asarray(indices)[None, :])


def basis_averages(omega: float, indices: Sequence[int], k: AverageKernel,
                   quad: QuadratureService = quadrature) -> np.ndarray:
    """<sinc(omega . - n), u> for every n in ``indices``."""
    n = np.asarray(indices, dtype=float)
    if n.size == 0:
        return np.zeros(0)

    def integrand(x):
        return k(x)[None, :] * sinc(omega * x[None, :] - n[:, None])

    return np.atleast_1d(quad.integrate(integrand, k.breakpoints))


def local_average(f: PWFunction, k: AverageKernel, quad: QuadratureService = quadrature) -> float:
    """<f, u> = ∫ f(t) u(t) dt over the kernel support."""
    if not f.coefficients:
        return 0.0
    return float(basis_averages(f.omega, f.indices, k, quad) @ f.values)


def step_projection_matrix(edges: np.ndarray, omega: float, indices: Sequence[int]) -> np.ndarray:
    """Columns map a step value to the sinc coefficients of its projection.

    For a unit step on [alpha, beta], (P g)(n / omega) equals
    (Si(pi (omega beta - n)) - Si(pi (omega alpha - n))) / pi.
    """
    n = np.asarray(indices, dtype=float)[:, None]
    si, _ = sici(np.pi * (omega * np.asarray(edges, dtype=float)[None, :] - n))
    return np.diff(si, axis=1) / np.pi


def _default_indices(lo: float, hi: float, omega: float, margin: int) -> np.ndarray:
    return np.arange(int(np.floor(omega * lo)) - margin, int(np.ceil(omega * hi)) + margin + 1)


def project_pw(g: Union[CompactFunction, StepFunction, PWFunction], omega: float,
               margin: int = PROJECTION_MARGIN, indices: Optional[Sequence[int]] = None,
               quad: QuadratureService = quadrature) -> PWFunction:
    """Orthogonal projection onto PW_{pi omega}, sampled at n / omega.

    c_n = omega ∫ g(s) sinc(n - omega s) ds, the time-domain form of
    (1/2pi) ∫_{-pi omega}^{pi omega} ĝ(ξ) exp(i n ξ / omega) dξ. The projection
    of a compactly supported g is not a finite series, so coefficients are
    computed on the support's index range widened by ``margin``.
    """
    if isinstance(g, PWFunction):
        if g.omega != omega:
            raise ValueError("re-projection needs the bandwidth the series was built with")
        return PWFunction.from_arrays(g.indices, g.values, omega, COEFFICIENT_CUTOFF)

    n = np.asarray(indices if indices is not None else _default_indices(g.lo, g.hi, omega, margin))
    if isinstance(g, StepFunction):
        coeffs = step_projection_matrix(g.edges, omega, n) @ g.values
    else:
        def integrand(x):
            return g(x)[None, :] * sinc(n[:, None] - omega * x[None, :])

        coeffs = omega * np.atleast_1d(quad.integrate(integrand, g.edges))
    return PWFunction.from_arrays(n, coeffs, omega, COEFFICIENT_CUTOFF)


def inner_product(f: PWFunction, h: PWFunction) -> float:
    """<f, h> in L2; the shifted sincs are orthogonal with norm 1 / omega."""
    if f.omega != h.omega:
        raise ValueError("inner products need a common bandwidth")
    return sum(c * h.coefficients.get(n, 0.0) for n, c in f.coefficients.items()) / f.omega


def wsk_reconstruct(samples: Mapping[int, float], omega: float, t: ArrayLike, N: int) -> np.ndarray:
    """Truncated point-sampling expansion sum_{|n| <= N} f(n / omega) sinc(omega t - n).

    Indices missing from ``samples`` count as zero samples.
    """
    n = np.arange(-N, N + 1)
    values = np.array([samples.get(int(i), 0.0) for i in n])
    t = np.asarray(t, dtype=float)
    return sinc(omega * t[..., None] - n) @ values


ZAK_PROFILES: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sinc": sinc,
    "sinc_derivative": sinc_derivative,
}


def zak_transform(profile: str, t: float, xi: ArrayLike, M: int) -> Union[complex, np.ndarray]:
    """Partial Zak sum Z_f(t, ξ) = sum_{|n| <= M} f(t - n) exp(i n ξ)."""
    if profile not in ZAK_PROFILES:
        raise ValueError(f"unknown Zak profile {profile!r}; choose from {sorted(ZAK_PROFILES)}")
    if M < 1:
        raise ValueError("truncation M must be at least 1")
    n = np.arange(-M, M + 1)
    values = ZAK_PROFILES[profile](t - n)
    xi = np.asarray(xi, dtype=float)
    result = np.exp(1j * np.multiply.outer(xi, n)) @ values
    return complex(result) if result.ndim == 0 else result


def zak_supremum(profile: str, t_grid: Sequence[float], xi_grid: Sequence[float], M: int) -> float:
    return max(float(np.abs(zak_transform(profile, t, xi_grid, M)).max()) for t in t_grid)
