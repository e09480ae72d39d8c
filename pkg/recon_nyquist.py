import csv
import logging
from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline

from exceptions import (DerivativeOrderExceeded, InvalidKernel, NonRealKernel,
                        TabulationRangeExceeded)
from kernels import (AverageKernel, FrameBounds, check_nyquist_condition,
                     frame_bounds_shift_invariant, kernel_fourier, kernel_fourier_derivatives)
from services.quadrature_service import QuadratureService, quadrature

logger = logging.getLogger(__name__)

TABLE_SPACING = 1.0 / 64
DEFAULT_HALF_WIDTH = 70.0
IMAGINARY_TOL = 1e-10
# largest phase change |x| * width allowed on one 16-node panel of the inverse transform
_PANEL_PHASE = 8.0
_CHUNK = 4_000_000

decay_quadrature = QuadratureService(atol=1e-14, rtol=1e-10, max_levels=32)

ArrayLike = Union[float, Sequence[float], np.ndarray]


@lru_cache(maxsize=None)
def smoothstep(p: int) -> Polynomial:
    """S_p(x) = x^(p+1) sum_k C(p+k, k) C(2p+1, p-k) (-x)^k, flat to order p at 0 and 1."""
    coef = np.zeros(2 * p + 2)
    for k in range(p + 1):
        coef[p + 1 + k] = comb(p + k, k) * comb(2 * p + 1, p - k) * (-1) ** k
    return Polynomial(coef)


@dataclass(frozen=True)
class GuardBandWindow:
    """θ = 1 on [-omega, omega], 0 outside (-pi, pi), a C^p smoothstep in between."""

    omega: float
    p: int

    def __post_init__(self):
        if not 0 < self.omega < np.pi:
            raise InvalidKernel(f"window inner edge must lie in (0, pi), got {self.omega}")
        if int(self.p) != self.p or self.p < 2:
            raise InvalidKernel(f"window smoothness p must be an integer >= 2, got {self.p}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "omega", float(self.omega))

    def __call__(self, xi: ArrayLike, d: int = 0) -> np.ndarray:
        return window_eval(self, xi, d)

    def to_dict(self) -> dict:
        return {"omega": self.omega, "p": self.p}


def window_eval(w: GuardBandWindow, xi: ArrayLike, d: int = 0) -> np.ndarray:
    if d < 0:
        raise ValueError("derivative order must be nonnegative")
    if d > w.p:
        raise DerivativeOrderExceeded(f"θ is only C^{w.p}; derivative of order {d} requested")
    xi = np.asarray(xi, dtype=float)
    r = np.abs(xi)
    gap = np.pi - w.omega
    transition = (r > w.omega) & (r < np.pi)
    x = np.clip((np.pi - r) / gap, 0.0, 1.0)
    poly = smoothstep(w.p).deriv(d) if d else smoothstep(w.p)
    inside = poly(x) * (-np.sign(xi) / gap) ** d
    flat = 1.0 if d == 0 else 0.0
    return np.where(transition, inside, np.where(r <= w.omega, flat, 0.0))


@dataclass(frozen=True)
class KernelGrid:
    half_width: float = DEFAULT_HALF_WIDTH
    spacing: float = TABLE_SPACING

    @classmethod
    def for_truncation(cls, N: int, t_max: float = 0.0) -> "KernelGrid":
        return cls(half_width=N + abs(t_max) + 10.0)

    @property
    def nodes(self) -> np.ndarray:
        count = int(np.ceil(self.half_width / self.spacing))
        return np.arange(-count, count + 1) * self.spacing


@dataclass(frozen=True)
class DecayBound:
    p: int
    t: float
    constant: float

    def __post_init__(self):
        if not self.constant > 0:
            raise ValueError(f"decay constant must be positive, got {self.constant}")


class ReconstructionKernel:
    """Dual kernel s̃ with spectrum θ(ξ) / conj(û(ξ)) on [-pi, pi].

    ``kernel(x)`` interpolates the tabulated values with a cubic spline;
    ``kernel.exact(x)`` evaluates the inverse Fourier integral directly.
    """

    def __init__(self, generator: AverageKernel, window: Optional[GuardBandWindow],
                 grid: KernelGrid, bounds: FrameBounds):
        self.generator = generator
        self.window = window
        self.grid = grid
        self.bounds = bounds
        self.nodes = grid.nodes
        self.values = np.zeros_like(self.nodes)
        self.is_real = True
        self._spline = None

    @property
    def edges(self) -> Sequence[float]:
        if self.window is None:
            return (-np.pi, 0.0, np.pi)
        return (-np.pi, -self.window.omega, self.window.omega, np.pi)

    def spectrum(self, xi: ArrayLike) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        inband = np.abs(xi) <= np.pi
        theta = self.window(xi) if self.window is not None else inband.astype(float)
        return np.where(inband, theta / np.conj(kernel_fourier(self.generator, xi)), 0.0)

    def exact(self, x: ArrayLike) -> np.ndarray:
        """(1/2pi) ∫_{-pi}^{pi} spectrum(ξ) exp(i x ξ) dξ by composite Gauss-Legendre."""
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        reach = max(1.0, float(np.abs(flat).max(initial=0.0)))
        nodes, weights = quadrature.composite_rule(self.edges, min(0.5, _PANEL_PHASE / reach))
        density = self.spectrum(nodes) * weights / (2 * np.pi)
        out = np.empty(flat.shape, dtype=complex)
        step = max(1, _CHUNK // nodes.size)
        for start in range(0, flat.size, step):
            chunk = flat[start:start + step]
            out[start:start + step] = np.exp(1j * np.multiply.outer(chunk, nodes)) @ density
        out = out.reshape(x.shape)
        return out.real if self.is_real else out

    def covers(self, lo: float, hi: float) -> bool:
        return self.nodes[0] <= lo and hi <= self.nodes[-1]

    def __call__(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.size and not self.covers(float(x.min()), float(x.max())):
            raise TabulationRangeExceeded(
                f"kernel tabulated on [{self.nodes[0]}, {self.nodes[-1]}], "
                f"evaluation requested on [{x.min()}, {x.max()}]"
            )
        return self._spline(x)

    def header(self, decays: Sequence[DecayBound] = ()) -> dict:
        return {
            "profile": self.generator.to_dict(),
            "window": self.window.to_dict() if self.window else None,
            "A": self.bounds.lower,
            "B": self.bounds.upper,
            "C_p": [{"t": d.t, "p": d.p, "C": d.constant} for d in decays],
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["t", "s"])
            for t, s in zip(self.nodes, self.values):
                writer.writerow([repr(float(t)), repr(float(np.real(s)))])


def build_kernel(u: AverageKernel, w: Optional[GuardBandWindow] = None,
                 grid: Optional[KernelGrid] = None, strict: bool = True) -> ReconstructionKernel:
    bounds = frame_bounds_shift_invariant(u)
    if not check_nyquist_condition(u.a, u.b):
        logger.warning(f"sqrt(delta (a + b)) >= 1/pi for a={u.a}, b={u.b}: the expansion is not guaranteed")
    kernel = ReconstructionKernel(u, w, grid or KernelGrid(), bounds)
    kernel.is_real = False
    values = kernel.exact(kernel.nodes)
    residue = float(np.abs(values.imag).max(initial=0.0))
    if residue > IMAGINARY_TOL:
        if strict:
            raise NonRealKernel(f"imaginary residue {residue:.2e} exceeds {IMAGINARY_TOL:.0e}")
        logger.warning(f"Keeping complex dual kernel, imaginary residue {residue:.2e}")
        kernel.values = values
    else:
        kernel.is_real = True
        kernel.values = values.real
    kernel._spline = CubicSpline(kernel.nodes, kernel.values)
    window = w.to_dict() if w else None
    logger.info(f"Built dual kernel for {u.profile.value} (window {window}) on {kernel.nodes.size} nodes, "
                f"A={bounds.lower:.6f} B={bounds.upper:.6f}")
    return kernel


def _reciprocal_derivatives(spectrum_derivs: np.ndarray) -> np.ndarray:
    """Derivatives of 1/û from those of û: (1/û)^(n) = -(1/û) sum_{j<n} C(n, j) (1/û)^(j) û^(n-j)."""
    order = spectrum_derivs.shape[0] - 1
    out = np.empty_like(spectrum_derivs)
    out[0] = 1.0 / spectrum_derivs[0]
    for n in range(1, order + 1):
        acc = sum(comb(n, j) * out[j] * spectrum_derivs[n - j] for j in range(n))
        out[n] = -out[0] * acc
    return out


def decay_integrand(u: AverageKernel, w: GuardBandWindow, t: float, xi: ArrayLike) -> np.ndarray:
    """(θ(ξ) exp(-i t ξ) / û(ξ))^(p) by the Leibniz rule over the three factors."""
    p = w.p
    xi = np.asarray(xi, dtype=float)
    recip = _reciprocal_derivatives(kernel_fourier_derivatives(u, xi, p))
    theta = np.stack([window_eval(w, xi, j) for j in range(p + 1)])
    phase = np.exp(-1j * t * xi)
    total = np.zeros(xi.shape, dtype=complex)
    for i in range(p + 1):
        for j in range(p + 1 - i):
            k = p - i - j
            # trinomial coefficient
            weight = factorial(p) // (factorial(i) * factorial(j) * factorial(k))
            total += weight * recip[i] * theta[j] * (-1j * t) ** k
    return total * phase


def decay_constant(u: AverageKernel, w: Optional[GuardBandWindow], t: float,
                   quad: QuadratureService = decay_quadrature) -> DecayBound:
    """C_p(t) = (1/2pi) ∫_{-pi}^{pi} |(θ exp(-i t ξ) / û)^(p)| dξ."""
    if w is None:
        raise DerivativeOrderExceeded("the decay constant needs a C^p guard-band window")
    frame_bounds_shift_invariant(u)

    def integrand(xi):
        return np.abs(decay_integrand(u, w, t, xi)) / (2 * np.pi)

    value = float(quad.integrate(integrand, (-np.pi, -w.omega, 0.0, w.omega, np.pi)))
    logger.debug(f"C_{w.p}({t}) = {value:.6e}")
    return DecayBound(w.p, float(t), value)


def check_decay(kernel: ReconstructionKernel, decay: DecayBound, n_max: int) -> float:
    """Worst ratio |s̃(t - n)| |n|^p / C_p(t) over 1 <= |n| <= n_max (at most 1 when the bound holds)."""
    n = np.concatenate([np.arange(-n_max, 0), np.arange(1, n_max + 1)])
    values = np.abs(kernel.exact(decay.t - n))
    return float(np.max(values * np.abs(n) ** decay.p) / decay.constant)


def tail_bound(decay: DecayBound, N: int, amplitude: float = 1.0) -> float:
    """amplitude * sum_{|n| > N} C_p / |n|^p, bounded by the integral test."""
    return amplitude * 2.0 * decay.constant / ((decay.p - 1) * N ** (decay.p - 1))


def reconstruct(averages: Mapping[int, float], kernel: ReconstructionKernel, t: ArrayLike, N: int) -> np.ndarray:
    """sum_{|n| <= N} averages[n] s̃(t - n); absent averages count as zero."""
    n = np.arange(-N, N + 1)
    values = np.array([averages.get(int(i), 0.0) for i in n])
    t = np.asarray(t, dtype=float)
    return kernel(t[..., None] - n) @ values


def dual_pairing(kernel: ReconstructionKernel, offsets: Sequence[int],
                 quad: Optional[QuadratureService] = None) -> np.ndarray:
    """<u(. - m), s̃(. - n)> as a function of k = m - n, i.e. ∫ u(y) s̃(y + k) dy."""
    quad = quad or QuadratureService(atol=1e-13)
    k = np.asarray(offsets, dtype=float)
    u = kernel.generator

    def integrand(y):
        return u(y)[None, :] * kernel.exact(y[None, :] + k[:, None])

    return np.atleast_1d(quad.integrate(integrand, u.breakpoints))
