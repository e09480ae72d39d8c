import logging
from dataclasses import dataclass, field
from enum import Enum
from math import comb, factorial
from typing import Sequence, Tuple, Union

import numpy as np

from exceptions import InvalidKernel, NotRieszBasis

logger = logging.getLogger(__name__)

FRAME_GRID_RESOLUTION = 16384
RIESZ_THRESHOLD = 1e-10

# |y| below this uses the Taylor series of sin(y)/y, above it the closed form
_SERIES_RADIUS = 4.0
_SERIES_TERMS = 40

ArrayLike = Union[float, Sequence[float], np.ndarray]


class Profile(str, Enum):
    BOX = "box"
    TRIANGLE = "triangle"
    RAISED_COSINE = "raised_cosine"


class Regime(str, Enum):
    OVERSAMPLED = "oversampled"
    NYQUIST_SHIFT_INVARIANT = "nyquist_shift_invariant"


@dataclass(frozen=True)
class AverageKernel:
    """Nonnegative unit-mass averaging profile supported on [center - a, center + b].

    The profile is laid out symmetrically about the midpoint of its support,
    so ``a != b`` moves the bump relative to ``center`` without changing its shape.
    """

    center: float
    a: float
    b: float
    profile: Profile = Profile.BOX

    def __post_init__(self):
        try:
            object.__setattr__(self, "profile", Profile(self.profile))
        except ValueError:
            raise InvalidKernel(
                f"profile must be one of {[p.value for p in Profile]}, got {self.profile!r}"
            ) from None
        for name in ("center", "a", "b"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise InvalidKernel(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.a < 0 or self.b < 0:
            raise InvalidKernel(f"radii must satisfy a >= 0 and b >= 0, got a={self.a}, b={self.b}")
        if self.a + self.b <= 0:
            raise InvalidKernel("support must have positive length: a + b > 0")

    @classmethod
    def symmetric(cls, width: float, center: float = 0.0, profile: Profile = Profile.BOX) -> "AverageKernel":
        return cls(center=center, a=width / 2, b=width / 2, profile=profile)

    @property
    def width(self) -> float:
        return self.a + self.b

    @property
    def midpoint(self) -> float:
        return self.center + 0.5 * (self.b - self.a)

    @property
    def delta(self) -> float:
        return max(self.a, self.b)

    @property
    def support(self) -> Tuple[float, float]:
        return self.center - self.a, self.center + self.b

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        lo, hi = self.support
        if self.profile is Profile.BOX:
            return lo, hi
        return lo, self.midpoint, hi

    def shifted(self, offset: float) -> "AverageKernel":
        return AverageKernel(self.center + offset, self.a, self.b, self.profile)

    def __call__(self, t: ArrayLike) -> np.ndarray:
        return eval_kernel(self, t)

    def to_dict(self) -> dict:
        return {"profile": self.profile.value, "center": self.center, "a": self.a, "b": self.b}

    @classmethod
    def from_dict(cls, data: dict) -> "AverageKernel":
        missing = {"profile", "center", "a", "b"} - set(data)
        if missing:
            raise InvalidKernel(f"kernel document is missing {sorted(missing)}")
        return cls(center=data["center"], a=data["a"], b=data["b"], profile=data["profile"])


@dataclass(frozen=True)
class FrameBounds:
    lower: float
    upper: float

    def __post_init__(self):
        if not 0 < self.lower <= self.upper:
            raise ValueError(f"frame bounds need 0 < A <= B, got A={self.lower}, B={self.upper}")


@dataclass(frozen=True)
class SamplingScheme:
    centers: Tuple[float, ...]
    kernels: Tuple[AverageKernel, ...]
    regime: Regime = Regime.OVERSAMPLED
    indices: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))
        object.__setattr__(self, "kernels", tuple(self.kernels))
        if not self.indices:
            object.__setattr__(self, "indices", tuple(range(len(self.centers))))
        if len(self.centers) != len(self.kernels) or len(self.indices) != len(self.centers):
            raise InvalidKernel("a sampling scheme needs exactly one kernel per center")
        if not self.centers:
            raise InvalidKernel("a sampling scheme needs at least one center")
        if np.any(np.diff(self.centers) <= 0):
            raise InvalidKernel("centers must be strictly increasing")
        for center, kernel in zip(self.centers, self.kernels):
            if kernel.center != center:
                raise InvalidKernel(f"kernel centered at {kernel.center} attached to center {center}")

        if self.regime is Regime.OVERSAMPLED:
            asymmetric = [k for k in self.kernels if k.a != k.b]
            if asymmetric:
                raise InvalidKernel("oversampled schemes accept symmetric kernels only (a == b)")
        else:
            if any(c != n for c, n in zip(self.centers, self.indices)) or np.any(np.diff(self.indices) != 1):
                raise InvalidKernel("shift-invariant schemes need consecutive integer centers")
            first = self.kernels[0]
            if any((k.a, k.b, k.profile) != (first.a, first.b, first.profile) for k in self.kernels):
                raise InvalidKernel("shift-invariant schemes need integer translates of one profile")

    @classmethod
    def uniform(cls, start: float, stop: float, gap: float, width: float,
                profile: Profile = Profile.BOX) -> "SamplingScheme":
        count = int(np.floor((stop - start) / gap + 1e-9)) + 1
        centers = [start + k * gap for k in range(count)]
        return cls.from_centers(centers, AverageKernel.symmetric(width, profile=profile))

    @classmethod
    def from_centers(cls, centers: Sequence[float], template: AverageKernel) -> "SamplingScheme":
        kernels = [AverageKernel(c, template.a, template.b, template.profile) for c in centers]
        return cls(tuple(centers), tuple(kernels), Regime.OVERSAMPLED)

    @classmethod
    def shift_invariant(cls, generator: AverageKernel, first: int, last: int) -> "SamplingScheme":
        indices = tuple(range(first, last + 1))
        kernels = tuple(generator.shifted(n - generator.center) for n in indices)
        return cls(tuple(float(n) for n in indices), kernels, Regime.NYQUIST_SHIFT_INVARIANT, indices)

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.centers)

    def to_dict(self) -> dict:
        template = self.kernels[0].to_dict()
        template.pop("center")
        return {"centers": list(self.centers), "kernel": template, "regime": self.regime.value}

    @classmethod
    def from_dict(cls, data: dict) -> "SamplingScheme":
        if "centers" not in data or "kernel" not in data:
            raise InvalidKernel("scheme document needs 'centers' and 'kernel'")
        template = AverageKernel.from_dict({"center": 0.0, **data["kernel"]})
        regime = Regime(data.get("regime", Regime.OVERSAMPLED))
        if regime is Regime.NYQUIST_SHIFT_INVARIANT:
            centers = [int(c) for c in data["centers"]]
            return cls.shift_invariant(template, centers[0], centers[-1])
        return cls.from_centers(data["centers"], template)


def eval_kernel(k: AverageKernel, t: ArrayLike) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    lo, hi = k.support
    inside = (t >= lo) & (t <= hi)
    s = 2.0 * (t - k.midpoint) / k.width
    if k.profile is Profile.BOX:
        values = np.full_like(t, 1.0 / k.width)
    elif k.profile is Profile.TRIANGLE:
        values = (2.0 / k.width) * np.clip(1.0 - np.abs(s), 0.0, None)
    else:
        values = (1.0 + np.cos(np.pi * s)) / k.width
    return np.where(inside, values, 0.0)


def _sinc_derivatives(y: np.ndarray, order: int) -> np.ndarray:
    """Rows 0..order of d^k/dy^k (sin y / y)."""
    y = np.asarray(y, dtype=float)
    out = np.empty((order + 1,) + y.shape)
    # Taylor series near 0, closed form elsewhere
    small = np.abs(y) < _SERIES_RADIUS
    ys = np.where(small, y, 0.0)
    yl = np.where(small, 1.0, y)
    for k in range(order + 1):
        series = np.zeros_like(ys)
        for j in range((k + 1) // 2, _SERIES_TERMS):
            series += (-1) ** j * ys ** (2 * j - k) / float((2 * j + 1) * factorial(2 * j - k))
        closed = np.zeros_like(yl)
        for m in range(k + 1):
            r = k - m
            closed += comb(k, m) * np.sin(yl + m * np.pi / 2) * (-1) ** r * factorial(r) / yl ** (r + 1)
        out[k] = np.where(small, series, closed)
    return out


def _envelope_derivatives(k: AverageKernel, xi: np.ndarray, order: int) -> np.ndarray:
    """Derivatives of the real even factor G with û(ξ) = exp(-i m ξ) G(ξ)."""
    w = k.width
    powers = (w / 2) ** np.arange(order + 1)
    x = w * xi / 2
    if k.profile is Profile.BOX:
        return _sinc_derivatives(x, order) * powers.reshape((-1,) + (1,) * xi.ndim)
    if k.profile is Profile.RAISED_COSINE:
        g = _sinc_derivatives(x, order) + 0.5 * _sinc_derivatives(x - np.pi, order) \
            + 0.5 * _sinc_derivatives(x + np.pi, order)
        return g * powers.reshape((-1,) + (1,) * xi.ndim)
    # triangle: square of the half-width box envelope
    g = _sinc_derivatives(w * xi / 4, order)
    out = np.empty_like(g)
    for n in range(order + 1):
        out[n] = (w / 4) ** n * sum(comb(n, m) * g[m] * g[n - m] for m in range(n + 1))
    return out


def kernel_fourier_derivatives(k: AverageKernel, xi: ArrayLike, order: int = 0) -> np.ndarray:
    """û and its first ``order`` derivatives, stacked along axis 0 (closed form)."""
    xi = np.asarray(xi, dtype=float)
    env = _envelope_derivatives(k, xi, order)
    # off-center profiles pick up exp(-i m ξ)
    shift = -1j * k.midpoint
    phase = np.exp(shift * xi)
    out = np.empty(env.shape, dtype=complex)
    for n in range(order + 1):
        out[n] = phase * sum(comb(n, j) * shift ** j * env[n - j] for j in range(n + 1))
    return out


def kernel_fourier(k: AverageKernel, xi: ArrayLike) -> Union[complex, np.ndarray]:
    """û(ξ) = ∫ u(t) exp(-i t ξ) dt."""
    value = kernel_fourier_derivatives(k, xi, 0)[0]
    return complex(value) if value.ndim == 0 else value


def frame_bounds_shift_invariant(profile: AverageKernel,
                                 grid_resolution: int = FRAME_GRID_RESOLUTION) -> FrameBounds:
    """Grid estimate of ess inf / ess sup of |û| on [-pi, pi].

    The grid has ``grid_resolution`` equal intervals, so both band edges and
    the origin are nodes. The built-in profiles have continuous |û|, so the
    grid extrema converge to the essential bounds as the grid is refined.
    """
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be at least 2")
    xi = np.linspace(-np.pi, np.pi, grid_resolution + 1)
    magnitude = np.abs(kernel_fourier(profile, xi))
    lower, upper = float(magnitude.min()), float(magnitude.max())
    if lower < RIESZ_THRESHOLD:
        raise NotRieszBasis(
            f"|û| drops to {lower:.3e} on [-pi, pi]; translates of this {profile.profile.value} "
            f"kernel (width {profile.width}) are not a Riesz basis"
        )
    return FrameBounds(lower, upper)


def oversampled_threshold(omega: float) -> float:
    return 1.0 / (np.sqrt(2.0) * np.pi * omega)


def oversampled_delta(scheme: SamplingScheme) -> float:
    """Smallest δ with every gap <= δ and every support inside [t_n - δ/2, t_n + δ/2]."""
    radius = max(k.delta for k in scheme.kernels)
    gap = float(scheme.gaps.max()) if len(scheme.centers) > 1 else 0.0
    return max(gap, 2.0 * radius)


def check_oversampled_condition(scheme: SamplingScheme, omega: float) -> bool:
    if scheme.regime is not Regime.OVERSAMPLED:
        raise InvalidKernel("the oversampled condition applies to oversampled schemes only")
    if omega <= 0:
        raise ValueError("omega must be positive")
    return bool(oversampled_delta(scheme) < oversampled_threshold(omega))


def check_nyquist_condition(a: float, b: float) -> bool:
    if a < 0 or b < 0 or a + b <= 0:
        raise InvalidKernel(f"need a, b >= 0 and a + b > 0, got a={a}, b={b}")
    return bool(np.sqrt(max(a, b) * (a + b)) < 1.0 / np.pi)


