import csv
import logging
from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np

from exceptions import InvalidKernel

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """Discrete spectral distribution of a real WSS process.

    Atoms are sorted, distinct and mirror-symmetric, so the process and its
    autocovariance are real. An empty (or all-zero) measure is the zero process.
    """

    frequencies: np.ndarray
    masses: np.ndarray
    band_edge: float = np.pi

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=float).ravel()
        masses = np.asarray(self.masses, dtype=float).ravel()
        if freqs.size != masses.size:
            raise InvalidKernel("each atom needs exactly one frequency and one mass")
        if not (np.all(np.isfinite(freqs)) and np.all(np.isfinite(masses))):
            raise InvalidKernel("atoms must be finite")
        if np.any(masses < 0):
            raise InvalidKernel("spectral masses must be nonnegative")
        if np.any(np.diff(freqs) <= 0):
            raise InvalidKernel("atoms must be sorted by frequency with distinct frequencies")
        scale = max(1.0, float(np.abs(freqs).max(initial=0.0)))
        if not (np.allclose(freqs, -freqs[::-1], rtol=0, atol=SYMMETRY_TOL * scale)
                and np.allclose(masses, masses[::-1], rtol=1e-12, atol=0)):
            raise InvalidKernel("atoms must come in symmetric pairs (lambda, m), (-lambda, m)")
        if not self.band_edge > 0:
            raise InvalidKernel("band edge must be positive")
        freqs.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "band_edge", float(self.band_edge))

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[float, float]], band_edge: float = np.pi) -> "SpectralMeasure":
        """Mirror nonnegative-frequency atoms (lambda, m) into a symmetric measure."""
        atoms = {}
        for lam, mass in pairs:
            atoms[abs(float(lam))] = float(mass)
        freqs, masses = [], []
        for lam in sorted(atoms):
            if lam > 0:
                freqs = [-lam] + freqs + [lam]
                masses = [atoms[lam]] + masses + [atoms[lam]]
        if 0.0 in atoms:
            mid = len(freqs) // 2
            freqs.insert(mid, 0.0)
            masses.insert(mid, atoms[0.0])
        return cls(np.array(freqs), np.array(masses), band_edge)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    @property
    def positive(self) -> Tuple[np.ndarray, np.ndarray]:
        """Nonnegative frequencies with their synthesis amplitudes."""
        keep = self.frequencies >= 0
        freqs = self.frequencies[keep]
        amplitudes = np.sqrt(np.where(freqs > 0, 2.0, 1.0) * self.masses[keep])
        return freqs, amplitudes

    def scaled(self, factor: float) -> "SpectralMeasure":
        return SpectralMeasure(self.frequencies, factor * self.masses, self.band_edge)

    def to_dict(self) -> dict:
        return {"atoms": [[float(l), float(m)] for l, m in zip(self.frequencies, self.masses)],
                "band_edge": self.band_edge}

    @classmethod
    def from_dict(cls, data: dict) -> "SpectralMeasure":
        atoms = data.get("atoms", [])
        freqs = [a[0] for a in atoms]
        masses = [a[1] for a in atoms]
        return cls(np.array(freqs, dtype=float), np.array(masses, dtype=float), data.get("band_edge", np.pi))


@dataclass(frozen=True, eq=False)
class SamplePath:
    """One realization X(t) = sum_j A_j (xi_j cos(lambda_j t) + eta_j sin(lambda_j t))."""

    times: np.ndarray
    values: np.ndarray
    seed: int
    model: SpectralMeasure
    xi: np.ndarray = field(repr=False, default=None)
    eta: np.ndarray = field(repr=False, default=None)

    def at(self, t: ArrayLike) -> np.ndarray:
        freqs, amplitudes = self.model.positive
        t = np.asarray(t, dtype=float)
        phase = np.multiply.outer(t, freqs)
        return np.cos(phase) @ (amplitudes * self.xi) + np.sin(phase) @ (amplitudes * self.eta)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["t", "x"])
            for t, x in zip(self.times, self.values):
                writer.writerow([repr(float(t)), repr(float(x))])


def autocovariance(m: SpectralMeasure, t: ArrayLike) -> np.ndarray:
    """R_X(t) = sum_j m_j cos(lambda_j t)."""
    t = np.asarray(t, dtype=float)
    return np.cos(np.multiply.outer(t, m.frequencies)) @ m.masses


def draw_amplitudes(m: SpectralMeasure, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Standard normal draws for the cosine then the sine amplitudes of each nonnegative atom."""
    count = int(np.count_nonzero(m.frequencies >= 0))
    xi = rng.standard_normal(count)
    eta = rng.standard_normal(count)
    return xi, eta


def synthesize_path(m: SpectralMeasure, seed: int, times: ArrayLike) -> SamplePath:
    """Sample path of the spectral representation from a PCG64 generator seeded with ``seed``."""
    rng = np.random.default_rng(seed)
    xi, eta = draw_amplitudes(m, rng)
    times = np.asarray(times, dtype=float)
    path = SamplePath(times, np.zeros_like(times), int(seed), m, xi, eta)
    object.__setattr__(path, "values", path.at(times))
    return path


def is_bandlimited(m: SpectralMeasure, edge: float) -> bool:
    return bool(np.all(np.abs(m.frequencies) <= edge))


def flat_band_measure(edge: float, total_power: float, n_atoms: int) -> SpectralMeasure:
    """Equal masses at the midpoints of a uniform partition of [-edge, edge].

    Its autocovariance approximates total_power * sinc(edge t / pi).
    """
    if not edge > 0 or not total_power > 0:
        raise InvalidKernel("flat band needs edge > 0 and total_power > 0")
    if n_atoms < 2 or n_atoms % 2:
        raise InvalidKernel(f"n_atoms must be even and at least 2, got {n_atoms}")
    step = 2.0 * edge / n_atoms
    positive = (np.arange(n_atoms // 2) + 0.5) * step
    freqs = np.concatenate([-positive[::-1], positive])
    masses = np.full(n_atoms, total_power / n_atoms)
    return SpectralMeasure(freqs, masses, edge)
