import logging
from typing import Callable, Sequence, Tuple, Union

import numpy as np

from exceptions import QuadratureNotConverged

logger = logging.getLogger(__name__)

DEFAULT_ORDER = 16
DEFAULT_TOL = 1e-12
MAX_LEVELS = 20

Integrand = Callable[[np.ndarray], np.ndarray]


class QuadratureService:
    """Composite Gauss-Legendre quadrature with dyadic panel refinement.

    The integrand receives a 1-D array of nodes and returns an array whose
    last axis runs over those nodes; leading axes are integrated together, so
    a whole family of integrals (one per basis function, per atom, ...) is
    refined on a common set of panels. A panel is accepted once its two
    halves agree with the whole to within the tolerance; panels that never
    agree after ``max_levels`` bisections raise QuadratureNotConverged.
    """

    def __init__(self, order: int = DEFAULT_ORDER, atol: float = DEFAULT_TOL,
                 rtol: float = 0.0, max_levels: int = MAX_LEVELS):
        self.order = order
        self.atol = atol
        self.rtol = rtol
        self.max_levels = max_levels
        self.nodes, self.weights = np.polynomial.legendre.leggauss(order)

    def _panel_sums(self, func: Integrand, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        x = (mid[:, None] + half[:, None] * self.nodes[None, :]).ravel()
        values = np.asarray(func(x))
        values = values.reshape(values.shape[:-1] + (lo.size, self.order))
        return (values @ self.weights) * half

    def integrate(self, func: Integrand, breakpoints: Sequence[float]) -> Union[float, complex, np.ndarray]:
        edges = np.unique(np.asarray(breakpoints, dtype=float))
        if edges.size < 2:
            raise ValueError("at least two distinct breakpoints are required")
        lo, hi = edges[:-1], edges[1:]
        coarse = self._panel_sums(func, lo, hi)
        estimate = np.max(np.abs(coarse.sum(axis=-1)))
        tol = max(self.atol, self.rtol * float(estimate))
        total = np.zeros(coarse.shape[:-1], dtype=coarse.dtype)

        for level in range(self.max_levels):
            mid = 0.5 * (lo + hi)
            left = self._panel_sums(func, lo, mid)
            right = self._panel_sums(func, mid, hi)
            fine = left + right
            err = np.abs(fine - coarse)
            if err.ndim > 1:
                err = err.reshape(-1, err.shape[-1]).max(axis=0)
            done = err <= tol
            total = total + fine[..., done].sum(axis=-1)
            if done.all():
                logger.debug(f"Quadrature converged after {level + 1} levels")
                return total[()] if total.ndim == 0 else total
            keep = ~done
            lo = np.concatenate([lo[keep], mid[keep]])
            hi = np.concatenate([mid[keep], hi[keep]])
            coarse = np.concatenate([left[..., keep], right[..., keep]], axis=-1)

        raise QuadratureNotConverged(
            f"{lo.size} panels still above tolerance {tol:.1e} after {self.max_levels} refinement levels"
        )

    def composite_rule(self, breakpoints: Sequence[float], max_width: float) -> Tuple[np.ndarray, np.ndarray]:
        """Fixed nodes and weights with every panel no wider than ``max_width``."""
        edges = np.unique(np.asarray(breakpoints, dtype=float))
        nodes, weights = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            count = max(1, int(np.ceil((b - a) / max_width)))
            cuts = np.linspace(a, b, count + 1)
            half = 0.5 * np.diff(cuts)
            mid = 0.5 * (cuts[:-1] + cuts[1:])
            nodes.append((mid[:, None] + half[:, None] * self.nodes[None, :]).ravel())
            weights.append((half[:, None] * self.weights[None, :]).ravel())
        return np.concatenate(nodes), np.concatenate(weights)


quadrature = QuadratureService()
