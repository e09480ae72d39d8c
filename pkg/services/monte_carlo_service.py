import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Tuple

import numpy as np

from spectral import SpectralMeasure, draw_amplitudes

logger = logging.getLogger(__name__)


class MonteCarloService:
    """Seeded trials whose draws do not depend on how they are scheduled.

    Trial ``i`` of an experiment seeded with ``seed`` uses the generator
    ``default_rng(SeedSequence([seed, i]))``; rows are stored by trial index,
    so any number of worker threads produces identical draws.
    """

    def __init__(self, seed: int, trials: int, threads: int = 1):
        if seed < 0:
            raise ValueError("seeds must be nonnegative")
        if trials < 2:
            raise ValueError("at least two trials are needed for a standard error")
        self.seed = int(seed)
        self.trials = int(trials)
        self.threads = max(1, int(threads))

    def trial_rng(self, index: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, int(index)]))

    def draws(self, model: SpectralMeasure) -> Tuple[np.ndarray, np.ndarray]:
        """Cosine and sine amplitude draws, one row per trial."""
        count = int(np.count_nonzero(model.frequencies >= 0))
        xi = np.empty((self.trials, count))
        eta = np.empty((self.trials, count))

        def fill(chunk):
            for i in chunk:
                xi[i], eta[i] = draw_amplitudes(model, self.trial_rng(i))

        chunks = np.array_split(np.arange(self.trials), self.threads)
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            list(pool.map(fill, chunks))
        logger.debug(f"Drew {self.trials} trials x {count} atoms on {self.threads} threads")
        return xi, eta

    @staticmethod
    def summarize(samples: np.ndarray) -> Tuple[float, float]:
        """Mean and standard error with compensated summation."""
        samples = np.asarray(samples, dtype=float).ravel()
        n = samples.size
        mean = math.fsum(samples) / n
        variance = math.fsum((samples - mean) ** 2) / (n - 1)
        return mean, math.sqrt(variance / n)
