"""Comparison predictors for the connection probability and the Monte-Carlo oracle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import Gaussian2
from .series import ConnectionProbability, Method, three_delta_bounds

ORACLE_DIM = 10_000_000
_CHUNK = 1_000_000


@dataclass(frozen=True)
class SamplerConfig:
    """Sample count and seed for :func:`random_sampling`.

    ``stream`` separates independent calls sharing one seed (e.g. a call
    counter), so results do not depend on evaluation order.
    """

    dim: int = 10_000
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dim must be >= 1")
        if self.seed < 0 or self.stream < 0:
            raise ValueError("seed and stream must be non-negative")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed, self.stream])))


def bernoulli(d: Gaussian2, rho: float) -> ConnectionProbability:
    inside = float(np.hypot(d.mean[0], d.mean[1])) <= rho
    return ConnectionProbability(1.0 if inside else 0.0, Method.BERNOULLI)


def linear(d: Gaussian2, rho: float) -> ConnectionProbability:
    """Linear ramp across the 3-sigma band of the distance."""
    lo, hi = three_delta_bounds(d)
    if rho <= lo:
        value = 0.0
    elif rho >= hi:
        value = 1.0
    else:
        value = (rho - lo) / (hi - lo)
    return ConnectionProbability(value, Method.LINEAR)


def _cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        # positive semi-definite input; eigen square root handles the rank deficiency
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0.0, None))


def _count_inside(d: Gaussian2, rhos: np.ndarray, dim: int, rng: np.random.Generator) -> np.ndarray:
    L = _cholesky(np.asarray(d.cov, dtype=float))
    mean = np.asarray(d.mean, dtype=float)
    r2 = np.sort(np.asarray(rhos, dtype=float) ** 2)
    order = np.argsort(np.asarray(rhos, dtype=float) ** 2, kind="stable")
    counts = np.zeros(len(r2), dtype=np.int64)
    left = dim
    while left > 0:
        n = min(left, _CHUNK)
        z = rng.standard_normal((n, 2))
        x = z @ L.T + mean
        dist2 = np.einsum("ij,ij->i", x, x)
        if len(r2) <= 8:
            counts += np.count_nonzero(dist2[:, None] <= r2, axis=0)
        else:
            counts += np.searchsorted(np.sort(dist2), r2, side="right")
        left -= n
    out = np.empty_like(counts)
    out[order] = counts
    return out


def random_sampling(d: Gaussian2, rho: float, cfg: SamplerConfig) -> ConnectionProbability:
    count = _count_inside(d, np.array([rho]), int(cfg.dim), cfg.generator())[0]
    return ConnectionProbability(count / cfg.dim, Method.RANDOM)


def random_sampling_sweep(d: Gaussian2, rhos, cfg: SamplerConfig) -> np.ndarray:
    """Fractions inside each radius, all from one shared sample set."""
    return _count_inside(d, np.asarray(rhos, dtype=float), int(cfg.dim), cfg.generator()) / cfg.dim


def oracle(d: Gaussian2, rho: float, seed: int = 0, stream: int = 0) -> ConnectionProbability:
    cfg = SamplerConfig(ORACLE_DIM, seed, stream)
    count = _count_inside(d, np.array([rho]), ORACLE_DIM, cfg.generator())[0]
    return ConnectionProbability(count / ORACLE_DIM, Method.ORACLE)


def oracle_sweep(d: Gaussian2, rhos, seed: int = 0, stream: int = 0, dim: int = ORACLE_DIM) -> np.ndarray:
    return random_sampling_sweep(d, rhos, SamplerConfig(dim, seed, stream))
