"""Ensembles of random twists and exact enumeration of the finite-n law."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import os
import time

import numpy as np

from .errors import ConfigError, ResourceBudgetExceeded, TooLarge
from .geometry import frame_field
from .stats import empirical_moments
from .twist import (DEFAULT_QUADRATURE_ORDER, TwistGeometry, scaled_difference_batch,
                    twist_nodes)
from . import rng

CHUNK = 64
DEFAULT_COST_CAP = 5e9
ENUMERATION_CAP = 20
DEFAULT_ENUMERATION_N = 12


def resolve_workers(workers):
    if workers in (None, "auto"):
        return os.cpu_count() or 1
    w = int(workers)
    if w < 1:
        raise ConfigError("workers must be >= 1 or 'auto'")
    return w


@dataclass
class ExperimentConfig:
    curve: object
    metric: object
    n: int
    M: int
    t_grid: tuple
    master_seed: int = 42
    frame_method: str = "rmf"
    quadrature_order: int = DEFAULT_QUADRATURE_ORDER
    workers: object = 1
    cost_cap: float = DEFAULT_COST_CAP

    def __post_init__(self):
        self.t_grid = tuple(float(t) for t in self.t_grid)
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.M < 1:
            raise ConfigError("M must be >= 1")
        t = np.asarray(self.t_grid)
        if t.size == 0 or np.any(t <= 0.0) or np.any(t > 1.0) or np.any(np.diff(t) <= 0):
            raise ConfigError("t_grid must be sorted, distinct and within (0, 1]")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        resolve_workers(self.workers)

    def describe(self):
        return {"curve": self.curve.describe(), "metric": self.metric.describe(),
                "n": self.n, "M": self.M, "t_grid": list(self.t_grid),
                "master_seed": int(self.master_seed), "frame_method": self.frame_method,
                "quadrature_order": self.quadrature_order}


@dataclass
class Ensemble:
    """``samples[j, i]`` is ``D_n(t_i)`` for sample ``j``."""

    config: ExperimentConfig
    samples: np.ndarray
    seeds: np.ndarray
    wall_time: float = field(default=0.0, compare=False)


def build_geometry(config):
    nodes, _ = twist_nodes(config.n, config.quadrature_order)
    frames = frame_field(config.curve, nodes, config.frame_method)
    return TwistGeometry.build(config.curve, config.metric, frames, config.n,
                               config.quadrature_order)


def run_ensemble(config, signs=None, geometry=None):
    """Scaled differences of ``M`` independent random twists.

    Sample ``j`` uses the signs of the counter-based stream keyed by
    ``derive_seed(master_seed, j)``. ``signs`` (an ``(M, n)`` array of
    +-1) replaces the random draws; it exists for tests and enumeration.
    Samples are processed in fixed chunks written into preallocated slots,
    so the output is bitwise independent of ``workers``.
    """
    cost = float(config.n) * config.M * config.quadrature_order
    if cost > config.cost_cap:
        raise ResourceBudgetExceeded(
            f"n*M*q = {cost:.3g} exceeds the cost cap {config.cost_cap:.3g}")
    start = time.perf_counter()
    geom = geometry if geometry is not None else build_geometry(config)
    seeds = np.array([rng.derive_seed(config.master_seed, j) for j in range(config.M)],
                     dtype=np.uint64)
    if signs is not None:
        signs = np.asarray(signs)
        if signs.shape != (config.M, config.n):
            raise ConfigError(f"forced signs need shape {(config.M, config.n)}")
    out = np.empty((config.M, len(config.t_grid), 3))

    def work(lo):
        hi = min(lo + CHUNK, config.M)
        if signs is None:
            X = np.stack([rng.rademacher(int(s), config.n) for s in seeds[lo:hi]])
        else:
            X = signs[lo:hi]
        out[lo:hi] = scaled_difference_batch(geom, X, config.t_grid)

    chunks = range(0, config.M, CHUNK)
    workers = resolve_workers(config.workers)
    if workers == 1:
        for lo in chunks:
            work(lo)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, chunks))
    return Ensemble(config, out, seeds, time.perf_counter() - start)


def all_sign_sequences(n):
    """All ``2^n`` sign rows; row ``j`` has ``-1`` exactly where bit ``k`` of ``j`` is set."""
    j = np.arange(2 ** n, dtype=np.int64)[:, None]
    bits = (j >> np.arange(n)[None, :]) & 1
    return (1 - 2 * bits).astype(np.int8)


@dataclass
class ExactLaw:
    """All ``2^n`` equally likely outcomes of ``D_n`` on ``t_grid``."""

    n: int
    t_grid: tuple
    outcomes: np.ndarray
    weight: float
    mean: np.ndarray
    covariance: np.ndarray


def enumerate_exact(curve, metric, n, t_grid, frame_method="rmf",
                    quadrature_order=DEFAULT_QUADRATURE_ORDER, geometry=None):
    """Evaluate ``D_n`` on every sign sequence (``n <= 20``)."""
    if n > ENUMERATION_CAP:
        raise TooLarge(f"enumeration of 2^{n} paths exceeds the cap 2^{ENUMERATION_CAP}")
    if n < 1:
        raise ConfigError("n must be >= 1")
    config = ExperimentConfig(curve, metric, n, 2 ** n, t_grid, 0, frame_method,
                              quadrature_order, cost_cap=float("inf"))
    ens = run_ensemble(config, signs=all_sign_sequences(n), geometry=geometry)
    mom = empirical_moments(ens.samples, ddof=0)
    mean, cov = mom.mean, mom.covariance
    return ExactLaw(n, config.t_grid, ens.samples, 2.0 ** -n, mean, cov)
