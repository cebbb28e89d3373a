"""Brownian bridge sampling, path interpolation and Dirichlet rejection.

Bridges are built by midpoint (Levy) bisection on a uniform power-of-two
grid.  The normal draws behind each batch are generated level block by level
block, so sampling at 2*n_steps from the same stream reproduces the n_steps
paths exactly and just refines them (matched-randomness convergence tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import core
from .errors import DomainError

DEFAULT_N_STEPS = 256


@dataclass(frozen=True)
class RngStreamSpec:
    """One independent substream of the master seed.

    Distinct stream_index values give statistically independent streams;
    identical (master_seed, stream_index) reproduce identical draws.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise DomainError("master_seed must be an unsigned 64-bit integer")
        if self.stream_index < 0:
            raise DomainError("stream_index must be >= 0")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=self.master_seed, spawn_key=(self.stream_index,)
        )
        return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class BridgePath:
    """A discretized bridge sample on s_i = i / n_steps."""

    n_steps: int
    values: np.ndarray
    stream_id: RngStreamSpec

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.n_steps + 1,):
            raise DomainError("values must have length n_steps + 1")
        if v[0] != 0.0 or v[-1] != 0.0:
            raise DomainError("bridge endpoints must be exactly 0")
        object.__setattr__(self, "values", v)


def _check_n_steps(n_steps: int):
    if n_steps < 2 or n_steps & (n_steps - 1):
        raise DomainError(
            f"n_steps must be a power of two >= 2 (bisection grid), got {n_steps}"
        )


def sample_normals(
    gen: np.random.Generator, n_paths: int, n_steps: int
) -> np.ndarray:
    """Level-ordered normal draws, shape (n_paths, n_steps - 1).

    Blocks of 1, 2, 4, ... columns are drawn in order, so the first
    n_steps - 1 columns drawn for 2*n_steps coincide with the draws for
    n_steps (bisection refinement at matched randomness).
    """
    _check_n_steps(n_steps)
    blocks = []
    count = 1
    while count < n_steps:
        blocks.append(gen.standard_normal((n_paths, count)))
        count *= 2
    return np.concatenate(blocks, axis=1)


def sample_bridges(
    n_steps: int, n_paths: int, stream: RngStreamSpec
) -> np.ndarray:
    """Batch of bridge samples, shape (n_paths, n_steps + 1)."""
    gen = stream.generator()
    return core.build_bridges(sample_normals(gen, n_paths, n_steps))


def sample_bridge(n_steps: int, stream: RngStreamSpec) -> BridgePath:
    values = sample_bridges(n_steps, 1, stream)[0]
    return BridgePath(n_steps=n_steps, values=values, stream_id=stream)


def path_position(path: BridgePath, eta: float, etap: float, tau: float, s):
    """q(s) = eta + (etap - eta) s + sqrt(tau) gamma(s), linearly
    interpolated between grid points."""
    s_arr = np.asarray(s, dtype=float)
    grid = np.arange(path.n_steps + 1) / path.n_steps
    gamma = np.interp(s_arr, grid, path.values)
    out = eta + (etap - eta) * s_arr + math.sqrt(tau) * gamma
    return float(out) if np.ndim(s) == 0 else out


def bridge_to_paths(gammas: np.ndarray, eta: float, etap: float, tau: float):
    """Vectorized q over the whole grid for a batch of bridges."""
    n = gammas.shape[1] - 1
    s = np.arange(n + 1) / n
    return eta + (etap - eta) * s + math.sqrt(tau) * gammas


@dataclass(frozen=True)
class DirichletResult:
    surviving: np.ndarray  # bridge values of the accepted paths
    acceptance: float
    acceptance_std_error: float
    n_total: int


def dirichlet_filter(
    gammas: np.ndarray, eta: float, etap: float, tau: float
) -> DirichletResult:
    """Keep only paths with min_i q(s_i) > 0 (absorbing boundary at 0).

    The minimum is taken over grid points; the resulting acceptance bias is
    bounded empirically by doubling n_steps.
    """
    if eta <= 0 or etap <= 0:
        raise DomainError("Dirichlet rejection requires eta > 0 and etap > 0")
    q = bridge_to_paths(np.asarray(gammas, dtype=float), eta, etap, tau)
    alive = q.min(axis=1) > 0
    n = len(alive)
    k = int(alive.sum())
    frac = k / n
    se = math.sqrt(max(frac * (1 - frac), 1.0 / n) / n)
    return DirichletResult(
        surviving=np.asarray(gammas)[alive],
        acceptance=frac,
        acceptance_std_error=se,
        n_total=n,
    )
