"""Pure-numpy implementation of the sampling hot loop.

The compiled twin in _core.pyx exposes the same two functions; fkgreen.core
picks whichever is available at import time.  Both consume the same
level-ordered normal draws, so they agree to floating-point roundoff.
"""

from __future__ import annotations

import numpy as np


def build_bridges(normals: np.ndarray) -> np.ndarray:
    """Assemble Brownian bridges on a uniform grid by midpoint bisection.

    normals has shape (n_paths, n_steps - 1) with columns ordered level by
    level: 1 draw for the global midpoint, then 2, 4, ... for the finer
    levels.  Returns the bridge values, shape (n_paths, n_steps + 1), with
    exact zeros in the first and last column.
    """
    n_paths, m = normals.shape
    n = m + 1
    if n & (n - 1):
        raise ValueError(f"n_steps must be a power of two, got {n}")
    gamma = np.zeros((n_paths, n + 1))
    offset = 0
    level = 0
    step = n
    while step > 1:
        half = step // 2
        count = n // step
        mids = np.arange(half, n, step)
        std = 0.5 * 2.0 ** (-0.5 * level)
        gamma[:, mids] = 0.5 * (gamma[:, mids - half] + gamma[:, mids + half]) \
            + std * normals[:, offset:offset + count]
        offset += count
        level += 1
        step = half
    return gamma


def bridge_accumulate(normals, eta, etap, tau, amps, exps, centers,
                      compute_min=False):
    """Per-path midpoint-rule average of the power-law potential along the
    interpolated path q(s) = eta + (etap - eta) s + sqrt(tau) gamma(s).

    Returns (avg, qmin): avg[j] = (1/n) sum_i sum_k a_k |q_mid_i - c_k|^e_k,
    qmin[j] = min over grid points of q (only when compute_min), else None.
    """
    gamma = build_bridges(np.ascontiguousarray(normals))
    n_paths, ncols = gamma.shape
    n = ncols - 1
    s = np.arange(n + 1) / n
    q = eta + (etap - eta) * s + np.sqrt(tau) * gamma
    qmin = q.min(axis=1) if compute_min else None
    qmid = 0.5 * (q[:, :-1] + q[:, 1:])
    avg = np.zeros(n_paths)
    for a, e, c in zip(amps, exps, centers):
        if a == 0.0:
            continue
        if e == 0.0:
            avg += a
        else:
            avg += a * np.mean(np.abs(qmid - c) ** e, axis=1)
    return avg, qmin
