"""Process and measurement model containers.

The state is filtered as an ensemble: an ``(n, N)`` array whose columns
are particles.  Models carry plain callables plus the dimension metadata
the integrators and filters need.  Optional vectorized callables
(``drift_ensemble`` / ``h_ensemble``) take a whole ``(n, N)`` ensemble at
once; when absent the column-wise fallbacks are used.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


def validate_ensemble(ens: np.ndarray, n: Optional[int] = None) -> np.ndarray:
    """Check an ensemble array: 2-d, N >= 2 columns, finite entries."""
    ens = np.asarray(ens, dtype=float)
    if ens.ndim != 2:
        raise ValueError(f"ensemble must be 2-d (n, N), got shape {ens.shape}")
    if ens.shape[1] < 2:
        raise ValueError(f"ensemble needs at least 2 particles, got {ens.shape[1]}")
    if n is not None and ens.shape[0] != n:
        raise ValueError(f"ensemble has {ens.shape[0]} rows, model expects {n}")
    if not np.isfinite(ens).all():
        raise ValueError("ensemble contains non-finite entries")
    return ens


@dataclass
class ProcessModel:
    """Ito process dx = b(x, t) dt + f(x, t) dB.

    Parameters
    ----------
    n : int
        State dimension.
    m : int
        Brownian dimension.
    drift : callable
        ``b(x, t) -> (n,)`` for a single state vector.
    diffusion : callable
        ``f(x, t) -> (n, m)`` for a single state vector.
    drift_ensemble : callable, optional
        Vectorized drift ``B(X, t) -> (n, N)`` over an ensemble.
    constant_diffusion : ndarray, optional
        ``(n, m)`` matrix when f does not depend on state or time; enables
        the vectorized prediction path.
    """

    n: int
    m: int
    drift: Callable[[np.ndarray, float], np.ndarray]
    diffusion: Callable[[np.ndarray, float], np.ndarray]
    drift_ensemble: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    constant_diffusion: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.n < 1 or self.m < 0:
            raise ValueError("need n >= 1 and m >= 0")
        if self.constant_diffusion is not None:
            F = np.asarray(self.constant_diffusion, dtype=float)
            if F.shape != (self.n, self.m):
                raise ValueError(
                    f"constant_diffusion shape {F.shape} != ({self.n}, {self.m})")
            self.constant_diffusion = F


@dataclass
class MeasurementModel:
    """Measurement map Y = h(X, t) + noise with scaled intensity.

    ``nu`` is the (time-constant) measurement-noise intensity of the
    underlying Brownian noise; the scaled intensity entering the filter
    denominator is ``sigma = nu * dt_scale``.

    Parameters
    ----------
    q : int
        Measurement dimension.
    h : callable
        ``h(x, t) -> (q,)`` for a single state vector.
    nu : ndarray
        ``(q, q)`` noise intensity matrix.
    dt_scale : float
        Step length used to scale the intensity, sigma = nu * dt_scale.
    h_ensemble : callable, optional
        Vectorized map ``H(X, t) -> (q, N)`` over an ensemble.
    """

    q: int
    h: Callable[[np.ndarray, float], np.ndarray]
    nu: np.ndarray
    dt_scale: float
    h_ensemble: Optional[Callable[[np.ndarray, float], np.ndarray]] = None

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.dt_scale <= 0:
            raise ValueError("dt_scale must be positive")
        nu = np.atleast_2d(np.asarray(self.nu, dtype=float))
        if nu.shape != (self.q, self.q):
            raise ValueError(f"nu shape {nu.shape} != ({self.q}, {self.q})")
        self.nu = nu

    @property
    def sigma(self) -> np.ndarray:
        """Scaled noise intensity sigma = nu * dt_scale."""
        return self.nu * self.dt_scale

    @property
    def sigma_gram(self) -> np.ndarray:
        """sigma^T sigma, the squared scaled intensity in the blend."""
        s = self.sigma
        return s.T @ s

    def evaluate(self, ens: np.ndarray, t: float) -> np.ndarray:
        """h applied column-wise to an ensemble, shape (q, N)."""
        if self.h_ensemble is not None:
            out = np.asarray(self.h_ensemble(ens, t), dtype=float)
        else:
            out = np.empty((self.q, ens.shape[1]))
            for j in range(ens.shape[1]):
                out[:, j] = np.asarray(self.h(ens[:, j], t), dtype=float).reshape(self.q)
        if out.shape != (self.q, ens.shape[1]):
            raise ValueError(f"h returned shape {out.shape}, expected {(self.q, ens.shape[1])}")
        return out


@dataclass
class MeasurementSeries:
    """Observed measurements on a strictly increasing time grid.

    ``values`` has shape ``(q, M)`` with column i observed at ``times[i]``.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.times.ndim != 1:
            raise ValueError("times must be 1-d")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.values.shape[1] != self.times.size:
            raise ValueError(
                f"values has {self.values.shape[1]} columns for {self.times.size} times")

    def __len__(self):
        return self.times.size
