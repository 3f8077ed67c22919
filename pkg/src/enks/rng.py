"""Reproducible counter-based random-number streams.

Every source of randomness in the package draws from an ``RngStream``, a
thin wrapper around numpy's Philox counter-based bit generator keyed by
``(seed, stream_id)``.  Streams with distinct keys are statistically
independent, and a stream recreated from the same key replays the exact
same sequence, so runs are bit-reproducible regardless of how work is
distributed over workers: each particle (or purpose) owns its key and
consumes only its own stream.

Purpose ids reserve a block of stream ids well away from the per-particle
block so that adding particles never collides with harness-level draws.
"""

from __future__ import annotations

import numpy as np

# Stream-id layout: low ids are harness purposes, particle substreams
# start at PARTICLE_BASE + particle index.
TRUTH_STREAM = 0
MEASUREMENT_STREAM = 1
INIT_ENSEMBLE_STREAM = 2
FORCING_STREAM = 3
PERTURBATION_STREAM = 4
PARTICLE_BASE = 1 << 20


class RngStream:
    """One independent, replayable stream of standard normals.

    Parameters
    ----------
    seed : int
        64-bit run seed shared by all streams of a run.
    stream_id : int
        64-bit substream index (purpose id or particle index).
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be nonnegative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def standard_normal(self, size=None) -> np.ndarray:
        """Draw iid N(0, 1) variates, advancing the stream counter."""
        return self._gen.standard_normal(size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def particle_streams(seed: int, n_particles: int) -> list[RngStream]:
    """Per-particle substreams keyed by (seed, PARTICLE_BASE + j)."""
    return [RngStream(seed, PARTICLE_BASE + j) for j in range(n_particles)]


def brownian_increments(stream: RngStream, m: int, dt: float) -> np.ndarray:
    """Sample one Brownian increment vector over a step of length ``dt``.

    Parameters
    ----------
    stream : RngStream
        Stream to consume; the call advances its counter.
    m : int
        Brownian dimension.
    dt : float
        Step length, strictly positive.

    Returns
    -------
    ndarray, shape (m,)
        m independent N(0, dt) draws.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if m < 0:
        raise ValueError(f"m must be nonnegative, got {m}")
    return np.sqrt(dt) * stream.standard_normal(m)
