"""Benchmark problem builders and the exact linear-Gaussian oracle.

Four twin-experiment identification problems (two shear frames, a
nonlinear oscillator with a reaction measurement, and a population
equation) plus a linear-Gaussian problem whose exact conditional moments
come from a Kalman recursion on the EM-discretized model.

Joint state-parameter estimation augments the physical state with the
unknown parameters: parameter channels carry zero drift and, in the
filter model, a small constant diffusion so the ensemble retains spread
in those directions.  Truth models freeze the parameters (zero parameter
diffusion).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import NumericFailure
from .models import MeasurementModel, MeasurementSeries, ProcessModel


def nu_from_noise_std(noise_std, dt: float) -> np.ndarray:
    """Intensity matrix whose Brownian increment over dt has std noise_std.

    A per-sample observation error eps ~ N(0, diag(noise_std^2)) matches a
    Brownian measurement noise of intensity nu = diag(noise_std)/sqrt(dt).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    s = np.atleast_1d(np.asarray(noise_std, dtype=float))
    return np.diag(s) / np.sqrt(dt)


# ---------------------------------------------------------------------------
# shear frames
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShearFrameSpec:
    """Multi-storey shear frame with uncertain stiffness and damping.

    ``measured`` lists the observed velocity channels (0-based storey
    indices); None observes all of them.
    """

    dof: int
    k_ref: tuple
    c_ref: tuple
    forcing_amp: float = 500.0
    proc_noise: float = 5.0
    measured: Optional[tuple] = None

    def __post_init__(self):
        if self.dof < 1:
            raise ValueError("dof must be >= 1")
        if len(self.k_ref) != self.dof or len(self.c_ref) != self.dof:
            raise ValueError("k_ref and c_ref must have one entry per storey")
        if any(k <= 0 for k in self.k_ref) or any(c <= 0 for c in self.c_ref):
            raise ValueError("stiffness and damping parameters must be positive")
        if self.measured is not None:
            if any(i < 0 or i >= self.dof for i in self.measured):
                raise ValueError("measured channel out of range")

    @property
    def measured_channels(self) -> tuple:
        return tuple(range(self.dof)) if self.measured is None else tuple(self.measured)


def default_frame_spec(dof: int, proc_noise: Optional[float] = None) -> ShearFrameSpec:
    """Reference frame: stiffness 100 and damping 5 at every storey."""
    pn = 5.0 if proc_noise is None else proc_noise
    return ShearFrameSpec(dof=dof, k_ref=(100.0,) * dof, c_ref=(5.0,) * dof,
                          proc_noise=pn)


def tridiagonal_stiffness(params: Sequence[float], dof: int) -> np.ndarray:
    """Shear-frame stiffness matrix from per-storey parameters.

    Row i carries the diagonal ``params[i] + params[i+1]`` (just
    ``params[dof-1]`` on the last row) with off-diagonals ``-params[i+1]``;
    the result is symmetric.
    """
    p = np.asarray(params, dtype=float)
    if p.shape != (dof,):
        raise ValueError(f"expected {dof} parameters, got shape {p.shape}")
    if np.any(p <= 0):
        raise ValueError("parameters must be positive")
    K = np.zeros((dof, dof))
    for i in range(dof):
        K[i, i] = p[i] + (p[i + 1] if i + 1 < dof else 0.0)
        if i + 1 < dof:
            K[i, i + 1] = -p[i + 1]
            K[i + 1, i] = -p[i + 1]
    return K


def _storey_chain_apply(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Column-wise tridiagonal product for per-particle parameters.

    Equals ``tridiagonal_stiffness(p[:, j], dof) @ u[:, j]`` per column j,
    written with shifted arrays so no matrices are assembled.
    """
    zero = np.zeros((1, u.shape[1]))
    u_lo = np.vstack([zero, u[:-1]])
    u_hi = np.vstack([u[1:], zero])
    p_hi = np.vstack([p[1:], zero])
    return p * (u - u_lo) + p_hi * (u - u_hi)


def build_shear_frame(spec: ShearFrameSpec, xi: float = 1.0,
                      param_diffusion: float = 0.01,
                      meas_noise_std=1.0, dt: float = 0.01
                      ) -> tuple[ProcessModel, MeasurementModel]:
    """Augmented-state model of a shear frame under known random forcing.

    The state stacks displacements, velocities, stiffness parameters, and
    damping parameters (n = 4 dof).  The drift re-assembles the stiffness
    and damping operators from the *current* parameter channels of each
    particle, which is what makes joint estimation nonlinear.  The
    forcing ``forcing_amp * exp(-t) |xi| cos(5 t)`` acts on every storey,
    with ``xi`` fixed per run and shared by truth and filter.

    Process noise enters the velocity channels at intensity
    ``spec.proc_noise``; parameter channels diffuse at
    ``param_diffusion`` (zero for truth models).
    """
    dof = spec.dof
    n = 4 * dof
    amp = spec.forcing_amp
    xi_mag = abs(xi)

    def drift_ensemble(x, t):
        u, v = x[:dof], x[dof:2 * dof]
        kp, cp = x[2 * dof:3 * dof], x[3 * dof:]
        r = amp * np.exp(-t) * xi_mag * np.cos(5.0 * t)
        out = np.zeros_like(x)
        out[:dof] = v
        out[dof:2 * dof] = r - _storey_chain_apply(cp, v) - _storey_chain_apply(kp, u)
        return out

    def drift(x, t):
        return drift_ensemble(x[:, None], t)[:, 0]

    m = 3 * dof  # velocity noise + parameter random walk
    F = np.zeros((n, m))
    F[dof:2 * dof, :dof] = spec.proc_noise * np.eye(dof)
    F[2 * dof:, dof:] = param_diffusion * np.eye(2 * dof)

    proc = ProcessModel(n=n, m=m, drift=drift,
                        diffusion=lambda x, t: F,
                        drift_ensemble=drift_ensemble,
                        constant_diffusion=F)

    channels = np.asarray(spec.measured_channels, dtype=int)
    q = channels.size

    def h_ensemble(x, t):
        return x[dof + channels]

    meas = MeasurementModel(q=q, h=lambda x, t: x[dof + channels],
                            nu=nu_from_noise_std(np.broadcast_to(
                                np.asarray(meas_noise_std, dtype=float), (q,)), dt),
                            dt_scale=dt, h_ensemble=h_ensemble)
    return proc, meas


def build_damaged_frame(spec: ShearFrameSpec, damaged_storey: int = 10,
                        damaged_k: float = 98.0, **kwargs
                        ) -> tuple[ProcessModel, MeasurementModel]:
    """Shear frame with one storey's reference stiffness lowered.

    ``damaged_storey`` is 1-based.  The returned models embed the damaged
    reference in the spec used for truth simulation.
    """
    if not 1 <= damaged_storey <= spec.dof:
        raise ValueError(f"damaged storey {damaged_storey} outside 1..{spec.dof}")
    if damaged_k <= 0:
        raise ValueError("damaged stiffness must be positive")
    k_ref = list(spec.k_ref)
    k_ref[damaged_storey - 1] = damaged_k
    damaged = ShearFrameSpec(dof=spec.dof, k_ref=tuple(k_ref), c_ref=spec.c_ref,
                             forcing_amp=spec.forcing_amp,
                             proc_noise=spec.proc_noise, measured=spec.measured)
    return build_shear_frame(damaged, **kwargs)


def frame_truth_x0(spec: ShearFrameSpec) -> np.ndarray:
    """Truth initial condition: rest state with reference parameters."""
    return np.concatenate([np.zeros(spec.dof), np.zeros(spec.dof),
                           np.asarray(spec.k_ref, dtype=float),
                           np.asarray(spec.c_ref, dtype=float)])


# ---------------------------------------------------------------------------
# nonlinear oscillator with reaction measurement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PendulumSpec:
    """1-DOF oscillator x'' + c x' + k sin(x) = r(t) + noise.

    Defaults put the response around a third of a radian so the sin
    nonlinearity is visible, off resonance with the 5 rad/s forcing.
    """

    c: float = 2.0
    k: float = 10.0
    forcing_amp: float = 5.0
    forcing_decay: float = 0.01
    proc_noise: float = 0.05

    def __post_init__(self):
        if self.c <= 0 or self.k <= 0:
            raise ValueError("c and k must be positive")


def build_pendulum(spec: PendulumSpec, xi: float = 1.0,
                   param_diffusion: float = 0.01,
                   meas_noise_std=1.0, dt: float = 0.01
                   ) -> tuple[ProcessModel, MeasurementModel]:
    """Augmented model (x, v, k, c) with the base reaction measured.

    The measurement is the reaction transferred at the base,
    ``h = c v + k sin(x)``, nonlinear in both the state and the
    parameters.
    """
    amp, decay = spec.forcing_amp, spec.forcing_decay
    xi_mag = abs(xi)

    def drift_ensemble(x, t):
        pos, vel, kp, cp = x[0], x[1], x[2], x[3]
        r = amp * np.exp(-decay * t) * xi_mag * np.cos(5.0 * t)
        out = np.zeros_like(x)
        out[0] = vel
        out[1] = r - cp * vel - kp * np.sin(pos)
        return out

    def drift(x, t):
        return drift_ensemble(x[:, None], t)[:, 0]

    F = np.zeros((4, 3))
    F[1, 0] = spec.proc_noise
    F[2, 1] = param_diffusion
    F[3, 2] = param_diffusion
    proc = ProcessModel(n=4, m=3, drift=drift, diffusion=lambda x, t: F,
                        drift_ensemble=drift_ensemble, constant_diffusion=F)

    def h_ensemble(x, t):
        return (x[3] * x[1] + x[2] * np.sin(x[0]))[None, :]

    meas = MeasurementModel(
        q=1, h=lambda x, t: np.array([x[3] * x[1] + x[2] * np.sin(x[0])]),
        nu=nu_from_noise_std(meas_noise_std, dt), dt_scale=dt,
        h_ensemble=h_ensemble)
    return proc, meas


def pendulum_truth_x0(spec: PendulumSpec) -> np.ndarray:
    return np.array([0.0, 0.0, spec.k, spec.c])


# ---------------------------------------------------------------------------
# population equation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PopulationSpec:
    """Scalar population equation dX = -r1 (1 - X/r2) X dt + noise.

    States above ``r2`` diverge (super-exponentially: the drift grows
    quadratically), states below decay toward zero, so the twin
    experiment starting at ``x0 = 2.1`` probes an unstable regime.
    """

    r1: float = 1.0
    r2: float = 2.0
    x0: float = 2.1
    proc_noise_std: float = 0.2
    meas_noise_std: float = 0.1
    dt: float = 0.1

    def __post_init__(self):
        if self.r2 <= 0:
            raise ValueError("r2 must be positive")


def build_population(spec: PopulationSpec
                     ) -> tuple[ProcessModel, MeasurementModel]:
    """Scalar model with identity measurement."""
    r1, r2 = spec.r1, spec.r2

    def drift_ensemble(x, t):
        return -r1 * (1.0 - x / r2) * x

    proc = ProcessModel(
        n=1, m=1,
        drift=lambda x, t: -r1 * (1.0 - x / r2) * x,
        diffusion=lambda x, t: np.array([[spec.proc_noise_std]]),
        drift_ensemble=drift_ensemble,
        constant_diffusion=np.array([[spec.proc_noise_std]]))
    meas = MeasurementModel(
        q=1, h=lambda x, t: np.asarray(x, dtype=float).reshape(1),
        nu=nu_from_noise_std(spec.meas_noise_std, spec.dt), dt_scale=spec.dt,
        h_ensemble=lambda x, t: x)
    return proc, meas


# ---------------------------------------------------------------------------
# linear-Gaussian oracle problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearGaussianSpec:
    """dX = A X dt + F dB observed through Y = H X + eps, eps ~ N(0, R)."""

    A: np.ndarray
    F: np.ndarray
    H: np.ndarray
    R: np.ndarray
    x0_mean: np.ndarray
    x0_cov: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        F = np.atleast_2d(np.asarray(self.F, dtype=float))
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("A must be square")
        if F.shape[0] != n:
            raise ValueError("F row count must match A")
        if H.shape[1] != n:
            raise ValueError("H column count must match A")
        if R.shape != (H.shape[0], H.shape[0]):
            raise ValueError("R must be q x q")
        if not np.allclose(R, R.T) or np.any(np.linalg.eigvalsh(R) <= 0):
            raise ValueError("R must be symmetric positive definite")
        x0_mean = np.asarray(self.x0_mean, dtype=float).reshape(n)
        x0_cov = np.atleast_2d(np.asarray(self.x0_cov, dtype=float))
        if x0_cov.shape != (n, n):
            raise ValueError("x0_cov must be n x n")
        for name, val in (("A", A), ("F", F), ("H", H), ("R", R),
                          ("x0_mean", x0_mean), ("x0_cov", x0_cov)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def q(self) -> int:
        return self.H.shape[0]


def scalar_linear_gaussian(A: float = -1.0, F: float = 1.0, H: float = 1.0,
                           R: float = 0.01, x0_mean: float = 0.0,
                           x0_cov: float = 1.0) -> LinearGaussianSpec:
    return LinearGaussianSpec(A=[[A]], F=[[F]], H=[[H]], R=[[R]],
                              x0_mean=[x0_mean], x0_cov=[[x0_cov]])


def build_linear_gaussian(spec: LinearGaussianSpec, dt: float
                          ) -> tuple[ProcessModel, MeasurementModel]:
    A, F, H = spec.A, spec.F, spec.H

    proc = ProcessModel(
        n=spec.n, m=F.shape[1],
        drift=lambda x, t: A @ x,
        diffusion=lambda x, t: F,
        drift_ensemble=lambda x, t: A @ x,
        constant_diffusion=F)
    noise_std = np.sqrt(np.diag(spec.R))
    meas = MeasurementModel(
        q=spec.q, h=lambda x, t: H @ x,
        nu=nu_from_noise_std(noise_std, dt), dt_scale=dt,
        h_ensemble=lambda x, t: H @ x)
    return proc, meas


def kalman_oracle(spec: LinearGaussianSpec, series: MeasurementSeries,
                  dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact posterior moments on the EM-discretized linear model.

    Transition ``I + A dt`` with process covariance ``F F^T dt``; one
    predict/update per measurement time.

    Returns
    -------
    means : ndarray, shape (n, M)
    covs : ndarray, shape (M, n, n)
    """
    n, q = spec.n, spec.q
    a = np.eye(n) + spec.A * dt
    Q = spec.F @ spec.F.T * dt
    H, R = spec.H, spec.R
    m = spec.x0_mean.copy()
    P = spec.x0_cov.copy()
    M = len(series)
    means = np.empty((n, M))
    covs = np.empty((M, n, n))
    for i in range(M):
        m = a @ m
        P = a @ P @ a.T + Q
        S = H @ P @ H.T + R
        try:
            K = np.linalg.solve(S.T, (P @ H.T).T).T
        except np.linalg.LinAlgError as err:
            raise NumericFailure("singular innovation covariance", step=i) from err
        m = m + K @ (series.values[:, i] - H @ m)
        P = (np.eye(n) - K @ H) @ P
        P = 0.5 * (P + P.T)
        means[:, i] = m
        covs[i] = P
    return means, covs
