"""Problem registry: turns a problem id plus overrides into a twin experiment.

Each entry knows how to build the truth model (parameters frozen), the
filter model (parameter channels diffusing), the measurement map, the
truth initial condition, and the initial-ensemble prior.  Frame and
oscillator measurement noise defaults to 1% of the per-channel standard
deviation of the noise-free measurement signal, computed from the truth
trajectory, so it is resolved by the harness after truth simulation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import benchmarks as bm
from .models import MeasurementModel, ProcessModel

PROBLEM_IDS = ("frame50", "frame20-damaged", "frame4-damaged", "pendulum",
               "population", "linear-gaussian")

RELATIVE_NOISE_FRACTION = 0.01  # "low intensity" measurement noise rule


@dataclass
class Problem:
    """Everything a twin experiment needs besides run-level config."""

    name: str
    proc_truth: ProcessModel
    proc_filter: ProcessModel
    meas: MeasurementModel
    x0_truth: np.ndarray
    init_mean: np.ndarray
    init_spread: np.ndarray
    channel_names: list
    # noise_std is per measurement channel; None means "1% of signal std",
    # resolved by the harness once the truth trajectory exists.
    noise_std: Optional[np.ndarray]
    kalman_spec: Optional[bm.LinearGaussianSpec] = None
    default_N: int = 1000
    default_dt: float = 0.01
    default_horizon: float = 5.0

    def with_noise_std(self, noise_std: np.ndarray, dt: float) -> "Problem":
        """Finalize the measurement model for a resolved noise level."""
        meas = replace(self.meas, nu=bm.nu_from_noise_std(noise_std, dt),
                       dt_scale=dt)
        out = replace(self, meas=meas)
        out.noise_std = np.asarray(noise_std, dtype=float)
        return out


def _frame_problem(name, dof, damaged_storey=None, damaged_k=98.0,
                   proc_noise=5.0, param_diffusion=0.01, xi=1.0, dt=0.01,
                   N=800, horizon=5.0, meas_noise_std=None,
                   k_init_spread=5.0, c_init_spread=0.5,
                   state_init_spread=0.01):
    spec = bm.default_frame_spec(dof, proc_noise=proc_noise)
    build = dict(xi=xi, param_diffusion=param_diffusion, dt=dt,
                 meas_noise_std=1.0 if meas_noise_std is None else meas_noise_std)
    if damaged_storey is None:
        truth_spec = spec
        proc_f, meas = bm.build_shear_frame(spec, **build)
    else:
        k_ref = list(spec.k_ref)
        k_ref[damaged_storey - 1] = damaged_k
        truth_spec = bm.ShearFrameSpec(dof=dof, k_ref=tuple(k_ref),
                                       c_ref=spec.c_ref,
                                       proc_noise=spec.proc_noise)
        proc_f, meas = bm.build_damaged_frame(spec, damaged_storey=damaged_storey,
                                              damaged_k=damaged_k, **build)
    # truth: damaged reference parameters, frozen (no parameter diffusion)
    truth_build = dict(build, param_diffusion=0.0)
    proc_t, _ = bm.build_shear_frame(truth_spec, **truth_build)

    init_mean = np.concatenate([np.zeros(2 * dof), np.full(dof, 100.0),
                                np.full(dof, 5.0)])
    init_spread = np.concatenate([np.full(2 * dof, state_init_spread),
                                  np.full(dof, k_init_spread),
                                  np.full(dof, c_init_spread)])
    names = ([f"u{i+1}" for i in range(dof)] + [f"v{i+1}" for i in range(dof)]
             + [f"K{i+1}" for i in range(dof)] + [f"C{i+1}" for i in range(dof)])
    return Problem(name=name, proc_truth=proc_t, proc_filter=proc_f, meas=meas,
                   x0_truth=bm.frame_truth_x0(truth_spec),
                   init_mean=init_mean, init_spread=init_spread,
                   channel_names=names, noise_std=meas_noise_std,
                   default_N=N, default_dt=dt, default_horizon=horizon)


def build_problem(problem: str, *, xi: float = 1.0, dt: Optional[float] = None,
                  param_diffusion: float = 0.01,
                  proc_noise: Optional[float] = None,
                  meas_noise_std=None, init_spread_scale: float = 1.0) -> Problem:
    """Assemble the named problem with optional overrides.

    ``xi`` is the forcing randomness drawn once per run (frames and
    oscillator); ``proc_noise`` overrides the problem's process-noise
    intensity; ``meas_noise_std`` pins the measurement noise instead of
    the 1%-of-signal rule.
    """
    if problem == "frame50":
        p = _frame_problem("frame50", 50, xi=xi, dt=dt or 0.01, N=800,
                           proc_noise=5.0 if proc_noise is None else proc_noise,
                           param_diffusion=param_diffusion,
                           meas_noise_std=meas_noise_std)
    elif problem == "frame20-damaged":
        # damage detection wants a long window and modest process noise,
        # otherwise the 2% stiffness deficit stays below the posterior spread
        p = _frame_problem("frame20-damaged", 20, damaged_storey=10,
                           damaged_k=98.0, xi=xi, dt=dt or 0.01, N=300,
                           horizon=20.0,
                           proc_noise=1.0 if proc_noise is None else proc_noise,
                           param_diffusion=param_diffusion,
                           meas_noise_std=meas_noise_std)
    elif problem == "frame4-damaged":
        # desk-scale damage problem; lower process noise keeps the
        # parameter channels identifiable at this size
        p = _frame_problem("frame4-damaged", 4, damaged_storey=3,
                           damaged_k=98.0, xi=xi, dt=dt or 0.01, N=300,
                           horizon=20.0,
                           proc_noise=1.0 if proc_noise is None else proc_noise,
                           param_diffusion=param_diffusion,
                           meas_noise_std=meas_noise_std)
    elif problem == "pendulum":
        spec = bm.PendulumSpec(proc_noise=0.05 if proc_noise is None else proc_noise)
        step = dt or 0.01
        proc_f, meas = bm.build_pendulum(spec, xi=xi,
                                         param_diffusion=param_diffusion,
                                         meas_noise_std=1.0 if meas_noise_std is None
                                         else meas_noise_std, dt=step)
        proc_t, _ = bm.build_pendulum(spec, xi=xi, param_diffusion=0.0,
                                      meas_noise_std=1.0, dt=step)
        p = Problem(name="pendulum", proc_truth=proc_t, proc_filter=proc_f,
                    meas=meas, x0_truth=bm.pendulum_truth_x0(spec),
                    init_mean=np.array([0.0, 0.0, spec.k, spec.c]),
                    init_spread=np.array([0.01, 0.01, 2.0, 0.5]),
                    channel_names=["x", "v", "k", "c"],
                    noise_std=meas_noise_std, default_N=600, default_dt=step,
                    default_horizon=5.0)
    elif problem == "population":
        spec = bm.PopulationSpec(
            proc_noise_std=0.2 if proc_noise is None else proc_noise,
            meas_noise_std=0.1 if meas_noise_std is None else float(
                np.asarray(meas_noise_std).reshape(())),
            dt=dt or 0.1)
        proc, meas = bm.build_population(spec)
        p = Problem(name="population", proc_truth=proc, proc_filter=proc,
                    meas=meas, x0_truth=np.array([spec.x0]),
                    init_mean=np.array([spec.x0]), init_spread=np.array([0.1]),
                    channel_names=["x"],
                    noise_std=np.array([spec.meas_noise_std]),
                    default_N=1000, default_dt=spec.dt, default_horizon=5.0)
    elif problem == "linear-gaussian":
        spec = bm.scalar_linear_gaussian()
        step = dt or 0.01
        proc, meas = bm.build_linear_gaussian(spec, step)
        p = Problem(name="linear-gaussian", proc_truth=proc, proc_filter=proc,
                    meas=meas, x0_truth=None,  # drawn from the prior by the harness
                    init_mean=spec.x0_mean,
                    init_spread=np.sqrt(np.diag(spec.x0_cov)),
                    channel_names=["x"],
                    noise_std=np.sqrt(np.diag(spec.R)), kalman_spec=spec,
                    default_N=2000, default_dt=step, default_horizon=10.0)
    else:
        raise ValueError(f"unknown problem id '{problem}' "
                         f"(expected one of {', '.join(PROBLEM_IDS)})")
    if init_spread_scale != 1.0:
        p.init_spread = p.init_spread * init_spread_scale
    return p
