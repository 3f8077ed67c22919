"""Twin-experiment orchestration and convergence sweeps.

``run_experiment`` generates (or loads) truth and measurements, runs every
selected filter over the same data with paired random streams, and writes
the run record.  ``convergence_sweep`` estimates empirical convergence
orders in ensemble size or step length, against the exact linear-Gaussian
oracle where available and a high-resolution self-reference otherwise.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .benchmarks import kalman_oracle
from .core import FilterConfig, enks_step, make_initial_state
from .enkf import EnkfConfig, EnkfState, enkf_step
from .errors import NumericFailure
from .iterative import AnnealingSchedule, make_schedule, iterative_enks_step
from .models import MeasurementSeries
from .problems import PROBLEM_IDS, Problem, build_problem
from .record import RunRecord, emit_csv, emit_linechart, emit_summary
from .rng import (FORCING_STREAM, INIT_ENSEMBLE_STREAM, MEASUREMENT_STREAM,
                  PERTURBATION_STREAM, TRUTH_STREAM, RngStream,
                  particle_streams)
from .sde import simulate_truth, synth_measurements

FILTER_KINDS = ("enks", "enks-iter", "enkf")


@dataclass
class ExperimentConfig:
    """Run-level configuration; None fields fall back to problem defaults."""

    problem: str
    filters: tuple = ("enks",)
    N: Optional[int] = None
    dt: Optional[float] = None
    alpha: float = 0.8
    kappa: int = 10
    seed: int = 0
    horizon: Optional[float] = None
    out_dir: str = "runs"
    proc_noise: Optional[float] = None
    meas_noise_std: Optional[float] = None
    param_diffusion: float = 0.01
    init_spread_scale: float = 1.0
    time_origin: str = "step"
    tracked_channels: Optional[tuple] = None
    emit_outputs: bool = True

    def __post_init__(self):
        if self.problem not in PROBLEM_IDS:
            raise ValueError(f"unknown problem id '{self.problem}' "
                             f"(expected one of {', '.join(PROBLEM_IDS)})")
        self.filters = tuple(self.filters)
        for f in self.filters:
            if f not in FILTER_KINDS:
                raise ValueError(f"unknown filter '{f}' "
                                 f"(expected one of {', '.join(FILTER_KINDS)})")
        if not self.filters:
            raise ValueError("at least one filter must be selected")
        if self.N is not None and self.N < 2:
            raise ValueError("N must be >= 2")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly inside (0, 1)")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.horizon is not None and self.horizon <= 0:
            raise ValueError("horizon must be positive")


@dataclass
class ConvergenceReport:
    """Sweep outcome: per-value error statistics and the fitted power law."""

    variable: str
    values: np.ndarray
    errors: np.ndarray  # (len(values), repeats)
    slope: float
    intercept: float

    @property
    def mean_errors(self) -> np.ndarray:
        return self.errors.mean(axis=1)

    @property
    def std_errors(self) -> np.ndarray:
        return self.errors.std(axis=1, ddof=1)


def _resolve(cfg: ExperimentConfig) -> tuple[Problem, int, float, float]:
    xi = float(RngStream(cfg.seed, FORCING_STREAM).standard_normal())
    problem = build_problem(cfg.problem, xi=xi, dt=cfg.dt,
                            param_diffusion=cfg.param_diffusion,
                            proc_noise=cfg.proc_noise,
                            meas_noise_std=cfg.meas_noise_std,
                            init_spread_scale=cfg.init_spread_scale)
    N = cfg.N if cfg.N is not None else problem.default_N
    dt = cfg.dt if cfg.dt is not None else problem.default_dt
    horizon = cfg.horizon if cfg.horizon is not None else problem.default_horizon
    return problem, N, dt, horizon


def make_twin_data(cfg: ExperimentConfig
                   ) -> tuple[Problem, np.ndarray, MeasurementSeries, np.ndarray]:
    """Simulate truth and synthesize measurements for a configuration.

    Returns the finalized problem (measurement noise resolved), the truth
    trajectory (n, M), the measurement series, and the time grid.
    """
    problem, N, dt, horizon = _resolve(cfg)
    M = int(round(horizon / dt))
    if M < 1:
        raise ValueError("horizon shorter than one step")
    grid = dt * np.arange(1, M + 1)

    truth_stream = RngStream(cfg.seed, TRUTH_STREAM)
    if problem.x0_truth is None:  # linear-Gaussian: draw truth from the prior
        spec = problem.kalman_spec
        chol = np.linalg.cholesky(spec.x0_cov)
        x0 = spec.x0_mean + chol @ truth_stream.standard_normal(spec.n)
    else:
        x0 = problem.x0_truth
    truth = simulate_truth(problem.proc_truth, x0, grid, truth_stream)

    if problem.noise_std is None:
        clean = np.column_stack([problem.meas.h(truth[:, i], t)
                                 for i, t in enumerate(grid)])
        sig = clean.std(axis=1)
        noise_std = np.maximum(0.01 * sig, 1e-12)
        problem = problem.with_noise_std(noise_std, dt)
    else:
        noise_std = np.broadcast_to(np.asarray(problem.noise_std, dtype=float),
                                    (problem.meas.q,))
        problem = problem.with_noise_std(noise_std, dt)

    series = synth_measurements(problem.meas, truth, grid,
                                RngStream(cfg.seed, MEASUREMENT_STREAM),
                                problem.noise_std)
    return problem, truth, series, grid


def initial_ensemble(problem: Problem, N: int, seed: int) -> np.ndarray:
    """Gaussian ensemble around the problem's prior guess."""
    stream = RngStream(seed, INIT_ENSEMBLE_STREAM)
    n = problem.init_mean.size
    return (problem.init_mean[:, None]
            + problem.init_spread[:, None] * stream.standard_normal((n, N)))


def run_filter_series(kind: str, problem: Problem, series: MeasurementSeries,
                      ens0: np.ndarray, cfg: FilterConfig,
                      schedule: Optional[AnnealingSchedule] = None,
                      collect_traces: bool = False, streams=None):
    """Run one filter over a measurement series.

    Returns ``(means, stds, extra)`` where ``means``/``stds`` are (n, M)
    and ``extra`` is a list of per-step IterationTrace objects for
    "enks-iter" when ``collect_traces`` is set, else None.  ``streams``
    defaults to the per-particle substreams of ``cfg.seed``.
    """
    n, N = ens0.shape
    M = len(series)
    means = np.empty((n, M))
    stds = np.empty((n, M))
    if streams is None:
        streams = particle_streams(cfg.seed, N)
    extra = [] if collect_traces else None

    if kind == "enkf":
        R = np.diag(np.asarray(problem.noise_std, dtype=float) ** 2)
        enkf_cfg = EnkfConfig(N=N, R=R, seed=cfg.seed)
        perturb = RngStream(cfg.seed, PERTURBATION_STREAM)
        state = EnkfState(t_curr=0.0, ensemble=ens0.copy())
        for i in range(M):
            state = enkf_step(state, problem.proc_filter, problem.meas,
                              series.values[:, i], enkf_cfg, streams, perturb,
                              cfg.dt)
            means[:, i] = state.ensemble.mean(axis=1)
            stds[:, i] = state.ensemble.std(axis=1, ddof=1)
        return means, stds, extra

    state = make_initial_state(ens0.copy(), problem.meas, t0=0.0)
    if kind == "enks":
        for i in range(M):
            state = enks_step(state, problem.proc_filter, problem.meas,
                              series.values[:, i], cfg, streams)
            means[:, i] = state.ensemble.mean(axis=1)
            stds[:, i] = state.ensemble.std(axis=1, ddof=1)
        return means, stds, extra
    if kind == "enks-iter":
        if schedule is None:
            raise ValueError("enks-iter needs an annealing schedule")
        for i in range(M):
            state, trace = iterative_enks_step(state, problem.proc_filter,
                                               problem.meas,
                                               series.values[:, i], cfg,
                                               streams, schedule)
            if collect_traces:
                extra.append(trace)
            means[:, i] = state.ensemble.mean(axis=1)
            stds[:, i] = state.ensemble.std(axis=1, ddof=1)
        return means, stds, extra
    raise ValueError(f"unknown filter kind '{kind}'")


def run_experiment(cfg: ExperimentConfig,
                   data: Optional[tuple] = None) -> RunRecord:
    """Full twin experiment: data, filters, record, and artifacts.

    ``data`` optionally supplies a previously persisted dataset as
    ``(truth, series, noise_std)`` (for instance loaded from a
    ``simulate`` invocation); the models are still rebuilt from the
    configuration, so the seed must match the one that generated the
    data for the forcing input to agree.
    """
    t_start = time.perf_counter()
    problem, N, dt, horizon = _resolve(cfg)
    if data is None:
        problem, truth, series, grid = make_twin_data(cfg)
    else:
        truth, series, noise_std = data
        truth = np.atleast_2d(np.asarray(truth, dtype=float))
        noise_std = np.broadcast_to(np.asarray(noise_std, dtype=float),
                                    (problem.meas.q,))
        problem = problem.with_noise_std(noise_std, dt)
        grid = series.times
        if truth.shape != (problem.proc_truth.n, len(series)):
            raise ValueError("loaded truth shape does not match the problem")

    fcfg = FilterConfig(N=N, dt=dt, alpha=cfg.alpha, seed=cfg.seed,
                        param_diffusion=cfg.param_diffusion,
                        time_origin=cfg.time_origin)
    schedule = make_schedule(cfg.kappa)
    ens0 = initial_ensemble(problem, N, cfg.seed)

    filter_means, filter_stds = {}, {}
    for kind in cfg.filters:
        means, stds, _ = run_filter_series(kind, problem, series, ens0, fcfg,
                                           schedule=schedule)
        filter_means[kind] = means
        filter_stds[kind] = stds

    record = RunRecord(steps=np.arange(1, len(series) + 1), times=grid,
                       truth=truth, filter_means=filter_means,
                       filter_stds=filter_stds, seed=cfg.seed,
                       wall_time=time.perf_counter() - t_start,
                       channel_names=problem.channel_names)
    if cfg.emit_outputs:
        out = Path(cfg.out_dir)
        emit_csv(record, out / f"{cfg.problem}_rows.csv")
        emit_summary(record, out / f"{cfg.problem}_summary.csv")
        tracked = cfg.tracked_channels
        if tracked is None:
            tracked = tuple(range(min(record.n_channels, 4)))
        for c in tracked:
            emit_linechart(record, [c], out / f"{cfg.problem}_ch{c}.svg")
    return record


# ---------------------------------------------------------------------------
# convergence sweeps
# ---------------------------------------------------------------------------

def _deviation(a: np.ndarray, b: np.ndarray) -> float:
    """Channel-averaged, time-averaged absolute deviation."""
    return float(np.mean(np.abs(a - b)))


def convergence_sweep(cfg: ExperimentConfig, variable: str, values: Sequence,
                      repeats: int,
                      error_fn: Optional[Callable[[float, int], float]] = None,
                      ref_factor: int = 10) -> ConvergenceReport:
    """Estimate the empirical convergence order in N or dt.

    For the linear-Gaussian problem errors are measured against the exact
    Kalman means; dt sweeps share one fine-grid truth path and one
    measurement-noise panel across resolutions (common random numbers) and
    reference the filter's own run at ``min(values) / ref_factor``.
    ``error_fn`` is a test hook: when given, it supplies the error for
    each (value, repeat) pair directly and no simulation runs.
    """
    if variable not in ("N", "dt"):
        raise ValueError("variable must be 'N' or 'dt'")
    values = list(values)
    if len(values) < 3:
        raise ValueError("need at least 3 sweep values")
    if repeats < 5:
        raise ValueError("need at least 5 repeats")
    kind = cfg.filters[0]

    errors = np.empty((len(values), repeats))
    if error_fn is not None:
        for i, v in enumerate(values):
            for r in range(repeats):
                errors[i, r] = error_fn(v, r)
    elif variable == "N":
        for r in range(repeats):
            run_cfg = ExperimentConfig(**{**cfg.__dict__, "seed": cfg.seed + r,
                                          "emit_outputs": False})
            problem, truth, series, grid = make_twin_data(run_cfg)
            _, N_def, dt, _ = _resolve(run_cfg)
            if problem.kalman_spec is not None:
                ref_means, _ = kalman_oracle(problem.kalman_spec, series, dt)
            else:
                ref_means = _run_one(problem, series, 16 * int(max(values)), dt,
                                     run_cfg, kind)
            for i, N in enumerate(values):
                means = _run_one(problem, series, int(N), dt, run_cfg, kind)
                errors[i, r] = _deviation(means, ref_means)
    else:
        dt_ref = min(values) / ref_factor
        for i, dt_v in enumerate(values):
            ratio = dt_v / dt_ref
            if abs(ratio - round(ratio)) > 1e-9:
                raise ValueError(f"dt={dt_v} is not a multiple of the "
                                 f"reference step {dt_ref}")
        for r in range(repeats):
            run_cfg = ExperimentConfig(**{**cfg.__dict__, "seed": cfg.seed + r,
                                          "emit_outputs": False})
            per_dt = _dt_sweep_errors(run_cfg, values, dt_ref, kind)
            errors[:, r] = per_dt
    mean_err = errors.mean(axis=1)
    if np.any(mean_err <= 0) or not np.isfinite(mean_err).all():
        raise NumericFailure("sweep produced non-positive or non-finite errors")
    slope, intercept = np.polyfit(np.log(np.asarray(values, dtype=float)),
                                  np.log(mean_err), 1)
    return ConvergenceReport(variable=variable,
                             values=np.asarray(values, dtype=float),
                             errors=errors, slope=float(slope),
                             intercept=float(intercept))


def _run_one(problem: Problem, series: MeasurementSeries, N: int, dt: float,
             cfg: ExperimentConfig, kind: str) -> np.ndarray:
    fcfg = FilterConfig(N=N, dt=dt, alpha=cfg.alpha, seed=cfg.seed,
                        param_diffusion=cfg.param_diffusion,
                        time_origin=cfg.time_origin)
    ens0 = initial_ensemble(problem, N, cfg.seed)
    means, _, _ = run_filter_series(kind, problem, series, ens0, fcfg,
                                    schedule=make_schedule(cfg.kappa))
    return means


class _NestedIncrementStream:
    """Per-particle stream whose draws aggregate a fine Brownian path.

    Each ``standard_normal(m)`` call consumes ``stride`` fine-grid draws
    from the particle's base stream and returns their scaled sum, so runs
    at different step lengths integrate the *same* underlying Brownian
    path: the requirement for measuring a strong convergence order.
    """

    def __init__(self, base: RngStream, stride: int):
        self.base = base
        self.stride = stride

    def standard_normal(self, size=None):
        m = 1 if size is None else int(size)
        block = self.base.standard_normal((self.stride, m))
        out = block.sum(axis=0) / np.sqrt(self.stride)
        return out if size is not None else float(out[0])


def _dt_sweep_errors(cfg: ExperimentConfig, values: Sequence[float],
                     dt_ref: float, kind: str) -> np.ndarray:
    """Errors of coarse-step runs against the fine-step self-reference.

    One fine-grid truth path, one measurement-noise panel, one initial
    ensemble, and one Brownian path per particle are shared by every
    resolution; coarser grids aggregate increments and subsample data,
    so the deviation isolates the step-size effect.
    """
    problem, N, _, horizon = _resolve(cfg)
    M_ref = int(round(horizon / dt_ref))
    fine_grid = dt_ref * np.arange(1, M_ref + 1)
    truth_stream = RngStream(cfg.seed, TRUTH_STREAM)
    if problem.x0_truth is None:
        spec = problem.kalman_spec
        chol = np.linalg.cholesky(spec.x0_cov)
        x0 = spec.x0_mean + chol @ truth_stream.standard_normal(spec.n)
    else:
        x0 = problem.x0_truth
    truth_fine = simulate_truth(problem.proc_truth, x0, fine_grid, truth_stream)

    if problem.noise_std is None:
        raise ValueError("dt sweeps need a problem with explicit noise_std")
    noise_std = np.broadcast_to(np.asarray(problem.noise_std, dtype=float),
                                (problem.meas.q,))
    eps_fine = noise_std[:, None] * RngStream(
        cfg.seed, MEASUREMENT_STREAM).standard_normal((problem.meas.q, M_ref))

    def run_at(dt_v: float) -> np.ndarray:
        stride = int(round(dt_v / dt_ref))
        idx = np.arange(stride - 1, M_ref, stride)
        grid = fine_grid[idx]
        prob_dt = problem.with_noise_std(noise_std, dt_v)
        clean = np.column_stack([prob_dt.meas.h(truth_fine[:, k], fine_grid[k])
                                 for k in idx])
        series = MeasurementSeries(times=grid, values=clean + eps_fine[:, idx])
        nested = [_NestedIncrementStream(s, stride)
                  for s in particle_streams(cfg.seed, N)]
        return run_filter_series(kind, prob_dt, series,
                                 initial_ensemble(prob_dt, N, cfg.seed),
                                 FilterConfig(N=N, dt=dt_v, alpha=cfg.alpha,
                                              seed=cfg.seed,
                                              param_diffusion=cfg.param_diffusion,
                                              time_origin=cfg.time_origin),
                                 schedule=make_schedule(cfg.kappa),
                                 streams=nested)[0], idx

    means_ref, _ = run_at(dt_ref)
    errs = np.empty(len(values))
    for i, dt_v in enumerate(values):
        means_dt, idx = run_at(dt_v)
        errs[i] = _deviation(means_dt, means_ref[:, idx])
    return errs
