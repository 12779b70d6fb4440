"""Stochastic and deterministic time-steppers.

Reproducibility contract: every stochastic routine takes an explicit
seed.  Ensembles derive one child stream per trajectory from the master
seed via ``numpy.random.SeedSequence.spawn`` (PCG64 generators), so
results are independent of chunking, worker count, and scheduling
order.  Noise increments are Gaussian with variance dt.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .model import Bloch3Params, ModelParams, WeakMeasParams

# Noise is drawn in blocks this large; PCG64 streams are call-size
# invariant so the block size never affects results.
_NOISE_BLOCK = 1 << 20

WORKERS_ENV_VAR = "QTELEGRAPH_WORKERS"


def resolve_workers(n_workers: Optional[int] = None) -> int:
    """Worker count: explicit argument, else QTELEGRAPH_WORKERS, else 1."""
    if n_workers is not None:
        if n_workers < 1:
            raise ValueError(f"n_workers must be >= 1, got {n_workers}")
        return n_workers
    env = os.environ.get(WORKERS_ENV_VAR)
    return max(1, int(env)) if env else 1


def _as_seedseq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled series of the collapse coordinate u3."""

    times: np.ndarray
    values: np.ndarray
    seed: Optional[int]
    params: Optional[ModelParams] = None

    def __post_init__(self):
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have equal length")
        if self.times.size == 0:
            raise ValueError("trajectory must be nonempty")

    @property
    def dt_sample(self) -> float:
        if self.times.size < 2:
            raise ValueError("single-sample trajectory has no spacing")
        return float(self.times[1] - self.times[0])

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def to_csv(self, path) -> None:
        """Write `t,u3` CSV with 17-significant-digit round-trip floats."""
        write_csv(path, "t,u3", np.column_stack([self.times, self.values]))

    def after(self, t_min: float) -> "Trajectory":
        """Sub-trajectory with times >= t_min (burn-in removal)."""
        mask = self.times >= t_min
        if not mask.any():
            raise ValueError(f"no samples at or after t = {t_min}")
        return Trajectory(self.times[mask], self.values[mask],
                          self.seed, self.params)


@dataclass(frozen=True)
class BlochTrajectory:
    """Uniformly sampled three-component (x, y, z) series."""

    times: np.ndarray
    values: np.ndarray  # shape (n, 3)

    def to_csv(self, path) -> None:
        write_csv(path, "t,x,y,z", np.column_stack([self.times, self.values]))


@dataclass(frozen=True)
class EnsembleSummary:
    """Reduction of an ensemble of independent trajectories."""

    n_traj: int
    terminal_values: np.ndarray
    master_seed: int
    times: Optional[np.ndarray] = None
    mean_series: Optional[np.ndarray] = None
    var_series: Optional[np.ndarray] = None
    reduced: object = None

    def __post_init__(self):
        if self.terminal_values.shape != (self.n_traj,):
            raise ValueError("terminal_values length inconsistent with n_traj")
        if self.mean_series is not None and self.times is not None \
                and self.mean_series.shape != self.times.shape:
            raise ValueError("mean_series inconsistent with time grid")


@dataclass(frozen=True)
class CoupledPair:
    """Shifted exact process V = u3 + 1 and its endpoint linearization X.

    Both series share one time grid and one Brownian increment stream.
    After V first leaves [0, delta) the pair is frozen at its exit-time
    values.  exit_time is None if V never exited within the run.
    """

    times: np.ndarray
    v_values: np.ndarray
    x_values: np.ndarray
    delta: float
    exit_time: Optional[float]
    shared_noise: bool = True


@dataclass(frozen=True)
class CoupledGapStats:
    """Ensemble statistics for the exact-vs-linearized gap Y = V - X."""

    delta: float
    n_pairs: int
    mean_exit_time: float
    exit_time_se: float
    n_censored: int
    t_eval: float
    mean_sq_gap: float
    master_seed: int


def write_csv(path, header: str, columns: np.ndarray) -> None:
    """CSV writer used for all delimited output (17-digit round-trip)."""
    np.savetxt(path, columns, fmt="%.17g", delimiter=",", header=header,
               comments="")


def read_trajectory_csv(path) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(data[:, 0], data[:, 1], seed=None)


def em_step(u3: float, params: ModelParams, dw: float) -> float:
    """One Euler-Maruyama step, clamped into [-1, 1].

    dw is the Brownian increment for the step (variance dt when drawn
    internally by the simulators).
    """
    if abs(u3) > 1.0:
        raise ValueError(f"u3 must lie in [-1, 1], got {u3}")
    du = (-(u3 + 1.0) * params.inv_t + params.g * (1.0 - u3)) * params.dt \
        + params.alpha * (1.0 - u3 * u3) * dw
    return min(1.0, max(-1.0, u3 + du))


def _simulate_into(params: ModelParams, u3_0: float, n_steps: int,
                   stride: int, rng: np.random.Generator) -> np.ndarray:
    out = np.empty(n_steps // stride + 1)
    out[0] = u3_0
    sqrt_dt = math.sqrt(params.dt)
    u3 = float(u3_0)
    done = 0
    while done < n_steps:
        m = min(_NOISE_BLOCK, n_steps - done)
        dw = rng.standard_normal(m)
        dw *= sqrt_dt
        u3 = _kernels.em_chunk(u3, params.g, params.inv_t, params.alpha,
                               params.dt, dw, out, stride, done)
        done += m
    return out


def simulate_trajectory(params: ModelParams, u3_0: float, n_steps: int,
                        stride: int = 1, *, seed) -> Trajectory:
    """Euler-Maruyama trajectory of the collapse SDE.

    Gaussian increments with variance dt are drawn from a PCG64 stream
    keyed by ``seed``; identical seeds give bit-identical output.  Every
    stride-th sample is stored, including the initial and final points
    (n_steps must be a multiple of stride).
    """
    if abs(u3_0) > 1.0:
        raise ValueError(f"u3_0 must lie in [-1, 1], got {u3_0}")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if stride < 1 or n_steps % stride != 0:
        raise ValueError("stride must be >= 1 and divide n_steps")
    ss = _as_seedseq(seed)
    rng = np.random.Generator(np.random.PCG64(ss))
    values = _simulate_into(params, u3_0, n_steps, stride, rng)
    times = np.arange(values.size) * (params.dt * stride)
    stored = seed if isinstance(seed, int) else None
    return Trajectory(times, values, stored, params)


# ---------------------------------------------------------------------------
# Ensembles


def _ensemble_task(args):
    params, u3_0, n_steps, record_stride, seedseqs = args
    terminals = np.empty(len(seedseqs))
    series = None
    if record_stride is not None:
        n_pts = n_steps // record_stride + 1
        series = np.empty((len(seedseqs), n_pts))
    for k, ss in enumerate(seedseqs):
        rng = np.random.Generator(np.random.PCG64(ss))
        if record_stride is None:
            sqrt_dt = math.sqrt(params.dt)
            u3 = float(u3_0)
            done = 0
            while done < n_steps:
                m = min(_NOISE_BLOCK, n_steps - done)
                dw = rng.standard_normal(m)
                dw *= sqrt_dt
                u3 = _kernels.em_terminal(u3, params.g, params.inv_t,
                                          params.alpha, params.dt, dw)
                done += m
            terminals[k] = u3
        else:
            out = _simulate_into(params, u3_0, n_steps, record_stride, rng)
            series[k] = out
            terminals[k] = out[-1]
    return terminals, series


def _run_indexed_tasks(task_fn: Callable, task_args: list, n_workers: int):
    """Run tasks preserving index order; inline when single-worker."""
    if n_workers == 1 or len(task_args) == 1:
        return [task_fn(a) for a in task_args]
    # fork start method shares the already-compiled kernels with children
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(task_fn, task_args))


def simulate_ensemble(params: ModelParams, u3_0: float, n_steps: int,
                      n_traj: int, master_seed: int,
                      reducer: Optional[Callable[[np.ndarray], object]] = None,
                      record_stride: Optional[int] = None,
                      n_workers: Optional[int] = None) -> EnsembleSummary:
    """Independent trajectories with per-trajectory spawned RNG streams.

    Trajectory i always uses child stream i of
    SeedSequence(master_seed).spawn(n_traj), so every reduction here is
    invariant to worker count and scheduling.  ``reducer``, if given, is
    applied to the index-ordered terminal-value array.  With
    ``record_stride`` set, mean and variance series over the ensemble
    are computed on the decimated grid.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if abs(u3_0) > 1.0:
        raise ValueError(f"u3_0 must lie in [-1, 1], got {u3_0}")
    if record_stride is not None and (record_stride < 1
                                      or n_steps % record_stride != 0):
        raise ValueError("record_stride must be >= 1 and divide n_steps")
    workers = resolve_workers(n_workers)
    children = np.random.SeedSequence(master_seed).spawn(n_traj)
    n_chunks = min(n_traj, max(workers, 4 * workers if workers > 1 else 1))
    bounds = np.linspace(0, n_traj, n_chunks + 1, dtype=int)
    tasks = [(params, u3_0, n_steps, record_stride,
              children[bounds[i]:bounds[i + 1]])
             for i in range(n_chunks) if bounds[i] < bounds[i + 1]]
    results = _run_indexed_tasks(_ensemble_task, tasks, workers)

    terminals = np.concatenate([r[0] for r in results])
    times = mean_series = var_series = None
    if record_stride is not None:
        stacked = np.vstack([r[1] for r in results])
        times = np.arange(stacked.shape[1]) * (params.dt * record_stride)
        mean_series = stacked.mean(axis=0)
        var_series = stacked.var(axis=0)
    reduced = reducer(terminals) if reducer is not None else None
    return EnsembleSummary(n_traj, terminals, master_seed, times,
                           mean_series, var_series, reduced)


# ---------------------------------------------------------------------------
# Deterministic Bloch system


def simulate_deterministic_bloch(p3: Bloch3Params, u0, n_steps: int,
                                 dt: float, stride: int = 1) -> BlochTrajectory:
    """Fixed-step explicit Euler for the coupled linear Bloch equations."""
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (3,):
        raise ValueError("u0 must be a 3-vector")
    if np.abs(u0).max() > 1.0:
        raise ValueError("u0 components must lie in [-1, 1]")
    if not (dt > 0):
        raise ValueError("dt must be > 0")
    if dt * max(1.0 / p3.t1, 1.0 / p3.t2) >= 1.0:
        raise ValueError("dt too large for explicit-Euler stability")
    if stride < 1 or n_steps % stride != 0:
        raise ValueError("stride must be >= 1 and divide n_steps")
    out = np.empty((n_steps // stride + 1, 3))
    out[0] = u0
    _kernels.bloch_chunk(u0[0], u0[1], u0[2], p3.detuning, p3.rabi,
                         1.0 / p3.t1, 1.0 / p3.t2, dt, n_steps, out,
                         stride, 0)
    times = np.arange(out.shape[0]) * (dt * stride)
    return BlochTrajectory(times, out)


# ---------------------------------------------------------------------------
# Weak-measurement system


def simulate_weak_measurement(wp: WeakMeasParams, noise_scale: float, xyz0,
                              n_steps: int, dt: float, *, seed,
                              stride: int = 1) -> BlochTrajectory:
    """Euler-Maruyama for the three weak-measurement SDEs.

    A single Gaussian increment per step (variance dt) is shared by all
    three equations, scaled by ``noise_scale`` (0 disables the noise and
    leaves the deterministic reduction).  z is clamped to [-1, 1].
    """
    xyz0 = np.asarray(xyz0, dtype=float)
    if xyz0.shape != (3,):
        raise ValueError("xyz0 must be a 3-vector")
    if xyz0 @ xyz0 > 1.0 + 1e-12:
        raise ValueError("initial Bloch vector must satisfy x^2+y^2+z^2 <= 1")
    if noise_scale < 0:
        raise ValueError("noise_scale must be >= 0")
    if not (dt > 0):
        raise ValueError("dt must be > 0")
    if stride < 1 or n_steps % stride != 0:
        raise ValueError("stride must be >= 1 and divide n_steps")
    rng = np.random.Generator(np.random.PCG64(_as_seedseq(seed)))
    out = np.empty((n_steps // stride + 1, 3))
    out[0] = xyz0
    x, y, z = (float(c) for c in xyz0)
    sqrt_dt = math.sqrt(dt)
    inv_tau = 1.0 / wp.tau_m
    sqrt_inv_tau = math.sqrt(inv_tau)
    done = 0
    while done < n_steps:
        m = min(_NOISE_BLOCK, n_steps - done)
        dw = rng.standard_normal(m)
        dw *= sqrt_dt
        x, y, z = _kernels.weak_meas_chunk(x, y, z, inv_tau, sqrt_inv_tau,
                                           wp.tunneling, wp.detuning,
                                           noise_scale, dt, dw, out,
                                           stride, done)
        done += m
    times = np.arange(out.shape[0]) * (dt * stride)
    return BlochTrajectory(times, out)


# ---------------------------------------------------------------------------
# Coupled exact/linearized pair near the lower endpoint


def _check_pair_args(v0: float, delta: float) -> None:
    if not (0.0 < delta <= 0.1):
        raise ValueError(f"delta must lie in (0, 0.1], got {delta}")
    if not (0.0 <= v0 < delta):
        raise ValueError(f"v0 must lie in [0, delta), got {v0}")


def simulate_coupled_pair(params: ModelParams, v0: float, delta: float,
                          n_steps: int, *, seed) -> CoupledPair:
    """Advance V (shifted exact process) and X (linearization) together.

    Identical increments drive both.  The pair freezes when V first
    leaves [0, delta); the recorded series stay constant from then on.
    """
    _check_pair_args(v0, delta)
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    rng = np.random.Generator(np.random.PCG64(_as_seedseq(seed)))
    v_out = np.empty(n_steps + 1)
    x_out = np.empty(n_steps + 1)
    v_out[0] = x_out[0] = v0
    v = x = float(v0)
    sqrt_dt = math.sqrt(params.dt)
    exited = False
    exit_step = -1
    done = 0
    while done < n_steps:
        m = min(_NOISE_BLOCK, n_steps - done)
        dw = rng.standard_normal(m)
        dw *= sqrt_dt
        v, x, step, exited_now = _kernels.coupled_chunk(
            v, x, params.g, params.inv_t, params.alpha, params.dt, dw,
            delta, v_out, x_out, done, exited)
        if exited_now and not exited:
            exit_step = step
        exited = exited or exited_now
        done += m
    times = np.arange(n_steps + 1) * params.dt
    exit_time = exit_step * params.dt if exit_step >= 0 else None
    return CoupledPair(times, v_out, x_out, delta, exit_time)


def _gap_task(args):
    params, v0, delta, max_steps, n_eval, seedseqs = args
    sqrt_dt = math.sqrt(params.dt)
    exit_steps = np.empty(len(seedseqs), dtype=np.int64)
    gaps = np.empty(len(seedseqs)) if n_eval is not None else None
    block = 2048
    for k, ss in enumerate(seedseqs):
        rng = np.random.Generator(np.random.PCG64(ss))
        if n_eval is not None:
            dw = rng.standard_normal(n_eval)
            dw *= sqrt_dt
            v, x, _ = _kernels.coupled_gap_terminal(
                float(v0), float(v0), params.g, params.inv_t, params.alpha,
                params.dt, dw, delta)
            exit_steps[k] = -1
            gaps[k] = (v - x) ** 2
            continue
        # exit-time pass: chunked draws; stream positions are identical
        # to the replay pass because PCG64 draws are call-size invariant
        v = x = float(v0)
        done = 0
        exit_steps[k] = -1
        while done < max_steps:
            m = min(block, max_steps - done)
            dw = rng.standard_normal(m)
            dw *= sqrt_dt
            v, x, step = _kernels.coupled_gap_terminal(
                v, x, params.g, params.inv_t, params.alpha, params.dt,
                dw, delta)
            if step > 0:
                exit_steps[k] = done + step
                break
            done += m
    return exit_steps, gaps


def coupled_gap_ensemble(params: ModelParams, delta: float, n_pairs: int,
                         master_seed: int, v0: float = 0.0,
                         max_steps: Optional[int] = None,
                         n_workers: Optional[int] = None) -> CoupledGapStats:
    """Monte-Carlo E[(V-X)^2] at t = the ensemble mean exit time.

    Pass one measures each pair's exit time from [0, delta) (capped at
    max_steps).  Pass two replays the identical noise streams up to the
    mean exit time, freezing pairs that exit earlier, and averages the
    squared gap Y_{t and tau}^2.
    """
    _check_pair_args(v0, delta)
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if max_steps is None:
        # generous cap: ~50x the analytic mean exit time delta/(2G)
        max_steps = max(1000, int(25 * delta / (max(params.g, 1e-12)
                                                * params.dt)))
    workers = resolve_workers(n_workers)
    children = np.random.SeedSequence(master_seed).spawn(n_pairs)
    n_chunks = min(n_pairs, max(workers, 4 * workers if workers > 1 else 1))
    bounds = np.linspace(0, n_pairs, n_chunks + 1, dtype=int)

    def run(n_eval):
        tasks = [(params, v0, delta, max_steps, n_eval,
                  children[bounds[i]:bounds[i + 1]])
                 for i in range(n_chunks) if bounds[i] < bounds[i + 1]]
        results = _run_indexed_tasks(_gap_task, tasks, workers)
        steps = np.concatenate([r[0] for r in results])
        gaps = (np.concatenate([r[1] for r in results])
                if n_eval is not None else None)
        return steps, gaps

    steps, _ = run(None)
    exited = steps > 0
    n_censored = int((~exited).sum())
    if not exited.any():
        raise RuntimeError("all coupled pairs were censored; raise max_steps")
    exit_times = steps[exited] * params.dt
    mean_exit = float(exit_times.mean())
    se = float(exit_times.std(ddof=1) / math.sqrt(exit_times.size)) \
        if exit_times.size > 1 else 0.0
    n_eval = max(1, int(round(mean_exit / params.dt)))
    _, gaps = run(n_eval)
    return CoupledGapStats(delta, n_pairs, mean_exit, se, n_censored,
                           n_eval * params.dt, float(gaps.mean()),
                           master_seed)
