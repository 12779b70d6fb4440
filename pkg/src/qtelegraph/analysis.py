"""Trajectory observables: band classification, dwell/occupancy
statistics, instrumental smoothing, histograms, and Monte-Carlo
first-passage times.

All operations are pure functions over immutable trajectories.
Statistics are computed on raw samples; smoothing is presentation-only.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .integrate import Trajectory, _run_indexed_tasks, resolve_workers
from .model import ModelParams

DEFAULT_BAND = 0.05


class StateLabel(enum.Enum):
    UPPER = "upper"
    LOWER = "lower"
    TRANSIT = "transit"


@dataclass(frozen=True)
class DwellReport:
    """Occupancy times in the endpoint bands of half-width ``band``.

    ratio is t_upper/t_lower, or None (ratio_defined False) when no time
    was spent in the lower band; serialized output never carries a float
    infinity.
    """

    t_upper: float
    t_lower: float
    t_transit: float
    duration: float
    ratio: Optional[float]
    ratio_defined: bool
    n_upper_to_lower: int
    n_lower_to_upper: int
    band: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


@dataclass(frozen=True)
class EmpiricalDensity:
    """Normalized histogram over [-1, 1]."""

    bin_edges: np.ndarray
    probabilities: np.ndarray
    n_samples: int

    def __post_init__(self):
        if self.bin_edges.size != self.probabilities.size + 1:
            raise ValueError("need exactly one more edge than bin")
        if (self.probabilities < 0).any():
            raise ValueError("probabilities must be nonnegative")
        if abs(self.probabilities.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")

    def to_csv(self, path) -> None:
        from .integrate import write_csv
        write_csv(path, "bin_left,bin_right,prob",
                  np.column_stack([self.bin_edges[:-1], self.bin_edges[1:],
                                   self.probabilities]))

    def to_json(self) -> str:
        return json.dumps({
            "bin_edges": self.bin_edges.tolist(),
            "probabilities": self.probabilities.tolist(),
            "n_samples": self.n_samples,
        })


@dataclass(frozen=True)
class ExitTimeReport:
    """Monte-Carlo first-passage estimate with its analytic comparators.

    analytic_value is delta/(2g) for lower-band starts and T*delta/2 for
    upper-band starts; analytic_bound (delta/g) applies to lower-band
    starts only.
    """

    start: float
    band: float
    mc_mean: float
    mc_stderr: float
    n_samples: int
    n_censored: int
    analytic_value: float
    analytic_bound: Optional[float]

    def __post_init__(self):
        if self.n_samples > 1 and not (self.mc_stderr > 0):
            raise ValueError("standard error must be positive")

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def classify(u3: float, band: float = DEFAULT_BAND) -> StateLabel:
    """Band membership of a single sample; bands are closed at 1-band."""
    if abs(u3) > 1.0:
        raise ValueError(f"u3 must lie in [-1, 1], got {u3}")
    if not (0.0 < band < 1.0):
        raise ValueError(f"band must lie in (0, 1), got {band}")
    if u3 >= 1.0 - band:
        return StateLabel.UPPER
    if u3 <= -1.0 + band:
        return StateLabel.LOWER
    return StateLabel.TRANSIT


def dwell_statistics(traj: Trajectory, band: float = DEFAULT_BAND) -> DwellReport:
    """Per-sample occupancy times and collapsed telegraph jump counts.

    Each sample contributes one sampling interval to its band's total.
    A jump is counted when consecutive endpoint-band visits carry
    different labels; any run of transit samples in between collapses
    into that single jump (band-edge chatter is not double counted).
    """
    if not (0.0 < band < 1.0):
        raise ValueError(f"band must lie in (0, 1), got {band}")
    if traj.values.size < 2:
        raise ValueError("trajectory too short for dwell statistics")
    dt_s = traj.dt_sample
    n_up, n_lo, n_tr, up_down, down_up = _kernels.dwell_accumulate(
        traj.values, band)
    t_up = n_up * dt_s
    t_lo = n_lo * dt_s
    t_tr = n_tr * dt_s
    defined = n_lo > 0
    ratio = t_up / t_lo if defined else None
    return DwellReport(t_up, t_lo, t_tr, (n_up + n_lo + n_tr) * dt_s,
                       ratio, defined, up_down, down_up, band)


def occupancy_fraction(traj: Trajectory, band: float = DEFAULT_BAND) -> float:
    """Fraction of total time spent inside either endpoint band."""
    rep = dwell_statistics(traj, band)
    return (rep.t_upper + rep.t_lower) / rep.duration


def default_burn_in(params: ModelParams) -> float:
    """Conservative initial transient to discard: max(10 T, 10/(g + 1/T))."""
    rate = params.g + params.inv_t
    relax = 10.0 / rate if rate > 0 else 0.0
    return max(10.0 * params.t_decay, relax)


def smooth(traj: Trajectory, width: float) -> Trajectory:
    """Gaussian instrumental-resolution filter.

    Kernel standard deviation equals ``width`` (in time units),
    truncated at +-4 widths and renormalized near the edges; the output
    grid equals the input grid.
    """
    dt_s = traj.dt_sample
    if width < dt_s:
        raise ValueError(f"width {width} below sample spacing {dt_s}")
    half = int(math.ceil(4.0 * width / dt_s))
    offsets = np.arange(-half, half + 1) * dt_s
    kernel = np.exp(-0.5 * (offsets / width) ** 2)
    kernel /= kernel.sum()
    num = np.convolve(traj.values, kernel, mode="same")
    den = np.convolve(np.ones_like(traj.values), kernel, mode="same")
    return Trajectory(traj.times, num / den, traj.seed, traj.params)


def histogram(traj: Trajectory, n_bins: int) -> EmpiricalDensity:
    """Equal-width normalized histogram spanning exactly [-1, 1]."""
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    if traj.values.size == 0:
        raise ValueError("empty trajectory")
    edges = np.linspace(-1.0, 1.0, n_bins + 1)
    counts, _ = np.histogram(traj.values, bins=edges)
    return EmpiricalDensity(edges, counts / counts.sum(), traj.values.size)


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Total-variation distance between two probability vectors."""
    if p.shape != q.shape:
        raise ValueError("probability vectors must have equal length")
    return 0.5 * float(np.abs(p - q).sum())


def _exit_task(args):
    params, start, lo, hi, max_steps, seedseqs = args
    sqrt_dt = math.sqrt(params.dt)
    steps = np.empty(len(seedseqs), dtype=np.int64)
    block = 2048
    for k, ss in enumerate(seedseqs):
        rng = np.random.Generator(np.random.PCG64(ss))
        u3 = float(start)
        done = 0
        steps[k] = -1
        while done < max_steps:
            m = min(block, max_steps - done)
            dw = rng.standard_normal(m)
            dw *= sqrt_dt
            used, u3, exited = _kernels.exit_steps(
                u3, params.g, params.inv_t, params.alpha, params.dt, dw,
                lo, hi)
            if exited:
                steps[k] = done + used
                break
            done += m
    return steps


def exit_time_mc(params: ModelParams, start: float, band: float,
                 n_traj: int, max_steps: int, seed: int,
                 n_workers: Optional[int] = None) -> ExitTimeReport:
    """First-passage time from an endpoint band into the transit region.

    Each trajectory runs until u3 first enters the open interval
    (-1+band, 1-band), or until max_steps (censored; censored runs are
    excluded from the mean and reported separately).  Reproducible and
    worker-count invariant like simulate_ensemble.
    """
    if not (0.0 < band < 1.0):
        raise ValueError(f"band must lie in (0, 1), got {band}")
    lo, hi = -1.0 + band, 1.0 - band
    if lo < start < hi:
        raise ValueError("start must lie inside an endpoint band")
    if abs(start) > 1.0:
        raise ValueError(f"start must lie in [-1, 1], got {start}")
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    workers = resolve_workers(n_workers)
    children = np.random.SeedSequence(seed).spawn(n_traj)
    n_chunks = min(n_traj, max(workers, 4 * workers if workers > 1 else 1))
    bounds = np.linspace(0, n_traj, n_chunks + 1, dtype=int)
    tasks = [(params, start, lo, hi, max_steps,
              children[bounds[i]:bounds[i + 1]])
             for i in range(n_chunks) if bounds[i] < bounds[i + 1]]
    results = _run_indexed_tasks(_exit_task, tasks, workers)
    steps = np.concatenate(results)
    exited = steps > 0
    if not exited.any():
        raise RuntimeError("all exit-time runs were censored")
    times = steps[exited] * params.dt
    mean = float(times.mean())
    se = float(times.std(ddof=1) / math.sqrt(times.size)) \
        if times.size > 1 else 0.0

    from . import fokker_planck as fp
    if start <= lo:
        analytic = fp.analytic_exit_lower(band, params.g)
        try:
            bound = fp.exit_time_bound(band, params.g, params.t_decay)
        except ValueError:
            bound = None
    else:
        analytic = fp.analytic_exit_upper(band, params.t_decay)
        bound = None
    return ExitTimeReport(start, band, mean, se, int(times.size),
                          int((~exited).sum()), analytic, bound)
