"""Telegraph switching of a continuously collapsing qubit: simulation,
dwell statistics, and closed-form cross-validation oracles."""

from .analysis import (DwellReport, EmpiricalDensity, ExitTimeReport,
                       StateLabel, classify, default_burn_in,
                       dwell_statistics, exit_time_mc, histogram,
                       occupancy_fraction, smooth, tv_distance)
from .fokker_planck import (StationaryDensity, analytic_exit_lower,
                            analytic_exit_upper, exit_time_bound,
                            fp_residual, gap_bound,
                            log_unnormalized_density, stationary_density)
from .integrate import (BlochTrajectory, CoupledGapStats, CoupledPair,
                        EnsembleSummary, Trajectory, coupled_gap_ensemble,
                        em_step, simulate_coupled_pair,
                        simulate_deterministic_bloch, simulate_ensemble,
                        simulate_trajectory, simulate_weak_measurement)
from .model import (Bloch3Params, ModelParams, WeakMeasParams,
                    deterministic_solution, diffusion, drift,
                    predicted_ratio, relaxation_rate, steady_state)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
