"""Physical parameterization and closed-form scalar functions.

The collapse coordinate u3 lives in [-1, 1]: +1 is the fully excited
state, -1 the ground state.  Pumping at rate ``g`` competes with decay
at rate ``1/t_decay``; multiplicative noise of strength ``alpha``
vanishes at the endpoints and traps the state there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the pumped-decay collapse SDE.

    g        : incoherent pump rate (>= 0)
    t_decay  : characteristic decay time (> 0)
    alpha    : noise strength, ratio of pump to random-walk time scales (>= 0)
    dt       : Euler-Maruyama step (> 0)
    no_decay : disable the decay term entirely (pure-noise mode; together
               with g = 0 this leaves only the martingale collapse walk)

    Validated once at construction; downstream hot loops assume validity.
    """

    g: float
    t_decay: float
    alpha: float
    dt: float
    no_decay: bool = False

    def __post_init__(self):
        if not (self.t_decay > 0):
            raise ValueError(f"t_decay must be > 0, got {self.t_decay}")
        if not (self.dt > 0):
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.g < 0:
            raise ValueError(f"g must be >= 0, got {self.g}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        # Explicit-Euler stability of the deterministic part.
        if self.dt * (self.g + self.inv_t) >= 1.0:
            raise ValueError(
                f"dt too large for stability: dt*(g + 1/T) = "
                f"{self.dt * (self.g + self.inv_t):g} >= 1"
            )

    @property
    def inv_t(self) -> float:
        """Decay rate 1/T, zero in pure-noise (no_decay) mode."""
        return 0.0 if self.no_decay else 1.0 / self.t_decay


@dataclass(frozen=True)
class Bloch3Params:
    """Parameters of the deterministic three-component Bloch system.

    detuning  : pump detuning from the qubit resonance
    rabi      : Rabi frequency, proportional to the drive amplitude
    t2        : decoherence time (> 0)
    t1        : intrinsic energy-loss time (> 0)
    """

    detuning: float
    rabi: float
    t2: float
    t1: float

    def __post_init__(self):
        if not (self.t1 > 0):
            raise ValueError(f"t1 must be > 0, got {self.t1}")
        if not (self.t2 > 0):
            raise ValueError(f"t2 must be > 0, got {self.t2}")


@dataclass(frozen=True)
class WeakMeasParams:
    """Parameters of the continuous weak-measurement three-variable system.

    tau_m     : characteristic measurement time (> 0)
    tunneling : tunneling rate coupling y and z
    detuning  : detuning coupling x and y
    """

    tau_m: float
    tunneling: float = 0.0
    detuning: float = 0.0

    def __post_init__(self):
        if not (self.tau_m > 0):
            raise ValueError(f"tau_m must be > 0, got {self.tau_m}")


def _check_domain(u3: float) -> None:
    if abs(u3) > 1.0:
        raise ValueError(f"u3 must lie in [-1, 1], got {u3}")


def drift(u3: float, params: ModelParams) -> float:
    """Deterministic rate of change of u3: -(u3+1)/T + g*(1-u3).

    Pushes inward at both endpoints: -2/T at u3 = +1, +2g at u3 = -1.
    """
    _check_domain(u3)
    return -(u3 + 1.0) * params.inv_t + params.g * (1.0 - u3)


def diffusion(u3: float, alpha: float) -> float:
    """Multiplicative noise amplitude alpha*(1 - u3^2); zero at u3 = +-1."""
    _check_domain(u3)
    return alpha * (1.0 - u3 * u3)


def steady_state(g: float, t_decay: float) -> float:
    """Stable fixed point (gT - 1)/(gT + 1) of the deterministic flow."""
    if g < 0:
        raise ValueError(f"g must be >= 0, got {g}")
    if not (t_decay > 0):
        raise ValueError(f"t_decay must be > 0, got {t_decay}")
    gt = g * t_decay
    return (gt - 1.0) / (gt + 1.0)


def predicted_ratio(g: float, t_decay: float) -> float:
    """Predicted long-run upper/lower occupancy-time ratio, equal to g*T.

    Requires g > 0: with no pumping the upper state is never revisited and
    the ratio degenerates.
    """
    if not (g > 0):
        raise ValueError(f"predicted_ratio requires g > 0, got {g}")
    if not (t_decay > 0):
        raise ValueError(f"t_decay must be > 0, got {t_decay}")
    return g * t_decay


def relaxation_rate(params: ModelParams) -> float:
    """Rate g + 1/T at which the deterministic flow relaxes to steady state."""
    return params.g + params.inv_t


def deterministic_solution(t, u3_0: float, params: ModelParams):
    """Closed-form solution of the noise-free equation at times t.

    u3(t) = s + (u3_0 - s) * exp(-(g + 1/T) t) with s the steady state.
    With both rates zero the state is constant.
    """
    import numpy as np

    rate = relaxation_rate(params)
    t = np.asarray(t, dtype=float)
    if rate == 0.0:
        return np.full_like(t, u3_0)
    s = (params.g - params.inv_t) / rate  # generalizes (gT-1)/(gT+1)
    return s + (u3_0 - s) * np.exp(-rate * t)


def stability_limit(params: ModelParams) -> float:
    """Largest admissible dt for the deterministic Euler update."""
    rate = relaxation_rate(params)
    return math.inf if rate == 0.0 else 1.0 / rate
