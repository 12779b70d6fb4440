"""Numba-compiled inner loops.

All kernels take pre-drawn Gaussian increments (variance dt) so that
reproducibility is owned entirely by the callers' RNG streams.  Kernels
never allocate; callers pass output buffers.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def em_chunk(u3, g, inv_t, alpha, dt, dw, out, stride, step0):
    """Advance u3 through len(dw) Euler-Maruyama steps.

    Writes every stride-th sample (by global step index, starting at
    step0 + 1) into out at slot global_step // stride.  Returns the final
    state.
    """
    for i in range(dw.shape[0]):
        du = (-(u3 + 1.0) * inv_t + g * (1.0 - u3)) * dt \
            + alpha * (1.0 - u3 * u3) * dw[i]
        u3 = u3 + du
        if u3 > 1.0:
            u3 = 1.0
        elif u3 < -1.0:
            u3 = -1.0
        step = step0 + i + 1
        if step % stride == 0:
            out[step // stride] = u3
    return u3


@numba.njit(cache=True)
def em_terminal(u3, g, inv_t, alpha, dt, dw):
    """Euler-Maruyama through len(dw) steps, returning only the endpoint."""
    for i in range(dw.shape[0]):
        du = (-(u3 + 1.0) * inv_t + g * (1.0 - u3)) * dt \
            + alpha * (1.0 - u3 * u3) * dw[i]
        u3 = u3 + du
        if u3 > 1.0:
            u3 = 1.0
        elif u3 < -1.0:
            u3 = -1.0
    return u3


@numba.njit(cache=True)
def exit_steps(u3, g, inv_t, alpha, dt, dw, lo, hi):
    """Steps until u3 first enters the open interval (lo, hi).

    Consumes increments from dw; returns (steps_used, u3, exited) where
    steps_used counts consumed increments.  exited == False means the
    chunk ran out before the region was reached.
    """
    for i in range(dw.shape[0]):
        du = (-(u3 + 1.0) * inv_t + g * (1.0 - u3)) * dt \
            + alpha * (1.0 - u3 * u3) * dw[i]
        u3 = u3 + du
        if u3 > 1.0:
            u3 = 1.0
        elif u3 < -1.0:
            u3 = -1.0
        if lo < u3 < hi:
            return i + 1, u3, True
    return dw.shape[0], u3, False


@numba.njit(cache=True)
def coupled_chunk(v, x, g, inv_t, alpha, dt, dw, delta, v_out, x_out, step0,
                  exited):
    """Advance the shifted exact process V and its linearization X.

    V follows dV = (-V/T + g(2-V)) dt + alpha V(2-V) dW, clamped to
    [0, 2]; X follows dX = 2g dt + 2 alpha X dW.  Both consume the same
    increment.  Once V leaves [0, delta) the pair is frozen.  Series
    are written per step into v_out/x_out starting at step0 + 1.
    Returns (v, x, exit_step, exited) with exit_step the global step at
    which V first reached delta (-1 while still inside).
    """
    exit_step = -1
    for i in range(dw.shape[0]):
        step = step0 + i + 1
        if not exited:
            dv = (-v * inv_t + g * (2.0 - v)) * dt + alpha * v * (2.0 - v) * dw[i]
            dx = 2.0 * g * dt + 2.0 * alpha * x * dw[i]
            v = v + dv
            x = x + dx
            if v > 2.0:
                v = 2.0
            elif v < 0.0:
                v = 0.0
            if v >= delta:
                exited = True
                exit_step = step
        v_out[step] = v
        x_out[step] = x
    return v, x, exit_step, exited


@numba.njit(cache=True)
def coupled_gap_terminal(v, x, g, inv_t, alpha, dt, dw, delta):
    """Like coupled_chunk but unbuffered: returns (v, x, exit_step).

    Runs the pair for len(dw) steps, freezing both at the exit of V from
    [0, delta).  exit_step is -1 if V never exited.
    """
    exit_step = -1
    for i in range(dw.shape[0]):
        dv = (-v * inv_t + g * (2.0 - v)) * dt + alpha * v * (2.0 - v) * dw[i]
        dx = 2.0 * g * dt + 2.0 * alpha * x * dw[i]
        v = v + dv
        x = x + dx
        if v > 2.0:
            v = 2.0
        elif v < 0.0:
            v = 0.0
        if v >= delta:
            exit_step = i + 1
            break
    return v, x, exit_step


@numba.njit(cache=True)
def bloch_chunk(u1, u2, u3, det, rabi, inv_t1, inv_t2, dt, n, out, stride,
                step0):
    """Explicit Euler for the deterministic three-component Bloch system."""
    for i in range(n):
        du1 = (-u1 * inv_t2 + det * u2) * dt
        du2 = (-u2 * inv_t2 - det * u1 - rabi * u3) * dt
        du3 = (-(u3 + 1.0) * inv_t1 + rabi * u2) * dt
        u1 += du1
        u2 += du2
        u3 += du3
        step = step0 + i + 1
        if step % stride == 0:
            j = step // stride
            out[j, 0] = u1
            out[j, 1] = u2
            out[j, 2] = u3
    return u1, u2, u3


@numba.njit(cache=True)
def weak_meas_chunk(x, y, z, inv_tau, sqrt_inv_tau, tun, det, noise_scale,
                    dt, dw, out, stride, step0):
    """Euler-Maruyama for the weak-measurement x/y/z system.

    One shared increment per step drives all three equations; z is
    clamped to [-1, 1].
    """
    for i in range(dw.shape[0]):
        w = noise_scale * dw[i]
        dx = (-0.5 * x * inv_tau - det * y) * dt - x * z * sqrt_inv_tau * w
        dy = (-0.5 * y * inv_tau + det * x - tun * z) * dt \
            - y * z * sqrt_inv_tau * w
        dz = tun * y * dt + (1.0 - z * z) * sqrt_inv_tau * w
        x += dx
        y += dy
        z += dz
        if z > 1.0:
            z = 1.0
        elif z < -1.0:
            z = -1.0
        step = step0 + i + 1
        if step % stride == 0:
            j = step // stride
            out[j, 0] = x
            out[j, 1] = y
            out[j, 2] = z
    return x, y, z


@numba.njit(cache=True)
def dwell_accumulate(values, band):
    """Per-sample occupancy counts and collapsed transition counts.

    Returns (n_upper, n_lower, n_transit, up_to_down, down_to_up) where a
    transition is counted between consecutive *endpoint-band* visits with
    differing labels; intervening transit samples collapse into it.
    """
    n_up = 0
    n_lo = 0
    n_tr = 0
    up_down = 0
    down_up = 0
    prev = 0  # last endpoint label seen: +1, -1, or 0 for none yet
    hi = 1.0 - band
    lo = -1.0 + band
    for i in range(values.shape[0]):
        v = values[i]
        if v >= hi:
            n_up += 1
            if prev == -1:
                down_up += 1
            prev = 1
        elif v <= lo:
            n_lo += 1
            if prev == 1:
                up_down += 1
            prev = -1
        else:
            n_tr += 1
    return n_up, n_lo, n_tr, up_down, down_up
