"""Classical fixed-step Runge-Kutta integration.

scipy only ships adaptive integrators; the rolling code wants a fixed grid so
that runs are reproducible bit for bit, hence this small helper.
"""
import math

import numpy as np


def n_steps_for(duration, step):
    if step <= 0:
        raise ValueError("step must be positive")
    return max(1, int(math.ceil(abs(duration) / step - 1e-9)))


def rk4(rhs, y0, t0, t1, nsteps, callback=None):
    """Integrate ``y' = rhs(t, y)`` from t0 to t1 with ``nsteps`` RK4 steps.

    Returns ``(ts, ys)`` with every intermediate state.  ``callback(t, y)`` is
    called after each accepted step and may raise to abort the run.
    """
    y = np.array(y0, dtype=float)
    h = (t1 - t0) / nsteps
    ts = np.empty(nsteps + 1)
    ys = np.empty((nsteps + 1,) + y.shape)
    ts[0] = t0
    ys[0] = y
    t = t0
    for i in range(nsteps):
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t0 + (i + 1) * h
        ts[i + 1] = t
        ys[i + 1] = y
        if callback is not None:
            callback(t, y)
    return ts, ys


def rk4_final(rhs, y0, t0, t1, nsteps):
    """Same as :func:`rk4` but keeps only the end state."""
    y = np.array(y0, dtype=float)
    h = (t1 - t0) / nsteps
    t = t0
    for i in range(nsteps):
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t0 + (i + 1) * h
    return y


def rk4_pieces(pieces, make_rhs, y0, step, callback=None):
    """RK4 over a piecewise-smooth curve, one uniform grid per piece.

    ``pieces`` is a list of (start time, curve); ``make_rhs(curve)`` returns
    the right-hand side in the piece's local time.  ``callback(t, y)`` gets
    the global time.  Returns ``(ts, ys, starts)`` where ``starts`` holds the
    sample index at which each piece begins.
    """
    y = np.array(y0, dtype=float)
    ts = [0.0]
    ys = [y]
    starts = []
    for t0, curve in pieces:
        starts.append(len(ts) - 1)
        if curve.duration <= 0:
            continue
        rhs = make_rhs(curve)
        nsteps = n_steps_for(curve.duration, step)
        h = curve.duration / nsteps
        t = 0.0
        for i in range(nsteps):
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t = (i + 1) * h
            if callback is not None:
                callback(t0 + t, y)
            ts.append(t0 + t)
            ys.append(y)
    return np.array(ts), np.array(ys), starts
