"""Compiled inner loops of the fixed-step integrator.

Grid layout: the step dt divides the delay exactly (tau = k dt), so the
delayed argument of a classic RK4 step falls either on a stored node
(stages 1 and 4) or on the midpoint of a stored interval (stages 2 and 3),
where cubic Hermite interpolation of (state, derivative) pairs keeps the
delayed term at the integrator's own order.  Because k >= 1, the interval
needed for the midpoint is always fully computed before it is read.

State history is kept in a rolling window of k + 2 nodes, enough to hold
everything between t - tau and t + dt; output is written every `dec`-th
node into a separate (state, derivative) table.  No fastmath: results must
be bit-reproducible across runs.

Failure is reported as the 1-based index of the offending step (state
negative beyond -1e-12 or non-finite); tiny negative undershoot within
that tolerance is clamped to zero.
"""

import numpy as np
from numba import njit

NEG_TOL = -1e-12


@njit(cache=True)
def rk4_delay(s, A, dt, n_steps, k, dec, hist, x0, y0, out):
    """Advance the delayed system n_steps from (x0, y0); A = Y exp(-s tau).

    hist has k + 1 rows of (x, y, xdot, ydot) for the initial data at nodes
    -k dt, ..., -dt, 0; its last row holds the left limit at t = 0, which
    differs from (x0, y0) when the initial data jumps there.  Constant
    history is rows of the constant with zero derivatives.  out has
    n_steps // dec + 1 rows of (x, y, xdot, ydot).  Returns 0 on success,
    else the failing step number."""
    R = k + 2
    rx = np.empty(R, np.float64)
    ry = np.empty(R, np.float64)
    rdx = np.empty(R, np.float64)
    rdy = np.empty(R, np.float64)

    x = x0
    y = y0
    dx = x * (1.0 - x - y)
    dy = -s * y + A * hist[0, 0] * hist[0, 1]  # delayed argument at t = -tau
    rx[0] = x
    ry[0] = y
    rdx[0] = dx
    rdy[0] = dy
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = dx
    out[0, 3] = dy

    half = 0.5 * dt
    sixth = dt / 6.0
    for i in range(n_steps):
        j = i - k       # node carrying the delayed state at stage 1
        jb = j + 1      # node carrying the delayed state at stage 4
        if j >= 0:
            ja = j % R
            xa = rx[ja]
            ya = ry[ja]
            dxa = rdx[ja]
            dya = rdy[ja]
        else:
            xa = hist[j + k, 0]
            ya = hist[j + k, 1]
            dxa = hist[j + k, 2]
            dya = hist[j + k, 3]
        if jb >= 0:
            jm = jb % R
            xb = rx[jm]
            yb = ry[jm]
            dxb = rdx[jm]
            dyb = rdy[jm]
        else:
            xb = hist[jb + k, 0]
            yb = hist[jb + k, 1]
            dxb = hist[jb + k, 2]
            dyb = hist[jb + k, 3]
        if j >= 0:
            # Hermite value at the midpoint of [t_j, t_j + dt]
            xm = 0.5 * (xa + xb) + 0.125 * dt * (dxa - dxb)
            ym = 0.5 * (ya + yb) + 0.125 * dt * (dya - dyb)
        else:
            # midpoint lies before t = 0: both endpoints come from the
            # initial data (row k is its left limit at 0, so an overridden
            # state at t = 0 never leaks into history interpolation)
            xc = hist[jb + k, 0]
            yc = hist[jb + k, 1]
            xm = 0.5 * (xa + xc) + 0.125 * dt * (dxa - hist[jb + k, 2])
            ym = 0.5 * (ya + yc) + 0.125 * dt * (dya - hist[jb + k, 3])

        k1x = dx
        k1y = dy
        ux = x + half * k1x
        uy = y + half * k1y
        k2x = ux * (1.0 - ux - uy)
        k2y = -s * uy + A * xm * ym
        ux = x + half * k2x
        uy = y + half * k2y
        k3x = ux * (1.0 - ux - uy)
        k3y = -s * uy + A * xm * ym
        ux = x + dt * k3x
        uy = y + dt * k3y
        k4x = ux * (1.0 - ux - uy)
        k4y = -s * uy + A * xb * yb

        x = x + sixth * (k1x + 2.0 * (k2x + k3x) + k4x)
        y = y + sixth * (k1y + 2.0 * (k2y + k3y) + k4y)

        if not (np.isfinite(x) and np.isfinite(y)):
            return i + 1
        if x < 0.0:
            if x < NEG_TOL:
                return i + 1
            x = 0.0
        if y < 0.0:
            if y < NEG_TOL:
                return i + 1
            y = 0.0

        dx = x * (1.0 - x - y)
        dy = -s * y + A * xb * yb  # delayed argument of the new node is node jb
        w = (i + 1) % R
        rx[w] = x
        ry[w] = y
        rdx[w] = dx
        rdy[w] = dy
        if (i + 1) % dec == 0:
            o = (i + 1) // dec
            out[o, 0] = x
            out[o, 1] = y
            out[o, 2] = dx
            out[o, 3] = dy
    return 0


@njit(cache=True)
def rk4_plain(s, Y, dt, n_steps, dec, x0, y0, out):
    """Zero-delay variant: the conversion term is instantaneous."""
    x = x0
    y = y0
    dx = x * (1.0 - x - y)
    dy = -s * y + Y * x * y
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = dx
    out[0, 3] = dy

    half = 0.5 * dt
    sixth = dt / 6.0
    for i in range(n_steps):
        k1x = dx
        k1y = dy
        ux = x + half * k1x
        uy = y + half * k1y
        k2x = ux * (1.0 - ux - uy)
        k2y = -s * uy + Y * ux * uy
        ux = x + half * k2x
        uy = y + half * k2y
        k3x = ux * (1.0 - ux - uy)
        k3y = -s * uy + Y * ux * uy
        ux = x + dt * k3x
        uy = y + dt * k3y
        k4x = ux * (1.0 - ux - uy)
        k4y = -s * uy + Y * ux * uy

        x = x + sixth * (k1x + 2.0 * (k2x + k3x) + k4x)
        y = y + sixth * (k1y + 2.0 * (k2y + k3y) + k4y)

        if not (np.isfinite(x) and np.isfinite(y)):
            return i + 1
        if x < 0.0:
            if x < NEG_TOL:
                return i + 1
            x = 0.0
        if y < 0.0:
            if y < NEG_TOL:
                return i + 1
            y = 0.0

        dx = x * (1.0 - x - y)
        dy = -s * y + Y * x * y
        if (i + 1) % dec == 0:
            o = (i + 1) // dec
            out[o, 0] = x
            out[o, 1] = y
            out[o, 2] = dx
            out[o, 3] = dy
    return 0
