"""Independent reference computations used by unit and acceptance tests.

These deliberately avoid the closed-form paths in the package: the ray
oracle is a grid search, the control-law oracle is 50-digit arithmetic,
gradients are central finite differences.
"""

import mpmath
import numpy as np


def grid_closest_point(o1, d1, o2, d2, lo=-15.0, hi=15.0, rounds=6, n=121):
    """Midpoint of the closest approach of two lines, by zooming grid search.

    Minimizes |L(s) - R(t)| over a dense (s, t) grid, then re-grids around
    the argmin. Returns (midpoint, gap).
    """
    s_lo, s_hi = lo, hi
    t_lo, t_hi = lo, hi
    for _ in range(rounds):
        s = np.linspace(s_lo, s_hi, n)
        t = np.linspace(t_lo, t_hi, n)
        p = o1[None, None, :] + s[:, None, None] * d1[None, None, :]
        q = o2[None, None, :] + t[None, :, None] * d2[None, None, :]
        dist2 = np.sum((p - q) ** 2, axis=2)
        i, j = np.unravel_index(np.argmin(dist2), dist2.shape)
        ds = (s_hi - s_lo) / (n - 1)
        dt = (t_hi - t_lo) / (n - 1)
        s_best, t_best = s[i], t[j]
        s_lo, s_hi = s_best - 2 * ds, s_best + 2 * ds
        t_lo, t_hi = t_best - 2 * dt, t_best + 2 * dt
    a = o1 + s_best * d1
    b = o2 + t_best * d2
    return 0.5 * (a + b), float(np.linalg.norm(a - b))


def control_law_mp(v, a, b, c, x):
    """Sigmoid-gated velocity law evaluated with 50-digit arithmetic."""
    with mpmath.workdps(50):
        v, a, b, c, x = (mpmath.mpf(float(u)) for u in (v, a, b, c, x))
        return float(v * (x - c) / (1 + mpmath.e ** (a * (-(x - c) + b))))


def central_diff(f, x, h=1e-5):
    """Central finite-difference derivative of scalar f at scalar x."""
    return (f(x + h) - f(x - h)) / (2.0 * h)


def rel_err(analytic, numeric, floor=1e-8):
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), floor)
