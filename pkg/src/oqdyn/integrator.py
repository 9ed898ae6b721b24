"""Adaptive embedded Runge-Kutta (Dormand-Prince 5(4)) for matrix-valued ODEs.

The right-hand side maps (t, y) -> dy/dt for a complex ndarray y of any
shape.  Steps land exactly on the requested output grid, so reported states
are at the grid times rather than interpolated.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["IntegratorConfig", "IntegrationError", "integrate", "integrate_fixed"]


class IntegrationError(RuntimeError):
    pass


@dataclass
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-10
    initial_step: float = 0.0  # 0 -> auto from first grid interval
    max_step: float = np.inf

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")


# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_ORDER = 5


def _dp45_step(rhs, t, y, h):
    """One Dormand-Prince step; returns (y5, error_estimate)."""
    k = [rhs(t, y)]
    for i in range(1, 7):
        yi = y + h * sum(a * kk for a, kk in zip(_A[i], k))
        k.append(rhs(t + _C[i] * h, yi))
    y5 = y + h * sum(b * kk for b, kk in zip(_B5, k) if b != 0.0)
    err = h * sum((b5 - b4) * kk for b5, b4, kk in zip(_B5, _B4, k))
    return y5, err


def _error_norm(err, y_old, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return np.sqrt(np.mean(np.abs(err / scale) ** 2))


def integrate(rhs, y0, t_grid, config=None):
    """Integrate dy/dt = rhs(t, y) and return the state at every grid point.

    The grid must be strictly increasing and start at 0.
    """
    config = config or IntegratorConfig()
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] != 0.0:
        raise ValueError("t_grid must start at 0")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")

    y = np.array(y0, dtype=complex)
    out = [y.copy()]
    if len(t_grid) == 1:
        return out

    safety = 0.9
    min_factor, max_factor = 0.2, 5.0
    # PI step controller exponents for a 5th-order pair.
    k_i = 0.7 / _ORDER
    k_p = 0.4 / _ORDER

    t = 0.0
    h = config.initial_step if config.initial_step > 0 else (t_grid[1] - t_grid[0]) / 10
    h = min(h, config.max_step)
    err_prev = 1.0

    for t_target in t_grid[1:]:
        while t < t_target - 1e-14 * max(1.0, abs(t_target)):
            h = min(h, config.max_step, t_target - t)
            if h <= abs(t) * 1e-15 or h < 1e-300:
                raise IntegrationError(f"step size underflow at t = {t}")
            y_new, err = _dp45_step(rhs, t, y, h)
            if not np.all(np.isfinite(y_new.view(float))):
                raise IntegrationError(f"non-finite rhs output near t = {t}")
            enorm = _error_norm(err, y, y_new, config.rtol, config.atol)
            if enorm <= 1.0:
                t += h
                y = y_new
                factor = safety * (1.0 if enorm == 0 else enorm**-k_i) * err_prev**k_p
                err_prev = max(enorm, 1e-10)
                h *= min(max_factor, max(min_factor, factor))
            else:
                h *= max(min_factor, safety * enorm**-k_i)
        out.append(y.copy())
    return out


def integrate_fixed(rhs, y0, t_end, nsteps):
    """Fixed-step Dormand-Prince driver (used for order verification)."""
    y = np.array(y0, dtype=complex)
    h = t_end / nsteps
    t = 0.0
    for _ in range(nsteps):
        y, _ = _dp45_step(rhs, t, y, h)
        t += h
    return y
