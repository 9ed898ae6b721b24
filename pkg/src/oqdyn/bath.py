"""Harmonic-bath descriptions: spectral densities, discrete modes, the
sum-over-poles (Matsubara) expansion of the Drude-Lorentz correlation
function, and the discretized influence-functional eta-coefficients.

Conventions (hbar = 1):
  bath response      alpha(t) = (1/pi) int_0^inf J(w) [coth(beta w / 2) cos(w t)
                                                       - i sin(w t)] dw
  eta_{kk'} is alpha integrated over the time-interval pair of the
  piecewise-constant path discretization; the first, last and interior time
  points carry half- and full-width intervals respectively (trapezoidal
  endpoint convention), so eta depends on (endpoint class, lag) only.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

__all__ = [
    "ExponentialCutoffSD",
    "DrudeLorentzSD",
    "TabulatedSD",
    "DiscreteBathModes",
    "MatsubaraExpansion",
    "EtaCoefficients",
    "evaluate",
    "discretize",
    "matsubara_expand",
    "compute_eta",
    "bath_correlation",
    "reorganization_integral",
]


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# spectral densities


@dataclass(frozen=True)
class ExponentialCutoffSD:
    """J(w) = (2 pi / ds^2) xi w^n / wc^(n-1) exp(-w/wc).

    n = 1 is Ohmic, n > 1 super-Ohmic, n < 1 sub-Ohmic.
    """

    xi: float
    omega_c: float
    n: float = 1.0
    delta_s: float = 2.0

    def __post_init__(self):
        if self.xi < 0 or self.omega_c <= 0:
            raise ValueError("require xi >= 0 and omega_c > 0")

    def evaluate(self, omega):
        w = np.asarray(omega, dtype=float)
        out = (
            (2 * np.pi / self.delta_s**2)
            * self.xi
            * np.where(w > 0, w, 0.0) ** self.n
            / self.omega_c ** (self.n - 1)
            * np.exp(-np.abs(w) / self.omega_c)
        )
        return out if out.ndim else float(out)

    def _tail_start(self, beta):
        return max(40.0 * self.omega_c * max(1.0, self.n), 80.0 / beta)

    def _cutoff(self):
        return None  # infinite support (exponentially small tail)


@dataclass(frozen=True)
class DrudeLorentzSD:
    """J(w) = (2 lambda / ds^2) gamma w / (w^2 + gamma^2)."""

    lam: float
    gamma: float
    delta_s: float = 2.0

    def __post_init__(self):
        if self.lam < 0 or self.gamma <= 0:
            raise ValueError("require lam >= 0 and gamma > 0")

    def evaluate(self, omega):
        w = np.asarray(omega, dtype=float)
        out = (2 * self.lam / self.delta_s**2) * self.gamma * w / (w**2 + self.gamma**2)
        return out if out.ndim else float(out)

    def _tail_start(self, beta):
        return max(50.0 * self.gamma, 80.0 / beta)

    def _cutoff(self):
        return None


@dataclass(frozen=True)
class TabulatedSD:
    """Spectral density interpolated linearly from a table; zero outside."""

    omega_grid: np.ndarray
    j_values: np.ndarray
    mode: str = "J"  # "J" or "J/w": what the table stores

    def __post_init__(self):
        wg = np.asarray(self.omega_grid, dtype=float)
        jv = np.asarray(self.j_values, dtype=float)
        if wg.shape != jv.shape or wg.size < 2:
            raise ValueError("grids must have equal length >= 2")
        if np.any(wg <= 0) or np.any(np.diff(wg) <= 0):
            raise ValueError("frequencies must be positive and ascending")
        if self.mode not in ("J", "J/w"):
            raise ValueError("mode must be 'J' or 'J/w'")
        object.__setattr__(self, "omega_grid", wg)
        object.__setattr__(self, "j_values", jv)

    @classmethod
    def from_file(cls, path):
        """Read a two-column whitespace table; '#' starts a comment.

        A comment of the form ``# format: J`` or ``# format: J/w`` selects
        whether the second column is J(w) or J(w)/w (default J).
        """
        mode = "J"
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line.lstrip("#").strip().lower().replace(" ", "")
                    if body in ("format:j", "format:j(w)"):
                        mode = "J"
                    elif body in ("format:j/w", "format:j/omega", "format:j(w)/w"):
                        mode = "J/w"
                    continue
                parts = line.split()
                rows.append((float(parts[0]), float(parts[1])))
        data = np.array(rows)
        return cls(data[:, 0], data[:, 1], mode=mode)

    def evaluate(self, omega):
        w = np.asarray(omega, dtype=float)
        vals = np.interp(w, self.omega_grid, self.j_values, left=0.0, right=0.0)
        if self.mode == "J/w":
            vals = vals * w
        inside = (w >= self.omega_grid[0]) & (w <= self.omega_grid[-1])
        out = np.where(inside, vals, 0.0)
        return out if out.ndim else float(out)

    def _tail_start(self, beta):
        return self.omega_grid[-1]

    def _cutoff(self):
        return self.omega_grid[-1]


def evaluate(sd, omega):
    """J(omega) for any spectral-density object."""
    return sd.evaluate(omega)


# ---------------------------------------------------------------------------
# discretization into modes


@dataclass(frozen=True)
class DiscreteBathModes:
    omegas: np.ndarray
    couplings: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float)
        c = np.asarray(self.couplings, dtype=float)
        if w.shape != c.shape:
            raise ValueError("omegas and couplings must have equal length")
        if np.any(w <= 0):
            raise ValueError("mode frequencies must be positive")
        object.__setattr__(self, "omegas", w)
        object.__setattr__(self, "couplings", c)

    def __len__(self):
        return self.omegas.size

    def reorganization_sum(self):
        """sum_j c_j^2 / (2 w_j^2), unit masses."""
        return float(np.sum(self.couplings**2 / (2 * self.omegas**2)))


def _omega_max(sd, rel=1e-8):
    """Frequency above which the reorganization density J(w)/w holds less
    than a `rel` fraction of its total mass.  Mass-based rather than
    peak-based so slowly decaying (Lorentzian) tails are handled too."""
    cut = sd._cutoff()
    if cut is not None:
        return cut
    scale = getattr(sd, "omega_c", None) or getattr(sd, "gamma")
    f = lambda w: sd.evaluate(w) / w
    wmax = 10.0 * scale
    for _ in range(60):
        head, _ = quad(f, 0.0, wmax, limit=500)
        tail, _ = quad(f, wmax, np.inf, limit=500)
        if head > 0 and tail <= rel * head:
            return wmax
        wmax *= 2.0
    raise QuadratureError("could not bound the spectral density support")


def discretize(sd, n_modes):
    """Pick (w_j, c_j) by equal-weight sampling of the density J(w)/w.

    The couplings carry equal reorganization weight, so
    sum_j c_j^2/(2 w_j^2) equals (1/pi) int J(w)/w dw by construction.
    """
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    wmax = _omega_max(sd)
    w = np.geomspace(wmax * 1e-10, wmax, 400_001)
    dens = sd.evaluate(w) / w
    cum = np.concatenate(([0.0], np.cumsum((dens[1:] + dens[:-1]) / 2 * np.diff(w))))
    total = cum[-1]
    if total <= 0:
        raise ValueError("spectral density vanishes; nothing to discretize")
    targets = (np.arange(n_modes) + 0.5) / n_modes * total
    omegas = np.interp(targets, cum, w)
    couplings = omegas * np.sqrt(2 * total / (np.pi * n_modes))
    return DiscreteBathModes(omegas, couplings)


def reorganization_integral(sd):
    """(1/pi) int_0^inf J(w)/w dw by adaptive quadrature (oracle)."""
    cut = sd._cutoff()
    val, _ = quad(
        lambda w: sd.evaluate(w) / w, 0, cut if cut is not None else np.inf, limit=2000
    )
    return val / np.pi


# ---------------------------------------------------------------------------
# Matsubara sum-over-poles expansion (Drude-Lorentz only)


@dataclass(frozen=True)
class MatsubaraExpansion:
    nus: np.ndarray  # decay rates, nu_0 = gamma, nu_m = 2 pi m / beta
    cs: np.ndarray  # complex coefficients
    num_modes: int

    def correlation(self, t):
        """C(t) = sum_m c_m exp(-nu_m t) for t >= 0."""
        t = np.asarray(t, dtype=float)
        return np.tensordot(self.cs, np.exp(-np.outer(self.nus, t)), axes=(0, 0))


def matsubara_expand(sd: DrudeLorentzSD, beta, num_modes):
    """Expand the Drude-Lorentz bath correlation as sum_m c_m exp(-nu_m t)."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if num_modes < 0:
        raise ValueError("num_modes must be >= 0")
    lam, gamma, ds2 = sd.lam, sd.gamma, sd.delta_s**2
    ms = np.arange(1, num_modes + 1)
    nus = np.concatenate(([gamma], 2 * np.pi * ms / beta))
    for m, nu in zip(ms, nus[1:]):
        if abs(nu - gamma) < 1e-12 * gamma:
            raise ValueError(
                f"gamma coincides with Matsubara frequency nu_{m} (pole in c_{m})"
            )
    c0 = gamma * (lam / ds2) * (1.0 / math.tan(beta * gamma / 2) - 1j)
    cms = (4 * lam * gamma / (beta * ds2)) * nus[1:] / (nus[1:] ** 2 - gamma**2)
    cs = np.concatenate(([c0], cms.astype(complex)))
    return MatsubaraExpansion(nus=nus, cs=cs, num_modes=num_modes)


def bath_correlation(sd, beta, t, kernel="full"):
    """alpha(t) by direct frequency quadrature (oracle for the expansion)."""
    w1 = sd._tail_start(beta)
    re, _ = quad(
        lambda w: sd.evaluate(w) * _coth_kernel(beta, w, kernel) * np.cos(w * t),
        0,
        w1,
        limit=2000,
    )
    im, _ = quad(lambda w: -sd.evaluate(w) * np.sin(w * t), 0, w1, limit=2000)
    if sd._cutoff() is None:
        # beyond w1 the temperature kernel is 1 to machine precision; slow
        # (power-law) tails need the oscillatory-weight rule
        if t == 0.0:
            tail, _ = quad(sd.evaluate, w1, np.inf, limit=2000)
            re += tail
        else:
            tail_c, _ = quad(sd.evaluate, w1, np.inf, weight="cos", wvar=t, limlst=200)
            tail_s, _ = quad(sd.evaluate, w1, np.inf, weight="sin", wvar=t, limlst=200)
            re += tail_c
            im -= tail_s
    return (re + 1j * im) / np.pi


# ---------------------------------------------------------------------------
# eta-coefficients


def _coth(x):
    if x < 1e-4:
        return 1.0 / x + x / 3.0
    if x > 350.0:
        return 1.0
    return 1.0 / math.tanh(x)


def _coth_kernel(beta, w, kernel):
    """Temperature kernel for the real part of the bath response."""
    if w == 0.0:
        return 0.0
    if kernel == "full":
        return _coth(beta * w / 2)
    if kernel == "quantum_fluctuation":
        # quantum part only: classical trajectories carry 2/(beta w)
        return _coth(beta * w / 2) - 2.0 / (beta * w)
    raise ValueError(f"unknown kernel {kernel!r}")


def _pair_re(w, taus, sigmas):
    """sum_i sigma_i cos(w tau_i) / w^2, series-protected near w = 0."""
    tmax = max(abs(t) for t in taus)
    if w * tmax < 1e-3:
        s2 = sum(s * t**2 for s, t in zip(sigmas, taus))
        s4 = sum(s * t**4 for s, t in zip(sigmas, taus))
        s6 = sum(s * t**6 for s, t in zip(sigmas, taus))
        return -s2 / 2 + w**2 * s4 / 24 - w**4 * s6 / 720
    return sum(s * math.cos(w * t) for s, t in zip(sigmas, taus)) / w**2


def _pair_im(w, taus, sigmas):
    """sum_i sigma_i sin(w tau_i) / w^2, series-protected near w = 0."""
    tmax = max(abs(t) for t in taus)
    if w * tmax < 1e-3:
        s3 = sum(s * t**3 for s, t in zip(sigmas, taus))
        s5 = sum(s * t**5 for s, t in zip(sigmas, taus))
        return w * (-s3 / 6 + w**2 * s5 / 120)
    return sum(s * math.sin(w * t) for s, t in zip(sigmas, taus)) / w**2


def _diag_re(w, L):
    x = w * L
    if x < 1e-3:
        return L**2 / 2 - w**2 * L**4 / 24 + w**4 * L**6 / 720
    return (1 - math.cos(x)) / w**2


def _diag_im(w, L):
    x = w * L
    if x < 1e-3:
        return w * (L**3 / 6 - w**2 * L**5 / 120)
    return (x - math.sin(x)) / w**2


def _quad_piece(f, a, b, epsabs, epsrel=1e-10):
    val, err = quad(f, a, b, limit=10_000, epsabs=epsabs, epsrel=epsrel)
    if not np.isfinite(val):
        raise QuadratureError("non-finite quadrature result")
    return val


def _tail_osc(jw, a, tau, weight, epsabs):
    """int_a^inf J(w)/w^2 * {cos,sin}(w tau) dw via QAWF."""
    f = lambda w: jw(w) / w**2
    if abs(tau) < 1e-300:
        if weight == "sin":
            return 0.0
        val, _ = quad(f, a, np.inf, limit=2000, epsabs=epsabs)
        return val
    val, _ = quad(f, a, np.inf, weight=weight, wvar=tau, limlst=200, epsabs=epsabs)
    return val


class EtaCoefficients:
    """Influence-functional coefficients eta_{kk'} for an N-step grid.

    Interior values depend only on the lag k - k'; the first and last time
    points carry half-width intervals, giving distinct endpoint classes.
    ``value(k, kp, n)`` returns eta_{kk'} for a path of n total steps
    (n defaults to N).
    """

    def __init__(self, sd, beta, dt, N, kernel="full"):
        if dt <= 0 or N < 0:
            raise ValueError("require dt > 0 and N >= 0")
        self.sd = sd
        self.beta = beta
        self.dt = dt
        self.N = N
        self.kernel = kernel
        self._cache = {}
        self._w1 = sd._tail_start(beta)
        self._has_tail = sd._cutoff() is None
        # epsabs scaled to a crude magnitude estimate of eta
        scale = max(abs(sd.evaluate(self._w1 / 40)), abs(sd.evaluate(1.0 / beta)), 1e-30)
        self._epsabs = max(1e-14 * scale * dt, 1e-300)

    # interval of a point, shifted so the earlier interval starts at 0
    @staticmethod
    def _intervals(cls_later, cls_earlier, lag, dt):
        if cls_earlier == "i":
            e = (0.0, dt / 2)
            off = 0.0
        else:  # mid
            e = (0.0, dt)
            off = dt / 2
        pos = lag * dt + off
        if cls_later == "m":
            l = (pos - dt / 2, pos + dt / 2)
        elif cls_later == "t":
            l = (pos - dt / 2, pos)
        else:
            raise ValueError("later point cannot be the initial class")
        return l, e

    def _eta_pair(self, cls_later, cls_earlier, lag):
        (a1, b1), (a2, b2) = self._intervals(cls_later, cls_earlier, lag, self.dt)
        taus = (b1 - b2, b1 - a2, a1 - b2, a1 - a2)
        sigmas = (1.0, -1.0, -1.0, 1.0)
        jw = self.sd.evaluate
        beta, kern = self.beta, self.kernel

        def f_re(w):
            return jw(w) * _coth_kernel(beta, w, kern) * _pair_re(w, taus, sigmas)

        def f_im(w):
            return jw(w) * _pair_im(w, taus, sigmas)

        re = _quad_piece(f_re, 0.0, self._w1, self._epsabs)
        im = _quad_piece(f_im, 0.0, self._w1, self._epsabs)
        if self._has_tail:
            for s, tau in zip(sigmas, taus):
                re += s * _tail_osc(jw, self._w1, tau, "cos", self._epsabs)
                im += s * _tail_osc(jw, self._w1, tau, "sin", self._epsabs)
        return (re - 1j * im) / np.pi

    def _eta_diag(self, cls):
        L = self.dt / 2 if cls in ("i", "t") else self.dt
        jw = self.sd.evaluate
        beta, kern = self.beta, self.kernel

        def f_re(w):
            return jw(w) * _coth_kernel(beta, w, kern) * _diag_re(w, L)

        def f_im(w):
            return jw(w) * _diag_im(w, L)

        re = _quad_piece(f_re, 0.0, self._w1, self._epsabs)
        im = _quad_piece(f_im, 0.0, self._w1, self._epsabs)
        if self._has_tail:
            re += _tail_osc(jw, self._w1, 0.0, "cos", self._epsabs)
            re -= _tail_osc(jw, self._w1, L, "cos", self._epsabs)
            jw_over_w, _ = quad(
                lambda w: jw(w) / w, self._w1, np.inf, limit=2000, epsabs=self._epsabs
            )
            im += L * jw_over_w - _tail_osc(jw, self._w1, L, "sin", self._epsabs)
        return (re - 1j * im) / np.pi

    def value(self, k, kp, n=None):
        """eta_{k kp} for a path with n total steps (0 <= kp <= k <= n)."""
        n = self.N if n is None else n
        if not (0 <= kp <= k <= n):
            raise ValueError(f"require 0 <= kp <= k <= n, got ({k}, {kp}, {n})")
        if n == 0:
            return 0.0 + 0.0j
        cls_k = "i" if k == 0 else ("t" if k == n else "m")
        cls_kp = "i" if kp == 0 else ("t" if kp == n else "m")
        if k == kp:
            key = ("diag", cls_k)
        else:
            key = (cls_k, cls_kp, k - kp)
        if key not in self._cache:
            try:
                if key[0] == "diag":
                    self._cache[key] = self._eta_diag(cls_k)
                else:
                    self._cache[key] = self._eta_pair(cls_k, cls_kp, k - kp)
            except Exception as exc:
                raise QuadratureError(
                    f"eta quadrature failed for (k={k}, k'={kp}): {exc}"
                ) from exc
        return self._cache[key]

    @property
    def values(self):
        """Dense lower-triangular table for the stored N."""
        table = np.zeros((self.N + 1, self.N + 1), dtype=complex)
        for k in range(self.N + 1):
            for kp in range(k + 1):
                table[k, kp] = self.value(k, kp)
        return table


def compute_eta(sd, beta, dt, N, kernel="full"):
    """Eta-coefficients for spectral density `sd` on an N-step grid."""
    return EtaCoefficients(sd, beta, dt, N, kernel=kernel)
