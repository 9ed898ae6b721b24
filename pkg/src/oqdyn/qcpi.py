"""Quantum-classical path integral over a harmonic solvent.

Bath initial conditions are Monte Carlo sampled from the classical Boltzmann
distribution displaced around the initial system coordinate.  Each sample
yields a trajectory of solvent-driven reference propagators; EACP applies
their ensemble average directly, QCPI additionally feeds each sequence to a
path-integral backend carrying the residual (quantum) influence functional
over kmax memory steps.
"""

from dataclasses import dataclass

import numpy as np

from . import pathint
from .bath import compute_eta
from .core import unvec, vec

__all__ = [
    "HarmonicBathSolvent",
    "PhaseSpacePoint",
    "sample_phase_space",
    "calculate_reference_propagators",
    "propagate_eacp",
    "propagate_qcpi",
]


@dataclass(frozen=True)
class PhaseSpacePoint:
    positions: np.ndarray
    momenta: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.positions, dtype=float)
        p = np.asarray(self.momenta, dtype=float)
        if x.shape != p.shape:
            raise ValueError("positions and momenta must have equal length")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "momenta", p)


@dataclass(frozen=True)
class HarmonicBathSolvent:
    beta: float
    modes: object  # DiscreteBathModes
    svals: tuple  # system-coordinate value per system basis state
    n_points: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError("n_points must be >= 1")
        object.__setattr__(self, "svals", tuple(float(s) for s in self.svals))


def sample_phase_space(solvent):
    """Classical Boltzmann samples, positions displaced around the initial
    system coordinate (svals[0]).  Each sample gets its own RNG stream
    spawned from the solvent seed, so sample i is reproducible regardless of
    how the ensemble is partitioned across workers.
    """
    w = solvent.modes.omegas
    c = solvent.modes.couplings
    x_mean = c * solvent.svals[0] / w**2
    x_sigma = 1.0 / (np.sqrt(solvent.beta) * w)
    p_sigma = 1.0 / np.sqrt(solvent.beta)
    streams = np.random.SeedSequence(solvent.seed).spawn(solvent.n_points)
    for ss in streams:
        rng = np.random.default_rng(ss)
        x = x_mean + x_sigma * rng.standard_normal(w.size)
        p = p_sigma * rng.standard_normal(w.size)
        yield PhaseSpacePoint(x, p)


def _verlet_positions(solvent, point, h, n_steps):
    """All velocity-Verlet positions x_n, n = 0..n_steps, shape (n+1, modes).

    The force is harmonic plus the constant drive from the reference system
    coordinate svals[0]; for that force the Verlet recurrence is an exact
    rotation at the shifted frequency cos(theta) = 1 - h^2 w^2 / 2, which is
    evaluated in closed form instead of stepping.
    """
    w = solvent.modes.omegas
    c = solvent.modes.couplings
    if np.any(h * w >= 2.0):
        raise ValueError("classical_dt too large: velocity-Verlet unstable (h*w >= 2)")
    eq = c * solvent.svals[0] / w**2
    y0 = point.positions - eq
    theta = np.arccos(1.0 - 0.5 * h**2 * w**2)
    n = np.arange(n_steps + 1)
    phase = np.outer(n, theta)
    amp_s = point.momenta * h / np.sin(theta)
    return eq[None, :] + y0[None, :] * np.cos(phase) + amp_s[None, :] * np.sin(phase)


def _expm_batch(h_batch, tau):
    """exp(-1j * H * tau) for a batch of Hermitian matrices (n, d, d)."""
    d = h_batch.shape[-1]
    if d == 2:
        h00 = h_batch[:, 0, 0]
        h01 = h_batch[:, 0, 1]
        h11 = h_batch[:, 1, 1]
        a0 = 0.5 * (h00 + h11).real
        az = 0.5 * (h00 - h11).real
        r = np.sqrt(az**2 + np.abs(h01) ** 2)
        cos = np.cos(r * tau)
        snc = tau * np.sinc(r * tau / np.pi)  # sin(r tau)/r, safe at r = 0
        ph = np.exp(-1j * a0 * tau)
        u = np.empty_like(h_batch)
        u[:, 0, 0] = ph * (cos - 1j * az * snc)
        u[:, 1, 1] = ph * (cos + 1j * az * snc)
        u[:, 0, 1] = ph * (-1j * h01 * snc)
        u[:, 1, 0] = ph * (-1j * np.conj(h01) * snc)
        return u
    evals, evecs = np.linalg.eigh(h_batch)
    phases = np.exp(-1j * evals * tau)
    return (evecs * phases[:, None, :]) @ np.conj(np.swapaxes(evecs, -1, -2))


def calculate_reference_propagators(h0, solvent, point, classical_dt, dt, ntimes):
    """Forward-backward step propagators along one solvent trajectory.

    The system Hamiltonian is driven by -sum_j c_j x_j(t) s_hat with x(t)
    averaged over each classical sub-step (trapezoid), sub-stepped at
    classical_dt.
    """
    h0 = np.asarray(h0, dtype=complex)
    d = h0.shape[0]
    nsub = int(round(dt / classical_dt))
    if nsub < 1 or abs(nsub * classical_dt - dt) > 1e-9 * dt:
        raise ValueError("classical_dt must divide dt")
    n_total = nsub * ntimes
    x = _verlet_positions(solvent, point, classical_dt, n_total)
    drive = 0.5 * (x[:-1] + x[1:]) @ solvent.modes.couplings  # per sub-step
    s_op = np.diag(np.asarray(solvent.svals, dtype=float))
    h_batch = h0[None, :, :] - drive[:, None, None] * s_op[None, :, :]
    u_sub = _expm_batch(h_batch, classical_dt)
    u_sub = u_sub.reshape(ntimes, nsub, d, d)
    prod = u_sub[:, 0]
    for s in range(1, nsub):
        prod = u_sub[:, s] @ prod
    return [np.kron(prod[k], prod[k].conj()) for k in range(ntimes)]


def _average_cumulative_propagators(h0, solvent, classical_dt, dt, ntimes):
    """Ensemble average of the cumulative propagators U(0 -> k dt) (x) conj."""
    d2 = np.asarray(h0).shape[0] ** 2
    avg = [np.zeros((d2, d2), dtype=complex) for _ in range(ntimes + 1)]
    for point in sample_phase_space(solvent):
        fbu = calculate_reference_propagators(h0, solvent, point, classical_dt, dt, ntimes)
        cum = np.eye(d2, dtype=complex)
        avg[0] += cum
        for k in range(ntimes):
            cum = fbu[k] @ cum
            avg[k + 1] += cum
    return [a / solvent.n_points for a in avg]


def propagate_eacp(h0, solvent, rho0, classical_dt, dt, ntimes):
    """Ensemble-averaged classical path: average the solvent-driven
    cumulative propagators over the sampled ensemble and apply to rho0."""
    eacp = _average_cumulative_propagators(h0, solvent, classical_dt, dt, ntimes)
    rho0_vec = vec(np.asarray(rho0, dtype=complex))
    times = dt * np.arange(ntimes + 1)
    return times, [unvec(e @ rho0_vec) for e in eacp]


def propagate_qcpi(
    h0,
    sd,
    solvent,
    rho0,
    classical_dt,
    dt,
    ntimes,
    kmax,
    backend=None,
    backend_args=None,
    residual=True,
):
    """Full QCPI: per sample, propagate with the path-integral backend over
    the solvent-driven reference propagators plus the residual influence
    functional (quantum memory only), then average the RDM series.

    ``residual=False`` drops the residual influence entirely (plumbing limit:
    the result then equals EACP).
    """
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    backend = backend or pathint.propagate_quapi
    args = backend_args if backend_args is not None else pathint.QuapiArgs()
    if residual:
        etas = [compute_eta(sd, solvent.beta, dt, kmax + 1, kernel="quantum_fluctuation")]
    else:
        etas = [_ZeroEta()]
    rho0 = np.asarray(rho0, dtype=complex)
    acc = None
    times = None
    for i, point in enumerate(sample_phase_space(solvent)):
        fbu = calculate_reference_propagators(h0, solvent, point, classical_dt, dt, ntimes)
        try:
            times, rhos = backend(
                fbu,
                [sd],
                solvent.beta,
                rho0,
                dt,
                ntimes,
                kmax,
                svec=np.asarray(solvent.svals, dtype=float),
                args=args,
                etas=etas,
                im_offsets=[solvent.svals[0]],
            )
        except Exception as exc:
            raise RuntimeError(f"path-integral backend failed on sample {i}") from exc
        if acc is None:
            acc = [r.astype(complex) for r in rhos]
        else:
            for k, r in enumerate(rhos):
                acc[k] += r
    return times, [a / solvent.n_points for a in acc]


class _ZeroEta:
    """Influence table of a decoupled bath (all eta vanish)."""

    def value(self, k, kp, n=None):
        return 0.0 + 0.0j
