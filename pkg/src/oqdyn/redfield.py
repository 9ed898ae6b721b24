"""Bloch-Redfield master equation in the system eigenbasis.

The relaxation tensor is evaluated with the temperature-weighted one-sided
bath spectrum S(w) = J(w) (coth(beta w / 2) + 1) / 2 for w > 0, extended to
negative frequencies by detailed balance S(-w) = exp(-beta w) S(w) and to
w = 0 by its limit.  This choice makes the generator relax toward the
thermal state of the system Hamiltonian.
"""

from dataclasses import dataclass

import numpy as np

from . import integrator
from .core import is_hermitian

__all__ = ["RedfieldTensor", "bath_spectrum", "build_redfield_tensor", "propagate_brme"]


def bath_spectrum(sd, beta, omega):
    """One-sided bath spectral function with detailed-balance extension."""
    w = float(omega)
    if abs(w) < 1e-12:
        eps = 1e-7
        return sd.evaluate(eps) / (beta * eps)
    aw = abs(w)
    x = beta * aw / 2
    coth = 1.0 if x > 350 else 1.0 / np.tanh(x)
    s_pos = sd.evaluate(aw) * (coth + 1.0) / 2.0
    if w > 0:
        return s_pos
    return np.exp(-beta * aw) * s_pos if beta * aw < 700 else 0.0


def _deterministic_eig(h):
    """Eigendecomposition with a fixed eigenvector phase convention: the
    largest-magnitude component of each vector is made real and positive."""
    evals, evecs = np.linalg.eigh(h)
    for i in range(evecs.shape[1]):
        j = np.argmax(np.abs(evecs[:, i]))
        phase = evecs[j, i] / abs(evecs[j, i])
        evecs[:, i] = evecs[:, i] / phase
    return evals, evecs


@dataclass(frozen=True)
class RedfieldTensor:
    dim: int
    entries: np.ndarray  # R_abcd in the eigenbasis
    eigen_frequencies: np.ndarray  # w_ab = E_a - E_b
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns; site basis -> eigenbasis transform


def build_redfield_tensor(h0, baths, beta):
    """Redfield tensor for `baths`, a list of (spectral density, coupling op).

    Coupling operators are given in the site basis and must be Hermitian.
    """
    h0 = np.asarray(h0, dtype=complex)
    if not is_hermitian(h0):
        raise ValueError("system Hamiltonian must be Hermitian")
    d = h0.shape[0]
    evals, evecs = _deterministic_eig(h0)
    omega = evals[:, None] - evals[None, :]

    r = np.zeros((d, d, d, d), dtype=complex)
    for sd, op in baths:
        op = np.asarray(op, dtype=complex)
        if not is_hermitian(op):
            raise ValueError("bath coupling operators must be Hermitian")
        s = evecs.conj().T @ op @ evecs
        spec = np.empty((d, d))
        for x in range(d):
            for y in range(d):
                spec[x, y] = bath_spectrum(sd, beta, evals[x] - evals[y])
        for a in range(d):
            for b in range(d):
                for c in range(d):
                    for e in range(d):
                        term = 0.0 + 0.0j
                        if b == e:
                            term += np.sum(s[a, :] * s[:, c] * spec[c, :])
                        term -= s[a, c] * s[e, b] * spec[c, a]
                        if a == c:
                            term += np.sum(s[e, :] * s[:, b] * spec[e, :])
                        term -= s[a, c] * s[e, b] * spec[e, b]
                        r[a, b, c, e] += -0.5 * term
    return RedfieldTensor(
        dim=d,
        entries=r,
        eigen_frequencies=omega,
        eigenvalues=evals,
        eigenvectors=evecs,
    )


def propagate_brme(h0, baths, beta, rho0, dt, ntimes, config=None):
    """Propagate rho under d rho_ab/dt = -i w_ab rho_ab + sum R_abcd rho_cd.

    Input and output density matrices are in the site basis.
    """
    tensor = build_redfield_tensor(h0, baths, beta)
    u = tensor.eigenvectors
    rho_e = u.conj().T @ np.asarray(rho0, dtype=complex) @ u
    omega = tensor.eigen_frequencies
    r = tensor.entries

    def rhs(t, rho):
        return -1j * omega * rho + np.einsum("abcd,cd->ab", r, rho)

    t_grid = dt * np.arange(ntimes + 1)
    rhos_e = integrator.integrate(rhs, rho_e, t_grid, config)
    rhos = [u @ re @ u.conj().T for re in rhos_e]
    return t_grid, rhos
