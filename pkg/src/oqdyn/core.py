"""Shared operators, states, units and convenience constructors.

Operators and density matrices are plain complex numpy arrays. Density
matrices are vectorized row-major, so a forward-backward propagator acts as
``E @ vec(rho)`` with ``vec(A rho B) = (A kron B.T) vec(rho)``.

Internal units are atomic-style with hbar = 1; conversion factors for
spectroscopic units live in :data:`units`.
"""

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "units",
    "SIGMA_X",
    "SIGMA_Z",
    "SIGMA_M",
    "ExternalField",
    "create_tls_hamiltonian",
    "create_nn_hamiltonian",
    "vec",
    "unvec",
    "trace_functional",
    "is_hermitian",
    "apply_propagator",
]


@dataclass(frozen=True)
class UnitTable:
    invcm2au: float = 4.55633e-6
    au2fs: float = 0.02418884254
    kelvin2au: float = 3.166811563e-6  # Boltzmann constant, hartree / K


units = UnitTable()

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_M = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)


@dataclass(frozen=True)
class ExternalField:
    """Time-dependent drive ``V(t) * coupling_op`` added to the Hamiltonian."""

    amplitude: Callable[[float], float]
    coupling_op: np.ndarray

    def __post_init__(self):
        op = np.asarray(self.coupling_op, dtype=complex)
        if not is_hermitian(op):
            raise ValueError("external-field coupling operator must be Hermitian")
        object.__setattr__(self, "coupling_op", op)


def create_tls_hamiltonian(epsilon=0.0, omega=1.0):
    """Two-level Hamiltonian ``epsilon*sigma_z - omega*sigma_x`` (hbar = 1)."""
    return epsilon * SIGMA_Z - omega * SIGMA_X


def create_nn_hamiltonian(site_energies, coupling, periodic=False):
    """Nearest-neighbour tight-binding Hamiltonian.

    Periodic closure adds the corner elements and requires at least three
    sites; with fewer the corner would duplicate the tridiagonal band.
    """
    energies = np.asarray(site_energies, dtype=complex)
    n = len(energies)
    if n < 1:
        raise ValueError("need at least one site")
    if periodic and n < 3:
        raise ValueError("periodic closure requires at least 3 sites")
    h = np.diag(energies)
    for i in range(n - 1):
        h[i, i + 1] = coupling
        h[i + 1, i] = coupling
    if periodic:
        h[0, n - 1] = coupling
        h[n - 1, 0] = coupling
    return h


def vec(rho):
    """Row-major vectorization of a d x d matrix."""
    return np.asarray(rho, dtype=complex).reshape(-1)


def unvec(v):
    v = np.asarray(v)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ValueError(f"vector of length {v.size} is not a vectorized square matrix")
    return v.reshape(d, d)


def trace_functional(dim):
    """Row vector w with ``w @ vec(rho) = Tr rho``."""
    return np.eye(dim, dtype=complex).reshape(-1)


def is_hermitian(op, tol=1e-12):
    op = np.asarray(op)
    return np.allclose(op, op.conj().T, atol=tol, rtol=0.0)


def apply_propagator(propagators: Sequence[np.ndarray], rho0, dt, ntimes):
    """Apply augmented propagators E(k dt), k = 0..ntimes, to rho0.

    ``propagators[k]`` must be the cumulative d^2 x d^2 map from t = 0 to
    t = k*dt (entry 0 is the identity).  Returns (times, list of rho).
    """
    rho0 = np.asarray(rho0, dtype=complex)
    d = rho0.shape[0]
    if rho0.shape != (d, d):
        raise ValueError("rho0 must be square")
    if len(propagators) < ntimes + 1:
        raise ValueError(
            f"need {ntimes + 1} propagators (including the k=0 identity), got {len(propagators)}"
        )
    v0 = vec(rho0)
    rhos = []
    for k in range(ntimes + 1):
        e = np.asarray(propagators[k])
        if e.shape != (d * d, d * d):
            raise ValueError(
                f"propagator {k} has shape {e.shape}, expected {(d * d, d * d)}"
            )
        rhos.append(unvec(e @ v0))
    times = dt * np.arange(ntimes + 1)
    return times, rhos


def accumulate_propagators(step_propagators, ntimes=None):
    """Turn per-step forward-backward propagators into cumulative E(k dt).

    Entry k of the result is ``U_{k-1} ... U_0``; entry 0 is the identity.
    """
    if ntimes is None:
        ntimes = len(step_propagators)
    d2 = step_propagators[0].shape[0]
    out = [np.eye(d2, dtype=complex)]
    for k in range(ntimes):
        out.append(step_propagators[k] @ out[-1])
    return out
