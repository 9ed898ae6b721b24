"""Propagation of isolated (Hermitian or non-Hermitian) systems, optionally
with time-dependent external fields and Lindblad jump operators."""

import numpy as np

from . import integrator
from .core import ExternalField, SIGMA_M, SIGMA_Z, is_hermitian

__all__ = ["propagate_bare", "propagate_dimer_emission"]


def _field_hamiltonian(h, external_fields, t):
    if not external_fields:
        return h
    ht = h.copy()
    for f in external_fields:
        ht = ht + f.amplitude(t) * f.coupling_op
    return ht


def propagate_bare(
    hamiltonian,
    rho0,
    dt,
    ntimes,
    external_fields=(),
    jump_ops=(),
    config=None,
):
    """Integrate i drho/dt = H rho - rho H^dag, plus Lindblad dissipators.

    Without jump operators the Hamiltonian may be non-Hermitian (the trace
    then decays).  With jump operators the Lindblad form is used and the
    Hamiltonian must be Hermitian.  Returns (times, list of rho) with
    ntimes + 1 entries reported exactly at k*dt.
    """
    h = np.asarray(hamiltonian, dtype=complex)
    rho0 = np.asarray(rho0, dtype=complex)
    d = h.shape[0]
    if h.shape != (d, d) or rho0.shape != (d, d):
        raise ValueError("Hamiltonian and rho0 must be square with equal dims")
    if dt <= 0:
        raise ValueError("dt must be positive")
    jump_ops = [np.asarray(L, dtype=complex) for L in jump_ops]
    for L in jump_ops:
        if L.shape != (d, d):
            raise ValueError("jump operator dimension mismatch")
    if jump_ops and not is_hermitian(h):
        raise ValueError("Lindblad form requires a Hermitian Hamiltonian")

    if jump_ops:
        ldl = [(L, L.conj().T @ L) for L in jump_ops]

        def rhs(t, rho):
            ht = _field_hamiltonian(h, external_fields, t)
            drho = -1j * (ht @ rho - rho @ ht)
            for L, LdL in ldl:
                drho += L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)
            return drho

    else:

        def rhs(t, rho):
            ht = _field_hamiltonian(h, external_fields, t)
            return -1j * (ht @ rho - rho @ ht.conj().T)

    t_grid = dt * np.arange(ntimes + 1)
    rhos = integrator.integrate(rhs, rho0, t_grid, config)
    return t_grid, rhos


def propagate_dimer_emission(bo, se, dt=0.125, ntimes=100, config=None):
    """Excitation-transfer dimer with dephasing strength `bo` and spontaneous
    emission strength `se`, started from the |ge> state."""
    if bo < 0 or se < 0:
        raise ValueError("coupling strengths must be non-negative")
    h = np.array(
        [
            [20.0, 0.0, 0.0, 0.0],
            [0.0, 10.0, -1.0, 0.0],
            [0.0, -1.0, 10.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ],
        dtype=complex,
    )
    rho0 = np.zeros((4, 4), dtype=complex)
    rho0[1, 1] = 1.0
    ident = np.eye(2, dtype=complex)
    jumps = [
        bo * np.kron(SIGMA_Z, ident),
        bo * np.kron(ident, SIGMA_Z),
        se * np.kron(SIGMA_M, ident),
        se * np.kron(ident, SIGMA_M),
    ]
    return propagate_bare(h, rho0, dt, ntimes, jump_ops=jumps, config=config)
