import numpy as np
import pytest

from oqdyn import bath, heom, pathint
from oqdyn.core import SIGMA_X, SIGMA_Z


def _sd(lam=0.1, gamma=1.0):
    return bath.DrudeLorentzSD(lam=lam, gamma=gamma)


def test_hierarchy_enumeration_counts():
    # number of multi-indices with sum <= lmax is C(k + lmax, lmax)
    idx, plus, minus = heom.enumerate_hierarchy(1, 2, 3)
    assert len(idx) == 20
    assert max(int(np.sum(t)) for t in idx) <= 3
    idx, plus, minus = heom.enumerate_hierarchy(7, 2, 3)
    assert len(idx) == 2024
    # raise/lower maps are mutually inverse where defined
    idx, plus, minus = heom.enumerate_hierarchy(1, 2, 3)
    for i in range(len(idx)):
        for s in range(idx.shape[1]):
            up = plus[i, s]
            if up >= 0:
                assert minus[up, s] == i
            dn = minus[i, s]
            if dn >= 0:
                assert plus[dn, s] == i


def test_trace_preserved():
    rho0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    _, rhos = heom.propagate_heom(
        SIGMA_X, [(_sd(), SIGMA_Z)], 1.0, rho0, 0.1, 60, num_modes=2, lmax=4
    )
    assert max(abs(np.trace(r) - 1.0) for r in rhos) < 1e-9


def test_hermiticity_preserved():
    rho0 = np.array([[0.6, 0.2 - 0.3j], [0.2 + 0.3j, 0.4]], dtype=complex)
    _, rhos = heom.propagate_heom(
        SIGMA_X + 0.5 * SIGMA_Z, [(_sd(), SIGMA_Z)], 2.0, rho0, 0.1, 40,
        num_modes=2, lmax=4,
    )
    assert max(np.max(np.abs(r - r.conj().T)) for r in rhos) < 1e-8


def test_scaled_matches_unscaled():
    rho0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    out = []
    for scaled in (True, False):
        _, rhos = heom.propagate_heom(
            SIGMA_X, [(_sd(), SIGMA_Z)], 1.0, rho0, 0.1, 30,
            num_modes=2, lmax=4, scaled=scaled,
        )
        out.append(rhos)
    dev = max(np.max(np.abs(a - b)) for a, b in zip(*out))
    assert dev < 1e-8


def test_zero_coupling_reduces_to_bare_dynamics():
    rho0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    t, rhos = heom.propagate_heom(
        SIGMA_X, [(_sd(lam=0.0), SIGMA_Z)], 1.0, rho0, 0.05, 40,
        num_modes=1, lmax=1,
    )
    pops = np.array([r[0, 0].real for r in rhos])
    assert np.max(np.abs(pops - np.cos(t) ** 2)) < 1e-8


def test_matches_full_memory_path_integral():
    sd = _sd(lam=0.02, gamma=2.0)
    beta = 1.0
    dt, nt = 0.125, 24
    rho0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    _, rhos_h = heom.propagate_heom(
        SIGMA_X, [(sd, SIGMA_Z)], beta, rho0, dt, nt, num_modes=5, lmax=6
    )
    _, rhos_q = pathint.propagate_quapi(
        pathint.calculate_bare_propagators(SIGMA_X, dt, nt),
        [sd], beta, rho0, dt, nt, L=10,
    )
    dev = max(
        abs(a[0, 0].real - b[0, 0].real) for a, b in zip(rhos_h, rhos_q)
    )
    # residual dt^2 discretization bias of the path integral dominates
    assert dev < 2e-3


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        heom.propagate_heom(
            SIGMA_X, [(_sd(), np.eye(3))], 1.0, np.eye(2) / 2, 0.1, 5,
            num_modes=1, lmax=1,
        )
