import numpy as np
import pytest

from oqdyn import bath, pathint
from oqdyn.core import SIGMA_X, SIGMA_Z, ExternalField

SD = bath.ExponentialCutoffSD(xi=0.1, omega_c=7.5)
BETA = 5.0
DT = 0.25
RHO0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)


def test_bare_propagators_free_evolution():
    fbU = pathint.calculate_bare_propagators(SIGMA_X, 0.1, 5)
    assert len(fbU) == 5 and fbU[0].shape == (4, 4)
    # all steps identical without external fields
    assert max(np.max(np.abs(u - fbU[0])) for u in fbU) < 1e-14
    # one forward-backward step reproduces U rho U^dag
    rho = np.array([[0.3, 0.1j], [-0.1j, 0.7]], dtype=complex)
    import scipy.linalg as sla

    u = sla.expm(-1j * SIGMA_X * 0.1)
    direct = u @ rho @ u.conj().T
    assert np.max(np.abs((fbU[0] @ rho.reshape(-1)).reshape(2, 2) - direct)) < 1e-13


def test_bare_propagators_with_field():
    field = ExternalField(amplitude=lambda t: np.sin(t), coupling_op=SIGMA_Z)
    fbU = pathint.calculate_bare_propagators(SIGMA_X, 0.2, 4, external_fields=(field,))
    # steps now differ because the field is time dependent
    assert np.max(np.abs(fbU[1] - fbU[0])) > 1e-6
    # each step stays trace preserving
    for k in range(4):
        rho = np.array([[0.5, 0.2], [0.2, 0.5]], dtype=complex)
        out = (fbU[k] @ rho.reshape(-1)).reshape(2, 2)
        assert abs(np.trace(out) - 1.0) < 1e-12


def test_matches_brute_force_enumeration():
    n = 5
    fbU = pathint.calculate_bare_propagators(SIGMA_X, DT, n)
    etas = bath.compute_eta(SD, BETA, DT, n + 1)
    _, rhos = pathint.propagate_quapi(
        fbU, [SD], BETA, RHO0, DT, n, L=n, etas=[etas]
    )
    for k in range(n + 1):
        rho_bf = pathint.brute_force_path_sum(fbU, etas, RHO0, k)
        assert np.max(np.abs(rhos[k] - rho_bf)) < 1e-12


def test_iterative_matches_full_memory_within_memory_span():
    # with L >= bath memory, truncation is exact up to the decay of eta
    n = 12
    fbU = pathint.calculate_bare_propagators(SIGMA_X, DT, n)
    _, full = pathint.propagate_quapi(fbU, [SD], BETA, RHO0, DT, n, L=n)
    _, trunc = pathint.propagate_quapi(fbU, [SD], BETA, RHO0, DT, n, L=8)
    dev = max(np.max(np.abs(a - b)) for a, b in zip(full, trunc))
    assert dev < 1e-3


def test_trace_and_hermiticity():
    n = 20
    fbU = pathint.calculate_bare_propagators(SIGMA_X, DT, n)
    _, rhos = pathint.propagate_quapi(fbU, [SD], BETA, RHO0, DT, n, L=5)
    for r in rhos:
        assert abs(np.trace(r) - 1.0) < 1e-12
        assert np.max(np.abs(r - r.conj().T)) < 1e-12


def test_zero_coupling_reduces_to_bare():
    sd0 = bath.ExponentialCutoffSD(xi=0.0, omega_c=7.5)
    n = 16
    fbU = pathint.calculate_bare_propagators(SIGMA_X, DT, n)
    t, rhos = pathint.propagate_quapi(fbU, [sd0], BETA, RHO0, DT, n, L=4)
    pops = np.array([r[0, 0].real for r in rhos])
    assert np.max(np.abs(pops - np.cos(t) ** 2)) < 1e-12


def test_blip_decomposition_matches_quapi():
    n = 6
    fbU = pathint.calculate_bare_propagators(SIGMA_X, DT, n)
    aug_q = pathint.build_augmented_propagator(fbU, [SD], BETA, DT, n, method="quapi")
    aug_b = pathint.build_augmented_propagator(fbU, [SD], BETA, DT, n, method="blip")
    assert len(aug_q) == len(aug_b) == n + 1
    assert np.max(np.abs(aug_q[0] - np.eye(4))) == 0.0
    dev = max(np.max(np.abs(a - b)) for a, b in zip(aug_q, aug_b))
    assert dev < 1e-12


def test_augmented_propagator_applies_to_any_initial_state():
    n = 6
    fbU = pathint.calculate_bare_propagators(SIGMA_X, DT, n)
    aug = pathint.build_augmented_propagator(fbU, [SD], BETA, DT, n)
    for rho0 in (
        RHO0,
        np.array([[0.2, 0.3 - 0.1j], [0.3 + 0.1j, 0.8]], dtype=complex),
    ):
        _, rhos = pathint.propagate_quapi(fbU, [SD], BETA, rho0, DT, n, L=n)
        for k, r in enumerate(rhos):
            via_aug = (aug[k] @ rho0.reshape(-1)).reshape(2, 2)
            assert np.max(np.abs(via_aug - r)) < 1e-12


def test_filter_cutoff_preserves_result_and_trace():
    n = 16
    fbU = pathint.calculate_bare_propagators(SIGMA_X, DT, n)
    _, plain = pathint.propagate_quapi(fbU, [SD], BETA, RHO0, DT, n, L=6)
    args = pathint.QuapiArgs(filter_cutoff=1e-8)
    _, filt = pathint.propagate_quapi(fbU, [SD], BETA, RHO0, DT, n, L=6, args=args)
    dev = max(np.max(np.abs(a - b)) for a, b in zip(plain, filt))
    assert dev < 1e-6
    for r in filt:
        assert abs(np.trace(r) - 1.0) < 1e-7


def test_element_budget_enforced():
    n = 4
    fbU = pathint.calculate_bare_propagators(SIGMA_X, DT, n)
    args = pathint.QuapiArgs(element_budget=100)
    with pytest.raises(pathint.PathMemoryError):
        pathint.propagate_quapi(fbU, [SD], BETA, RHO0, DT, n, L=4, args=args)


def test_multiple_baths_compose():
    # two identical half-strength baths on the same coordinate equal one bath
    n = 8
    half = bath.ExponentialCutoffSD(xi=0.05, omega_c=7.5)
    full = bath.ExponentialCutoffSD(xi=0.1, omega_c=7.5)
    fbU = pathint.calculate_bare_propagators(SIGMA_X, DT, n)
    _, two = pathint.propagate_quapi(
        fbU, [half, half], BETA, RHO0, DT, n, L=n, svec=((1.0, -1.0), (1.0, -1.0))
    )
    _, one = pathint.propagate_quapi(fbU, [full], BETA, RHO0, DT, n, L=n)
    dev = max(np.max(np.abs(a - b)) for a, b in zip(two, one))
    assert dev < 1e-12
