"""Hierarchical equations of motion for Drude-Lorentz baths, in scaled and
unscaled form, with the Ishizaki-Tanimura Markovian closure of the truncated
Matsubara tail.

The whole hierarchy is integrated as one flat state vector; the right-hand
side is a precomputed sparse linear map over (ADO index) x (vectorized rho),
with time-dependent external fields entering the free-commutator block only.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from . import integrator
from .bath import DrudeLorentzSD, matsubara_expand
from .core import is_hermitian

__all__ = ["HeomBathBinding", "enumerate_hierarchy", "propagate_heom"]


@dataclass(frozen=True)
class HeomBathBinding:
    sd: DrudeLorentzSD
    coupling_op: np.ndarray

    def __post_init__(self):
        op = np.asarray(self.coupling_op, dtype=complex)
        if not is_hermitian(op):
            raise ValueError("HEOM coupling operators must be Hermitian")
        object.__setattr__(self, "coupling_op", op)


def enumerate_hierarchy(n_env, num_modes, lmax):
    """All multi-indices n (length n_env*(num_modes+1)) with sum <= lmax.

    Returns (indices, plus_map, minus_map): integer arrays where the maps
    give the position of the raised/lowered neighbour per slot, -1 if the
    neighbour is outside the truncated set.
    """
    k = n_env * (num_modes + 1)
    indices = []
    # depth-ordered enumeration via stars and bars at each depth
    for depth in range(lmax + 1):
        if k == 0:
            if depth == 0:
                indices.append(())
            continue
        for bars in combinations(range(depth + k - 1), k - 1):
            prev = -1
            vec = []
            for b in bars:
                vec.append(b - prev - 1)
                prev = b
            vec.append(depth + k - 1 - prev - 1)
            indices.append(tuple(vec))
    pos = {idx: i for i, idx in enumerate(indices)}
    n_ado = len(indices)
    plus_map = -np.ones((n_ado, k), dtype=np.int64)
    minus_map = -np.ones((n_ado, k), dtype=np.int64)
    for i, idx in enumerate(indices):
        for s in range(k):
            up = list(idx)
            up[s] += 1
            plus_map[i, s] = pos.get(tuple(up), -1)
            if idx[s] > 0:
                dn = list(idx)
                dn[s] -= 1
                minus_map[i, s] = pos[tuple(dn)]
    return np.array(indices, dtype=np.int64).reshape(n_ado, k), plus_map, minus_map


def _left_right_superops(op):
    d = op.shape[0]
    ident = np.eye(d)
    sl = sp.csr_matrix(np.kron(op, ident))
    sr = sp.csr_matrix(np.kron(ident, op.T))
    return sl, sr


def _build_liouvillian(h0, bindings, beta, num_modes, lmax, scaled):
    d = h0.shape[0]
    n_env = len(bindings)
    indices, plus_map, minus_map = enumerate_hierarchy(n_env, num_modes, lmax)
    n_ado = indices.shape[0]
    k_slots = n_env * (num_modes + 1)

    expansions = [matsubara_expand(b.sd, beta, num_modes) for b in bindings]
    nus = np.concatenate([e.nus for e in expansions])  # slot-ordered
    cs = np.concatenate([e.cs for e in expansions])

    ident_sys = np.eye(d)
    c_h = sp.csr_matrix(np.kron(h0, ident_sys) - np.kron(ident_sys, h0.T))
    ident_ado = sp.identity(n_ado, format="csr")

    blocks = []
    # free commutator and per-ADO damping
    blocks.append(sp.kron(ident_ado, -1j * c_h))
    damping = -(indices * nus[None, :]).sum(axis=1)
    blocks.append(sp.kron(sp.diags(damping), sp.identity(d * d)))

    # Ishizaki-Tanimura closure: the truncated Matsubara tail is exactly the
    # real residual 2 lam / (beta gamma ds^2) - sum_m Re(c_m)/nu_m
    for b, exp in zip(bindings, expansions):
        xi = 2 * b.sd.lam / (beta * b.sd.gamma * b.sd.delta_s**2) - float(
            np.sum(exp.cs.real / exp.nus)
        )
        sl, sr = _left_right_superops(b.coupling_op)
        dcomm = (sl - sr) @ (sl - sr)
        blocks.append(sp.kron(ident_ado, -xi * dcomm))

    # hierarchy couplings, slot by slot
    rows = np.arange(n_ado)
    for s in range(k_slots):
        b = s // (num_modes + 1)
        sl, sr = _left_right_superops(bindings[b].coupling_op)
        c = cs[s]
        abs_c = abs(c)
        use_scaling = scaled and abs_c > 0.0

        up = plus_map[:, s]
        sel = up >= 0
        if np.any(sel):
            if use_scaling:
                w_up = np.sqrt((indices[sel, s] + 1) * abs_c)
            else:
                w_up = np.ones(sel.sum())
            p_up = sp.csr_matrix(
                (w_up, (rows[sel], up[sel])), shape=(n_ado, n_ado)
            )
            blocks.append(sp.kron(p_up, -1j * (sl - sr)))

        dn = minus_map[:, s]
        sel = dn >= 0
        if np.any(sel):
            n_s = indices[sel, s].astype(float)
            w_dn = np.sqrt(n_s / abs_c) if use_scaling else n_s
            p_dn = sp.csr_matrix(
                (w_dn, (rows[sel], dn[sel])), shape=(n_ado, n_ado)
            )
            blocks.append(sp.kron(p_dn, -1j * c * sl))
            blocks.append(sp.kron(p_dn, 1j * np.conj(c) * sr))

    coo = [blk.tocoo() for blk in blocks]
    n = n_ado * d * d
    liouv = sp.coo_matrix(
        (
            np.concatenate([b.data for b in coo]),
            (
                np.concatenate([b.row for b in coo]),
                np.concatenate([b.col for b in coo]),
            ),
        ),
        shape=(n, n),
    )
    return liouv.tocsr(), n_ado


def propagate_heom(
    h0,
    baths,
    beta,
    rho0,
    dt,
    ntimes,
    num_modes,
    lmax,
    scaled=True,
    external_fields=(),
    config=None,
):
    """Propagate rho0 with HEOM; `baths` is a list of HeomBathBinding or
    (DrudeLorentzSD, coupling op) pairs.  Returns (times, list of rho)."""
    h0 = np.asarray(h0, dtype=complex)
    d = h0.shape[0]
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (d, d):
        raise ValueError("rho0 dimension mismatch")
    bindings = [
        b if isinstance(b, HeomBathBinding) else HeomBathBinding(b[0], b[1])
        for b in baths
    ]
    for b in bindings:
        if b.coupling_op.shape != (d, d):
            raise ValueError("coupling operator dimension mismatch")

    liouv, n_ado = _build_liouvillian(h0, bindings, beta, num_modes, lmax, scaled)

    field_ops = []
    if external_fields:
        ident_ado = sp.identity(n_ado, format="csr")
        ident_sys = np.eye(d)
        for f in external_fields:
            c_op = sp.csr_matrix(
                np.kron(f.coupling_op, ident_sys) - np.kron(ident_sys, f.coupling_op.T)
            )
            field_ops.append((f.amplitude, sp.kron(ident_ado, -1j * c_op).tocsr()))

    y0 = np.zeros(n_ado * d * d, dtype=complex)
    y0[: d * d] = rho0.reshape(-1)

    if field_ops:

        def rhs(t, y):
            dy = liouv.dot(y)
            for amp, fop in field_ops:
                dy += amp(t) * fop.dot(y)
            return dy

    else:

        def rhs(t, y):
            return liouv.dot(y)

    t_grid = dt * np.arange(ntimes + 1)
    states = integrator.integrate(rhs, y0, t_grid, config)
    rhos = [y[: d * d].reshape(d, d) for y in states]
    return t_grid, rhos
