"""Transfer tensor method.

Learns the memory kernel of a reduced dynamics from a short series of exact
augmented propagators E(k dt) and extrapolates arbitrarily far in time via
E_k = sum_m T_m E_{k-m}.
"""

from dataclasses import dataclass

import numpy as np

from . import pathint
from .core import unvec, vec

__all__ = ["TransferTensors", "build_transfer_tensors", "propagate_ttm"]


@dataclass(frozen=True)
class TransferTensors:
    tensors: list  # T_1 .. T_rmax, each d^2 x d^2
    rmax: int
    dt: float


def build_transfer_tensors(aug_propagators, rmax, dt=1.0):
    """T_1 = E_1;  T_k = E_k - sum_{m=1}^{k-1} T_m E_{k-m}.

    ``aug_propagators`` lists E(k dt) starting with the identity at k=0.
    """
    e = [np.asarray(x, dtype=complex) for x in aug_propagators]
    if len(e) < rmax + 1:
        raise ValueError(f"need at least {rmax + 1} augmented propagators, got {len(e)}")
    tensors = []
    for k in range(1, rmax + 1):
        t = e[k].copy()
        for m in range(1, k):
            t -= tensors[m - 1] @ e[k - m]
        tensors.append(t)
    return TransferTensors(tensors=tensors, rmax=rmax, dt=dt)


def propagate_ttm(
    fbU,
    sds,
    beta,
    rho0,
    dt,
    ntimes,
    svec=(1.0, -1.0),
    rmax=1,
    backend=None,
    backend_args=None,
):
    """Propagate rho0 for ntimes steps with transfer tensors learned from
    rmax exact augmented propagators.

    ``backend`` builds the short-time propagator series; defaults to
    pathint.build_augmented_propagator.  A precomputed series can be passed
    directly as ``backend`` (any list of length >= rmax + 1).
    """
    if isinstance(backend, (list, tuple)):
        series = list(backend)
    else:
        builder = backend or pathint.build_augmented_propagator
        kwargs = dict(backend_args or {})
        series = builder(fbU, sds, beta, dt, min(rmax, ntimes), svec=svec, **kwargs)
    e = [np.asarray(x, dtype=complex) for x in series]

    n_known = min(rmax, ntimes)
    tt = build_transfer_tensors(e, n_known, dt=dt) if n_known >= 1 else None
    # reconstruct/extrapolate the full propagator series
    full = list(e[: n_known + 1])
    for k in range(n_known + 1, ntimes + 1):
        acc = np.zeros_like(e[0])
        for m in range(1, tt.rmax + 1):
            acc += tt.tensors[m - 1] @ full[k - m]
        full.append(acc)

    rho0_vec = vec(np.asarray(rho0, dtype=complex))
    times = dt * np.arange(ntimes + 1)
    rhos = [unvec(ek @ rho0_vec) for ek in full]
    return times, rhos
