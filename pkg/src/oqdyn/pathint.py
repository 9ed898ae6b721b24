"""QuAPI-family path integrals.

All methods work on forward-backward (FB) indices alpha = i*d + j labelling
|s_i+><s_j-| of the vectorized density matrix.  The influence functional
for a pair of time points (k later, k' earlier) contributes per bath

    exp(-(s+_k - s-_k) (eta_{kk'} s+_k' - conj(eta_{kk'}) s-_k'))

with the system coordinates s read off the per-bath ``svec``.  Memory-
truncated iterative propagation keeps a sliding window of L + 1 time points.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .bath import compute_eta
from .core import unvec, vec

__all__ = [
    "QuapiArgs",
    "PathMemoryError",
    "calculate_bare_propagators",
    "propagate_quapi",
    "build_augmented_propagator",
    "brute_force_path_sum",
]


class PathMemoryError(MemoryError):
    pass


@dataclass
class QuapiArgs:
    filter_cutoff: float = 0.0  # relative amplitude below which paths are dropped
    element_budget: int = 2**26  # refuse tensors larger than this


def calculate_bare_propagators(hamiltonian, dt, ntimes, external_fields=(), substeps=100):
    """Per-step forward-backward propagators U_k (x) conj(U_k).

    With external fields the step propagator is a midpoint-rule time-ordered
    product over `substeps` sub-intervals.
    """
    h = np.asarray(hamiltonian, dtype=complex)
    out = []
    if not external_fields:
        u = expm(-1j * h * dt)
        fb = np.kron(u, u.conj())
        return [fb.copy() for _ in range(ntimes)]
    for k in range(ntimes):
        u = np.eye(h.shape[0], dtype=complex)
        delta = dt / substeps
        for s in range(substeps):
            t_mid = k * dt + (s + 0.5) * delta
            ht = h.copy()
            for f in external_fields:
                ht += f.amplitude(t_mid) * f.coupling_op
            u = expm(-1j * ht * delta) @ u
        out.append(np.kron(u, u.conj()))
    return out


# ---------------------------------------------------------------------------
# influence-factor tables


def _normalize_svec(svec, n_baths, d):
    arr = np.asarray(svec, dtype=float)
    if arr.ndim == 1:
        arr = np.tile(arr, (n_baths, 1))
    if arr.shape != (n_baths, d):
        raise ValueError(f"svec must have shape ({n_baths}, {d})")
    return arr


class _Influence:
    """Pair/diagonal influence factors combined over baths, keyed by the
    endpoint classes ('i' initial, 'm' interior, 't' terminal) and lag."""

    def __init__(self, etas, svecs, d, im_offsets=None):
        self.etas = etas
        self.d = d
        self.sp = [np.repeat(sv, d) for sv in svecs]  # s+ per FB index
        self.sm = [np.tile(sv, d) for sv in svecs]  # s- per FB index
        self.ds = [p - m for p, m in zip(self.sp, self.sm)]
        # reference coordinate subtracted from the imaginary (response) part;
        # nonzero only when classical reference trajectories already carry the
        # response to a fixed system coordinate (QCPI)
        self.off = list(im_offsets) if im_offsets is not None else [0.0] * len(etas)
        self._cache = {}

    def earlier_vec(self, b, eta):
        """Coefficient vector over the earlier index: the exponent is
        -ds_later * (Re(eta) ds + i Im(eta) (s+ + s- - 2 ref))."""
        return eta.real * self.ds[b] + 1j * eta.imag * (
            self.sp[b] + self.sm[b] - 2.0 * self.off[b]
        )

    def _eta(self, b, cls_later, cls_earlier, lag):
        # synthetic (k, k', n) picking out the requested classes
        if cls_later == "m" and cls_earlier == "m":
            return self.etas[b].value(lag + 1, 1, lag + 2)
        if cls_later == "m" and cls_earlier == "i":
            return self.etas[b].value(lag, 0, lag + 1)
        if cls_later == "t" and cls_earlier == "m":
            return self.etas[b].value(lag + 1, 1, lag + 1)
        if cls_later == "t" and cls_earlier == "i":
            return self.etas[b].value(lag, 0, lag)
        raise ValueError((cls_later, cls_earlier))

    def _eta_diag_bath(self, b, cls):
        if cls == "i":
            return self.etas[b].value(0, 0, 1)
        if cls == "m":
            return self.etas[b].value(1, 1, 2)
        if cls == "t":
            return self.etas[b].value(1, 1, 1)
        raise ValueError(cls)

    def pair(self, cls_later, cls_earlier, lag):
        """Matrix F[alpha_later, alpha_earlier]."""
        key = ("p", cls_later, cls_earlier, lag)
        if key not in self._cache:
            f = np.ones((self.d**2, self.d**2), dtype=complex)
            for b in range(len(self.etas)):
                eta = self._eta(b, cls_later, cls_earlier, lag)
                f *= np.exp(-np.outer(self.ds[b], self.earlier_vec(b, eta)))
            self._cache[key] = f
        return self._cache[key]

    def diag(self, cls):
        """Vector G[alpha] for the same-point factor."""
        key = ("d", cls)
        if key not in self._cache:
            g = np.ones(self.d**2, dtype=complex)
            for b in range(len(self.etas)):
                eta = self._eta_diag_bath(b, cls)
                g *= np.exp(-self.ds[b] * self.earlier_vec(b, eta))
            self._cache[key] = g
        return self._cache[key]


def _bcast(mat, axis_earlier, axis_later, ndim, d2):
    """Reshape F[later, earlier] for broadcasting over a path tensor."""
    shape = [1] * ndim
    shape[axis_earlier] = d2
    shape[axis_later] = d2
    return np.ascontiguousarray(mat.T).reshape(shape)


def _bcast_vec(v, axis, ndim, d2):
    shape = [1] * ndim
    shape[axis] = d2
    return v.reshape(shape)


def _prepare(fbU, sds, beta, dt, L, svec, etas, im_offsets=None):
    d2 = fbU[0].shape[0]
    d = int(round(np.sqrt(d2)))
    sds = list(sds)
    svecs = _normalize_svec(svec, len(sds), d)
    if etas is None:
        etas = [compute_eta(sd, beta, dt, max(L + 1, 1)) for sd in sds]
    infl = _Influence(etas, svecs, d, im_offsets=im_offsets)
    return d, infl


def _check_budget(n_elements, budget, what):
    if n_elements > budget:
        raise PathMemoryError(
            f"{what} needs {n_elements} path-tensor elements, over the budget of {budget}"
        )


def _readout_correction(infl, n_axes, window_lags, d2):
    """Tensor converting propagation-class factors of the newest point into
    terminal-class factors (applied on a copy at readout)."""
    last = n_axes - 1
    corr = np.ones((1,) * n_axes, dtype=complex)
    corr = corr * _bcast_vec(infl.diag("t") / infl.diag("m"), last, n_axes, d2)
    for j, cls_earlier in window_lags:
        ratio = infl.pair("t", cls_earlier, j) / infl.pair("m", cls_earlier, j)
        corr = corr * _bcast(ratio, last - j, last, n_axes, d2)
    return corr


def _quapi_sweep(fbU, infl, rho0_vec, ntimes, L, args, keep_initial_axis=False):
    """Shared QuAPI engine.

    Yields, for every step n = 0..ntimes, the summed path tensor: a d^2
    vector (rho) when ``keep_initial_axis`` is false, else a d^2 x d^2 matrix
    (augmented propagator columns over alpha_0).
    """
    d2 = fbU[0].shape[0]
    cutoff = args.filter_cutoff

    a = infl.diag("i").copy()
    if not keep_initial_axis:
        a = a * rho0_vec
    # step 0 output
    if keep_initial_axis:
        yield np.eye(d2, dtype=complex)
    else:
        yield rho0_vec.copy()

    window_corr = None
    window_w = None

    for n in range(1, ntimes + 1):
        grow = n <= L
        if grow:
            ndim = n + 1
            m = _bcast(fbU[n - 1], ndim - 2, ndim - 1, ndim, d2)
            a = a[..., None] * m
            a = a * _bcast_vec(infl.diag("m"), ndim - 1, ndim, d2)
            for j in range(1, n + 1):
                cls_e = "i" if n - j == 0 else "m"
                a = a * _bcast(infl.pair("m", cls_e, j), ndim - 1 - j, ndim - 1, ndim, d2)
        else:
            ndim = L + 1
            if window_w is None:
                w = np.ones((1,) * ndim, dtype=complex)
                w = w * _bcast_vec(infl.diag("m"), ndim - 1, ndim, d2)
                for j in range(1, L + 1):
                    w = w * _bcast(
                        infl.pair("m", "m", j), ndim - 1 - j, ndim - 1, ndim, d2
                    )
                window_w = w
            a = a.sum(axis=0)[..., None] * window_w
            a = a * _bcast(fbU[n - 1], ndim - 2, ndim - 1, ndim, d2)

        if cutoff > 0.0:
            peak = np.abs(a).max()
            if peak > 0.0:
                a[np.abs(a) < cutoff * peak] = 0.0

        # readout with terminal-class corrections on a copy
        if grow:
            lags = [(j, "i" if n - j == 0 else "m") for j in range(1, n + 1)]
            corr = _readout_correction(infl, ndim, lags, d2)
        else:
            if window_corr is None:
                lags = [(j, "m") for j in range(1, L + 1)]
                window_corr = _readout_correction(infl, ndim, lags, d2)
            corr = window_corr
        r = a * corr
        if keep_initial_axis:
            axes = tuple(range(1, ndim - 1))
            out = r.sum(axis=axes) if axes else r
            yield out.T  # [alpha_n, alpha_0]
        else:
            yield r.reshape(-1, d2).sum(axis=0)


def propagate_quapi(
    fbU,
    sds,
    beta,
    rho0,
    dt,
    ntimes,
    L,
    svec=(1.0, -1.0),
    args=None,
    etas=None,
    im_offsets=None,
):
    """Iterative QuAPI propagation with memory length L.

    Exact (full path sum) for the first L steps, then sliding-window
    iteration.  Returns (times, list of rho).
    """
    args = args or QuapiArgs()
    if L < 1:
        raise ValueError("memory length L must be >= 1")
    if len(fbU) < ntimes:
        raise ValueError("need at least ntimes forward-backward propagators")
    d, infl = _prepare(fbU, sds, beta, dt, L, svec, etas, im_offsets)
    _check_budget((d * d) ** (min(L, ntimes) + 1), args.element_budget, f"QuAPI with L={L}")
    rho0_vec = vec(np.asarray(rho0, dtype=complex))
    rhos = [
        unvec(v)
        for v in _quapi_sweep(fbU, infl, rho0_vec, ntimes, L, args)
    ]
    times = dt * np.arange(ntimes + 1)
    return times, rhos


def build_augmented_propagator(
    fbU,
    sds,
    beta,
    dt,
    N,
    svec=(1.0, -1.0),
    method="quapi",
    args=None,
    etas=None,
):
    """Exact augmented propagators E(k dt), k = 0..N (entry 0 is identity).

    ``method='quapi'`` enumerates all forward-backward paths (full memory);
    ``method='blip'`` enumerates blip configurations and sums the sojourn
    segments by matrix products.  Both are exact and agree to rounding.
    """
    args = args or QuapiArgs()
    if len(fbU) < N:
        raise ValueError("need at least N forward-backward propagators")
    d, infl = _prepare(fbU, sds, beta, dt, N, svec, etas)
    if method == "quapi":
        _check_budget((d * d) ** (N + 1), args.element_budget, f"augmented QuAPI N={N}")
        rho0_vec = np.zeros(d * d, dtype=complex)  # unused
        return list(
            _quapi_sweep(fbU, infl, rho0_vec, N, N, args, keep_initial_axis=True)
        )
    if method == "blip":
        return _blip_augmented(fbU, infl, N, args)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# blip decomposition


def _blip_augmented(fbU, infl, N, args):
    d2 = infl.d**2
    nb = len(infl.etas)
    sojourn = np.ones(d2, dtype=bool)
    for b in range(nb):
        sojourn &= infl.ds[b] == 0.0
    blips = np.nonzero(~sojourn)[0]
    _check_budget((1 + blips.size) ** (N + 1), args.element_budget, f"blips N={N}")

    out = [np.eye(d2, dtype=complex)]
    for n in range(1, N + 1):
        out.append(_blip_single(fbU, infl, n, sojourn, blips))
    return out


def _blip_eta(infl, b, k, kp, n):
    cls_k = "i" if k == 0 else ("t" if k == n else "m")
    cls_kp = "i" if kp == 0 else "m"
    if k == kp:
        return infl._eta_diag_bath(b, cls_k)
    return infl._eta(b, cls_k, cls_kp, k - kp)


def _blip_single(fbU, infl, n, sojourn, blips):
    """One augmented propagator E(n dt) by blip-configuration enumeration."""
    d2 = infl.d**2
    nb = len(infl.etas)
    e_out = np.zeros((d2, d2), dtype=complex)
    points = list(range(n + 1))

    # enumerate assignments: each point is either sojourn-summed (None) or a
    # specific blip value
    def configs(i, current):
        if i == len(points):
            yield tuple(current)
            return
        current.append(None)
        yield from configs(i + 1, current)
        current.pop()
        for v in blips:
            current.append(int(v))
            yield from configs(i + 1, current)
            current.pop()

    for cfg in configs(0, []):
        q = [(k, v) for k, v in zip(points, cfg) if v is not None]
        # scalar: blip-blip pair factors and blip diagonal factors
        scalar = 1.0 + 0.0j
        for idx, (k, v) in enumerate(q):
            for b in range(nb):
                eta = _blip_eta(infl, b, k, k, n)
                scalar *= np.exp(-infl.ds[b][v] * infl.earlier_vec(b, eta)[v])
            for kp, vp in q[:idx]:
                for b in range(nb):
                    eta = _blip_eta(infl, b, k, kp, n)
                    scalar *= np.exp(-infl.ds[b][v] * infl.earlier_vec(b, eta)[vp])
        # per-point diagonal weights: sojourn points restricted to the
        # sojourn set and dressed by later blips; blip points are selectors
        weights = []
        for k, v in zip(points, cfg):
            if v is not None:
                u = np.zeros(d2, dtype=complex)
                u[v] = 1.0
            else:
                u = sojourn.astype(complex).copy()
                for kq, vq in q:
                    if kq > k:
                        for b in range(nb):
                            eta = _blip_eta(infl, b, kq, k, n)
                            u *= np.exp(-infl.ds[b][vq] * infl.earlier_vec(b, eta))
                u *= sojourn
            weights.append(u)
        mat = np.diag(weights[0])
        for k in range(n):
            mat = fbU[k] @ mat
            mat = weights[k + 1][:, None] * mat
        e_out += scalar * mat
    return e_out


# ---------------------------------------------------------------------------
# brute-force oracle


def brute_force_path_sum(fbU, etas, rho0, N, svec=(1.0, -1.0), element_budget=2**26):
    """Direct evaluation of the discretized path integral at time N dt.

    ``etas`` is an EtaCoefficients table or a list of them (one per bath).
    Deliberately dumb: loops over every forward-backward path.
    """
    if not isinstance(etas, (list, tuple)):
        etas = [etas]
    rho0 = np.asarray(rho0, dtype=complex)
    d = rho0.shape[0]
    d2 = d * d
    if N == 0:
        return rho0.copy()
    if d2 ** (N + 1) > element_budget:
        raise PathMemoryError(
            f"brute force needs {d2 ** (N + 1)} paths, over the budget of {element_budget}"
        )
    svecs = _normalize_svec(svec, len(etas), d)
    sp = [np.repeat(sv, d) for sv in svecs]
    sm = [np.tile(sv, d) for sv in svecs]
    ds = [p - m for p, m in zip(sp, sm)]

    # pairwise influence lookup tables F[(k, kp)][alpha_k, alpha_kp]
    tables = {}
    for k in range(N + 1):
        for kp in range(k + 1):
            f = np.ones((d2, d2), dtype=complex)
            for b, eta_tab in enumerate(etas):
                eta = eta_tab.value(k, kp, N)
                f *= np.exp(
                    -np.outer(ds[b], eta * sp[b] - np.conj(eta) * sm[b])
                )
            tables[(k, kp)] = f

    rho0_vec = vec(rho0)
    out = np.zeros(d2, dtype=complex)
    for path in np.ndindex(*([d2] * (N + 1))):
        amp = rho0_vec[path[0]]
        if amp == 0.0:
            continue
        for k in range(N):
            amp *= fbU[k][path[k + 1], path[k]]
        for k in range(N + 1):
            for kp in range(k + 1):
                amp *= tables[(k, kp)][path[k], path[kp]]
        out[path[N]] += amp
    return unvec(out)
