"""Config-driven command line runner.

A run is described by a TOML file with [system], [[baths]], [initial_state],
[method], [simulation] and [output] sections; see the README for the schema
and per-method examples.  Results are written as CSV time series of the full
density matrix (17 significant digits, so a re-read reproduces the run
bit-exactly) with an optional SVG line plot of populations.
"""

import argparse
import os
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import bath as bath_mod
from . import empirical, heom, pathint, qcpi, redfield, ttm
from .core import create_nn_hamiltonian, create_tls_hamiltonian, units

__all__ = ["run", "compare", "main", "ConfigError"]

_NAMED_OPS = {
    "sigma_x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "sigma_y": np.array([[0.0, -1.0j], [1.0j, 0.0]]),
    "sigma_z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
    "sigma_minus": np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex),
    "sigma_plus": np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex),
}


class ConfigError(Exception):
    pass


def _req(section, key, where):
    if key not in section:
        raise ConfigError(f"missing key '{where}.{key}'")
    return section[key]


def _matrix(spec, im=None):
    m = np.array(spec, dtype=float).astype(complex)
    if im is not None:
        m = m + 1j * np.array(im, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError("matrix must be square")
    return m


def _operator(spec, where):
    if isinstance(spec, str):
        if spec not in _NAMED_OPS:
            raise ConfigError(f"{where}: unknown operator name {spec!r}")
        return _NAMED_OPS[spec].copy()
    return _matrix(spec)


def _unit_scales(tag):
    """(energy -> au, time -> au) conversion factors."""
    if tag in (None, "au"):
        return 1.0, 1.0
    if tag.replace(" ", "") in ("cm^-1,fs", "cm-1,fs"):
        return units.invcm2au, 1.0 / units.au2fs
    raise ConfigError(f"unsupported units tag {tag!r}")


def _build_system(cfg):
    sec = _req(cfg, "system", "config")
    e2au, t2au = _unit_scales(sec.get("units"))
    kind = sec.get("type", "matrix")
    if kind == "matrix":
        h = _matrix(_req(sec, "hamiltonian", "system"), sec.get("hamiltonian_im"))
    elif kind == "tls":
        h = create_tls_hamiltonian(sec.get("epsilon", 0.0), sec.get("omega", 1.0))
    elif kind == "nn":
        h = create_nn_hamiltonian(
            _req(sec, "site_energies", "system"),
            _req(sec, "coupling", "system"),
            periodic=sec.get("periodic", False),
        )
    else:
        raise ConfigError(f"system.type must be matrix|tls|nn, got {kind!r}")
    return h * e2au, e2au, t2au


def _build_sd(bsec, e2au, i):
    where = f"baths[{i}]"
    kind = _req(bsec, "type", where)
    ds = bsec.get("delta_s", 2.0)
    if kind in ("exponential", "ohmic"):
        return bath_mod.ExponentialCutoffSD(
            xi=_req(bsec, "xi", where),
            omega_c=_req(bsec, "omega_c", where) * e2au,
            n=bsec.get("n", 1.0),
            delta_s=ds,
        )
    if kind in ("drude", "drude_lorentz"):
        return bath_mod.DrudeLorentzSD(
            lam=_req(bsec, "lambda", where) * e2au,
            gamma=_req(bsec, "gamma", where) * e2au,
            delta_s=ds,
        )
    if kind == "tabulated":
        return bath_mod.TabulatedSD.from_file(_req(bsec, "path", where))
    raise ConfigError(f"{where}.type must be exponential|drude|tabulated, got {kind!r}")


def _build_baths(cfg, e2au, dim):
    out = []
    for i, bsec in enumerate(cfg.get("baths", [])):
        sd = _build_sd(bsec, e2au, i)
        op = _operator(bsec.get("coupling_op", "sigma_z"), f"baths[{i}].coupling_op")
        svec = np.array(bsec.get("svec", np.diag(op).real), dtype=float)
        if op.shape[0] != dim or svec.size != dim:
            raise ConfigError(f"baths[{i}]: operator/svec dimension mismatch")
        out.append((sd, op, svec))
    return out


def _initial_state(cfg, dim):
    sec = cfg.get("initial_state", {})
    if "rho" in sec:
        rho = _matrix(sec["rho"], sec.get("rho_im"))
        if rho.shape[0] != dim:
            raise ConfigError("initial_state.rho dimension mismatch")
        return rho
    site = sec.get("site", 0)
    if not 0 <= site < dim:
        raise ConfigError(f"initial_state.site out of range for dim {dim}")
    rho = np.zeros((dim, dim), dtype=complex)
    rho[site, site] = 1.0
    return rho


def _beta(sim, e2au):
    if "beta" in sim:
        return sim["beta"] / e2au if e2au != 1.0 else sim["beta"]
    if "temperature" in sim:
        return 1.0 / (units.kelvin2au * sim["temperature"])
    raise ConfigError("missing key 'simulation.beta' (or 'simulation.temperature')")


def _execute(cfg, seed_override=None):
    """Run a parsed config; returns (times, rhos) in config units."""
    h, e2au, t2au = _build_system(cfg)
    dim = h.shape[0]
    sim = _req(cfg, "simulation", "config")
    dt = _req(sim, "dt", "simulation") * t2au
    ntimes = int(_req(sim, "ntimes", "simulation"))
    rho0 = _initial_state(cfg, dim)
    msec = _req(cfg, "method", "config")
    name = _req(msec, "name", "method")
    baths = _build_baths(cfg, e2au, dim)

    def need_beta():
        return _beta(sim, e2au)

    if name == "bare":
        times, rhos = empirical.propagate_bare(h, rho0, dt, ntimes)
    elif name == "lindblad":
        jumps = []
        for j, jsec in enumerate(msec.get("jump_ops", [])):
            op = _operator(_req(jsec, "op", f"method.jump_ops[{j}]"), "jump op")
            jumps.append(np.sqrt(jsec.get("strength", 1.0)) * op)
        if not jumps:
            raise ConfigError("lindblad method needs method.jump_ops")
        times, rhos = empirical.propagate_bare(h, rho0, dt, ntimes, jump_ops=jumps)
    elif name == "brme":
        times, rhos = redfield.propagate_brme(
            h, [(sd, op) for sd, op, _ in baths], need_beta(), rho0, dt, ntimes
        )
    elif name == "heom":
        times, rhos = heom.propagate_heom(
            h,
            [(sd, op) for sd, op, _ in baths],
            need_beta(),
            rho0,
            dt,
            ntimes,
            num_modes=int(msec.get("num_modes", 1)),
            lmax=int(msec.get("lmax", 3)),
            scaled=msec.get("scaled", True),
        )
    elif name in ("quapi", "ttm"):
        if not baths:
            raise ConfigError(f"{name} method needs at least one bath")
        fbu = pathint.calculate_bare_propagators(h, dt, ntimes)
        sds = [sd for sd, _, _ in baths]
        svec = np.array([sv for _, _, sv in baths])
        args = pathint.QuapiArgs(filter_cutoff=msec.get("filter_cutoff", 0.0))
        if name == "quapi":
            times, rhos = pathint.propagate_quapi(
                fbu, sds, need_beta(), rho0, dt, ntimes,
                L=int(_req(msec, "L", "method")), svec=svec, args=args,
            )
        else:
            times, rhos = ttm.propagate_ttm(
                fbu, sds, need_beta(), rho0, dt, ntimes,
                svec=svec, rmax=int(_req(msec, "rmax", "method")),
                backend_args={"method": msec.get("backend", "quapi"), "args": args},
            )
    elif name in ("eacp", "qcpi"):
        if len(baths) != 1:
            raise ConfigError(f"{name} method needs exactly one bath")
        sd, _, svec = baths[0]
        modes = bath_mod.discretize(sd, int(msec.get("n_modes", 100)))
        seed = seed_override if seed_override is not None else int(msec.get("seed", 0))
        solvent = qcpi.HarmonicBathSolvent(
            beta=need_beta(), modes=modes, svals=tuple(svec),
            n_points=int(msec.get("n_points", 100)), seed=seed,
        )
        classical_dt = dt / int(msec.get("classical_substeps", 100))
        if name == "eacp":
            times, rhos = qcpi.propagate_eacp(h, solvent, rho0, classical_dt, dt, ntimes)
        else:
            times, rhos = qcpi.propagate_qcpi(
                h, sd, solvent, rho0, classical_dt, dt, ntimes,
                kmax=int(msec.get("kmax", 3)),
            )
    else:
        raise ConfigError(
            "method.name must be bare|lindblad|brme|heom|quapi|ttm|eacp|qcpi, "
            f"got {name!r}"
        )
    return np.asarray(times) / t2au, rhos


def _write_csv(path, times, rhos):
    d = rhos[0].shape[0]
    cols = ["time"]
    for i in range(d):
        for j in range(d):
            cols += [f"re_rho_{i}_{j}", f"im_rho_{i}_{j}"]
    lines = [",".join(cols)]
    for t, rho in zip(times, rhos):
        vals = [f"{t:.17g}"]
        for i in range(d):
            for j in range(d):
                vals += [f"{rho[i, j].real:.17g}", f"{rho[i, j].imag:.17g}"]
        lines.append(",".join(vals))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path):
    """Inverse of the CSV writer: returns (times, list of density matrices)."""
    with open(path) as fh:
        header = fh.readline()
        data = np.array(
            [[float(x) for x in line.split(",")] for line in fh if line.strip()]
        )
    d = int(round(np.sqrt((data.shape[1] - 1) / 2)))
    times = data[:, 0]
    rhos = [
        (row[1::2] + 1j * row[2::2]).reshape(d, d) for row in data[:, :]
    ]
    return times, rhos


def _plot(path, times, rhos, sites=None):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    d = rhos[0].shape[0]
    sites = range(d) if sites is None else sites
    fig, ax = plt.subplots()
    for i in sites:
        ax.plot(times, [r[i, i].real for r in rhos], label=f"site {i}")
    ax.set_xlabel("time")
    ax.set_ylabel("population")
    ax.legend()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _load(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(str(exc)) from exc


def run(config_path, output=None, plot=False, seed=None):
    try:
        cfg = _load(config_path)
        times, rhos = _execute(cfg, seed_override=seed)
    except (ConfigError, ValueError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = cfg.get("output", {})
    csv_path = output or out.get("csv", "run.csv")
    _write_csv(csv_path, times, rhos)
    if plot or out.get("plot", False):
        _plot(os.path.splitext(csv_path)[0] + ".svg", times, rhos, out.get("observables"))
    print(f"wrote {csv_path} ({len(times)} rows)")
    return 0


def compare(config_a, config_b, tolerance, seed=None):
    try:
        ta, ra = _execute(_load(config_a), seed_override=seed)
        tb, rb = _execute(_load(config_b), seed_override=seed)
    except (ConfigError, ValueError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if len(ta) != len(tb) or not np.allclose(ta, tb) or ra[0].shape != rb[0].shape:
        print("error: time grids or dimensions do not match", file=sys.stderr)
        return 2
    dev = np.array([a - b for a, b in zip(ra, rb)])
    d = ra[0].shape[0]
    worst = 0.0
    for i in range(d):
        for j in range(d):
            mx = np.abs(dev[:, i, j]).max()
            rms = np.sqrt(np.mean(np.abs(dev[:, i, j]) ** 2))
            worst = max(worst, mx)
            print(f"rho[{i},{j}]: max-abs {mx:.3e}  rms {rms:.3e}")
    print(f"overall max-abs deviation {worst:.3e} (tolerance {tolerance:.3e})")
    return 0 if worst <= tolerance else 1


def main(argv=None):
    nthreads = os.environ.get("OQDYN_NUM_THREADS")
    if nthreads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, nthreads)

    parser = argparse.ArgumentParser(prog="oqdyn", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run a config and write CSV output")
    p_run.add_argument("config")
    p_run.add_argument("--output", help="CSV output path (overrides config)")
    p_run.add_argument("--plot", action="store_true")
    p_run.add_argument("--seed", type=int)
    p_cmp = sub.add_parser("compare", help="run two configs and compare results")
    p_cmp.add_argument("config_a")
    p_cmp.add_argument("config_b")
    p_cmp.add_argument("--tol", type=float, default=1e-8)
    p_cmp.add_argument("--seed", type=int)
    ns = parser.parse_args(argv)
    if ns.cmd == "run":
        return run(ns.config, output=ns.output, plot=ns.plot, seed=ns.seed)
    return compare(ns.config_a, ns.config_b, ns.tol, seed=ns.seed)


if __name__ == "__main__":
    sys.exit(main())
