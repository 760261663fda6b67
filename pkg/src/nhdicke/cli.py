"""Command-line front end that writes plot-ready CSV or JSON tables.

Usage: nhdicke SUBCOMMAND [--config FILE] [--key value ...]

Parameters come from a flat ``key = value`` file and are overridden by
flags. Grids use ``start:stop:steps`` (inclusive); ``log-*`` grids are
exponents of ten. Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

OUTPUT_ENV = "NHDICKE_OUTPUT_DIR"
REQUIRED = object()


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Values and formatting

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, Grid):
        return str(x)
    return str(x)


def json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (list, tuple, np.ndarray)):
        return [json_value(v) for v in x]
    if isinstance(x, Grid):
        return str(x)
    return x


@dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    steps: int
    log: bool = False

    @classmethod
    def parse(cls, text: str, log: bool = False) -> "Grid":
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid {text!r} is not start:stop:steps")
        try:
            start, stop, steps = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ConfigError(f"grid {text!r}: {exc}") from None
        if not (math.isfinite(start) and math.isfinite(stop)):
            raise ConfigError(f"grid {text!r} has non-finite bounds")
        if steps < 1 or (steps == 1 and start != stop):
            raise ConfigError(f"grid {text!r}: a swept axis needs at least 2 steps")
        return cls(start, stop, steps, log)

    def values(self) -> np.ndarray:
        v = np.linspace(self.start, self.stop, self.steps)
        return 10.0 ** v if self.log else v

    def __str__(self) -> str:
        return f"{fmt(self.start)}:{fmt(self.stop)}:{self.steps}"


def _convert(key: str, kind, text: str):
    try:
        if kind is float:
            v = float(text)
            if not math.isfinite(v):
                raise ValueError("not finite")
            return v
        if kind is int:
            return int(text)
        if kind is bool:
            low = text.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError("expected a boolean")
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot read {text!r} ({exc})") from None
    if kind == "grid":
        return Grid.parse(text)
    if kind == "loggrid":
        return Grid.parse(text, log=True)
    if isinstance(kind, tuple):
        if text not in kind:
            raise ConfigError(f"{key}: {text!r} not in {{{', '.join(kind)}}}")
        return text
    raise AssertionError(kind)


# ---------------------------------------------------------------------------
# Tables and output

@dataclass
class Table:
    columns: list
    rows: list
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    params: dict
    output: Path
    fmt: str
    jobs: int = 1


def render(cfg: RunConfig, table: Table) -> str:
    if cfg.fmt == "json":
        doc = {
            "program": f"nhdicke {__version__}",
            "subcommand": cfg.subcommand,
            "config": {k: json_value(cfg.params[k]) for k in sorted(cfg.params)},
            "meta": {k: json_value(v) for k, v in table.meta.items()},
            "columns": list(table.columns),
            "rows": [[json_value(v) for v in row] for row in table.rows],
        }
        return json.dumps(doc, indent=1, allow_nan=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# nhdicke {__version__} {cfg.subcommand}\n")
    for k in sorted(cfg.params):
        buf.write(f"# {k} = {fmt(cfg.params[k])}\n")
    for k, v in table.meta.items():
        if isinstance(v, (list, tuple, np.ndarray)):
            v = " ".join(fmt(x) for x in v)
        buf.write(f"# meta {k} = {fmt(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def pmap(fn, items, jobs: int) -> list:
    """Ordered map, in worker processes when ``jobs`` > 1."""
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _cplx_cols(prefix: str, n: int) -> list:
    out = []
    for j in range(1, n + 1):
        out += [f"{prefix}{j}_re", f"{prefix}{j}_im"]
    return out


def _cplx_vals(values) -> list:
    out = []
    for z in values:
        out += [float(np.real(z)), float(np.imag(z))]
    return out


# ---------------------------------------------------------------------------
# Semiclassical subcommands

def _semi(p):
    from .semiclassical import SemiclassicalParams
    return SemiclassicalParams(p["delta"], p["gamma"], p["t"], p["kappa"])


def _select_ep(p):
    from .semiclassical import ep2_points, ep3_point
    if p["point"] == "ep3":
        return ep3_point(p["t"], p["kappa"])
    pts = ep2_points(p["gamma"], p["t"], p["kappa"])
    if not pts:
        raise ValueError("no second-order point at this (gamma, t)")
    return min(pts, key=lambda e: abs(e.location.delta - p["delta_near"]))


def cmd_ep_locus(p, jobs):
    from .semiclassical import ep2_locus, ep3_locus
    w = p["omega_grid"].values()
    if p["kind"] == "ep2":
        d, g, w3 = ep2_locus(w, p["t"], p["kappa"])
        return Table(["omega", "delta", "gamma", "omega3"], [list(r) for r in zip(w, d, g, w3)])
    d, g, t = ep3_locus(w, p["kappa"])
    return Table(["omega", "delta", "gamma", "t"], [list(r) for r in zip(w, d, g, t)])


def cmd_phase_diagram(p, jobs):
    from .semiclassical import classify_point
    rows = []
    k = p["kappa"]
    for g in p["gamma_grid"].values():
        for t in p["t_grid"].values():
            rows.append([g, t, classify_point(g / k, t / k).label])
    return Table(["gamma", "t", "class"], rows)


def cmd_spectra(p, jobs):
    from .semiclassical import spectrum_sweep
    sw = spectrum_sweep(_semi(p), p["delta_grid"].values())
    flagged = set(sw.flagged)
    rows = []
    for i, d in enumerate(sw.delta):
        rows.append([d] + _cplx_vals(sw.values[i]) + list(sw.photonic[i]) + [i in flagged])
    cols = ["delta"] + _cplx_cols("w", 3) + ["photon1", "photon2", "photon3", "flagged"]
    return Table(cols, rows, {"flagged_steps": len(flagged)})


def cmd_rigidity(p, jobs):
    from .linalg import eig_full
    from .semiclassical import build_dicke, rigidities
    base = _semi(p)
    rows = []
    for d in p["delta_grid"].values():
        es = eig_full(build_dicke(base.with_(delta=float(d))))
        rows.append([d] + _cplx_vals(es.values) + list(rigidities(es)))
    return Table(["delta"] + _cplx_cols("w", 3) + ["r1", "r2", "r3"], rows)


def cmd_scaling(p, jobs):
    eps = p["log_eps_grid"].values()
    if p["point"] == "nep5":
        from .nonlinear import nep5_parameters, perturbation_response
        nep = nep5_parameters(p["omega_s"], p["kappa1"])
        resp = perturbation_response(nep, eps, p["omega_s"])
        return Table(["parameter", "slope"], [["omega1", resp.slope]], {"expected": 0.2})
    from .semiclassical import PERTURBABLE, fit_scaling_exponent
    ep = _select_ep(p)
    rows = [[name, fit_scaling_exponent(ep, name, eps)] for name in PERTURBABLE]
    meta = {"order": ep.order, "ep_delta": ep.location.delta, "ep_gamma": ep.location.gamma,
            "ep_frequency": ep.frequency.real, "expected": (ep.order - 1) / ep.order}
    return Table(["parameter", "slope"], rows, meta)


def cmd_encircle(p, jobs):
    from .semiclassical import LoopPath, encircle
    ep = _select_ep(p)
    loop = LoopPath(complex(ep.location.delta), p["radius"], p["steps"], p["ccw"])
    res = encircle(ep, loop, ep.location, p["loops"])
    pts = loop.points(p["loops"])
    rows = [[i, z.real, z.imag] + _cplx_vals(res.trajectory[i]) for i, z in enumerate(pts)]
    meta = {
        "order": ep.order,
        "ep_delta": ep.location.delta,
        "permutation": res.label,
        "phases": res.phases,
        "closure_loops": res.closure_loops,
        "closure_phases": res.closure_phases,
        "phase_per_cycle": res.closure_phases / res.closure_loops,
    }
    return Table(["step", "delta_re", "delta_im"] + _cplx_cols("w", 3), rows, meta)


# ---------------------------------------------------------------------------
# Nonlinear and dynamics subcommands

def cmd_nep(p, jobs):
    from .nonlinear import nep5_parameters, params_dict, perturbation_response
    nep = nep5_parameters(p["omega_s"], p["kappa1"])
    resp = perturbation_response(nep, p["log_eps_grid"].values(), p["omega_s"])
    rows = []
    for e, r, n, s in zip(resp.epsilon, resp.roots, resp.n_real, resp.shift):
        r = r[np.lexsort((r.imag, r.real))]
        rows.append([e, int(n), s] + _cplx_vals(r))
    meta = {f"nep_{k}": v for k, v in params_dict(nep).items()}
    meta["slope"] = resp.slope
    return Table(["epsilon", "n_real", "shift"] + _cplx_cols("root", 5), rows, meta)


def cmd_dynamics(p, jobs):
    from .dynamics import ATOM1, ATOM2, PHOTON, evolve_linear, fitted_growth_rate, growth_rate, hermitian_analytic
    from .semiclassical import dicke_matrix
    init = {"atom1": ATOM1, "photon": PHOTON, "atom2": ATOM2}[p["initial"]]
    meta = {}
    if p["mode"] == "nonlinear":
        from .nonlinear import evolve_nonlinear, nep5_parameters
        nl = nep5_parameters().with_(alpha=p["alpha"], beta=p["beta"])
        run = evolve_nonlinear(nl, 1e-3 * np.ones(3), p["dt"], p["T"])
        traj, extra = run.trajectory, run.gain
        meta.update(steady_amplitude=run.steady_amplitude, gain_spread=run.gain_spread, diverged=run.diverged)
    else:
        gamma = 0.0 if p["mode"] == "hermitian" else p["gamma"]
        traj = evolve_linear(dicke_matrix(p["delta"], gamma, p["t"], p["kappa"]), init, p["dt"], p["T"])
        extra = None
        if p["mode"] == "hermitian" and p["t"] == 0:
            exact = np.array([s.vector() for s in hermitian_analytic(init, p["delta"], p["kappa"], traj.times)])
            meta["max_analytic_error"] = float(np.max(np.abs(exact - traj.states)))
        if p["mode"] == "nonhermitian" and p["t"] == 0:
            meta["growth_rate"] = growth_rate(p["delta"], gamma, p["kappa"])
            meta["fitted_growth_rate"] = fitted_growth_rate(traj)
    pops = np.abs(traj.states) ** 2
    cols = ["time", "p_atom1", "p_photon", "p_atom2", "norm"] + (["gain"] if extra is not None else [])
    rows = []
    for i, tm in enumerate(traj.times):
        row = [tm] + list(pops[i]) + [pops[i].sum()]
        if extra is not None:
            row.append(extra[i])
        rows.append(row)
    return Table(cols, rows, meta)


def cmd_steady_map(p, jobs):
    from .nonlinear import nep5_parameters, steady_cell
    nep = nep5_parameters()
    cells = [(nep.with_(alpha=float(a), beta=float(b)), p["dt"], p["T"])
             for a in p["alpha_grid"].values() for b in p["beta_grid"].values()]
    res = pmap(steady_cell, cells, jobs)
    rows = [[c[0].alpha, c[0].beta, r[0], r[1], r[2]] for c, r in zip(cells, res)]
    return Table(["alpha", "beta", "amplitude", "gain", "diverged"], rows)


# ---------------------------------------------------------------------------
# Chain subcommands

def _chain(p, **over):
    from .chain import ChainParams
    kw = dict(delta=p["delta"], gamma=p["gamma"], t=p["t"], kappa=p["kappa"], lam=p.get("lam", 0.0),
              n_cells=p.get("n_cells", 40))
    kw.update(over)
    return ChainParams(**kw)


def cmd_chain_bands(p, jobs):
    from .chain import band_structure
    bs = band_structure(_chain(p), p["k_steps"])
    rows = [[k] + _cplx_vals(bs.bands[i]) for i, k in enumerate(bs.k_grid)]
    meta = {"real": bs.real, "gap1_open": bs.gap_open[0], "gap2_open": bs.gap_open[1]}
    return Table(["k"] + _cplx_cols("band", 3), rows, meta)


def chain_phase_cell(args):
    from .chain import classify_chain
    cp, k_steps = args
    ph = classify_chain(cp, k_steps)
    labels = []
    for z in (ph.zak_gap1, ph.zak_gap2):
        labels.append("NHSM" if z is None else ("NHTI" if z > 0 else "NHNI"))
    nan = float("nan")
    return labels[0], labels[1], nan if ph.zak_gap1 is None else ph.zak_gap1, nan if ph.zak_gap2 is None else ph.zak_gap2


def cmd_chain_phases(p, jobs):
    cells = [(_chain(p, lam=float(lam), gamma=float(g)), p["k_steps"])
             for lam in p["lam_grid"].values() for g in p["gamma_grid"].values()]
    res = pmap(chain_phase_cell, cells, jobs)
    rows = [[c.lam, c.gamma] + list(r) for (c, _), r in zip(cells, res)]
    return Table(["lam", "gamma", "phase_gap1", "phase_gap2", "zak_gap1", "zak_gap2"], rows)


def zak_cell(args):
    from .chain import band_structure, snap_phase, wilson_components
    cp, k_steps = args
    bs = band_structure(cp, k_steps)
    row = []
    for g in (1, 2):
        if bs.gap_open[g - 1]:
            c = wilson_components(bs.systems, range(g))
            row += [True, snap_phase(c.lr.real), c.lr.real, c.rl.real, c.ll.real, c.rr.real]
        else:
            row += [False] + [float("nan")] * 5
    return row


def cmd_zak(p, jobs):
    cells = [(_chain(p, lam=float(lam)), p["k_steps"]) for lam in p["lam_grid"].values()]
    res = pmap(zak_cell, cells, jobs)
    cols = ["lam"]
    for g in (1, 2):
        cols += [f"gap{g}_open", f"zak{g}", f"zak{g}_lr", f"zak{g}_rl", f"zak{g}_ll", f"zak{g}_rr"]
    return Table(cols, [[c.lam] + r for (c, _), r in zip(cells, res)])


def cmd_edges(p, jobs):
    from .chain import open_spectrum
    sp = open_spectrum(_chain(p), p["k_steps"])
    edge_gap = {complex(e.value): e.gap for e in sp.edges}
    order = np.lexsort((sp.values.imag, sp.values.real))
    rows = []
    for i in order:
        v = complex(sp.values[i])
        rows.append([v.real, v.imag, sp.ipr[i], sp.edge_weight[i], edge_gap.get(v, 0)])
    meta = {"edges_gap1": sp.count(1), "edges_gap2": sp.count(2)}
    return Table(["re", "im", "ipr", "edge_weight", "edge_gap"], rows, meta)


# ---------------------------------------------------------------------------
# Quantum subcommand

def g2_cell(qp):
    from .quantum import lindblad_steady_state, nh_steady_approx, photon_statistics
    ex = photon_statistics(lindblad_steady_state(qp))
    nh = photon_statistics(nh_steady_approx(qp))
    return [ex.g2, nh.g2, ex.population_estimate, ex.n1, ex.p_dd1, ex.p_dd2, ex.top_population]


def cmd_quantum_g2(p, jobs):
    from .quantum import QuantumParams
    cells = [QuantumParams.resonant(float(d), float(k), t=p["t"], gamma1=p["gamma1"], gamma2=p["gamma2"],
                                    eta=p["eta"], n_max=p["n_max"])
             for d in p["delta_grid"].values() for k in p["kappa_grid"].values()]
    res = pmap(g2_cell, cells, jobs)
    rows = [[c.omega1 - c.omega_p, c.kappa1] + r for c, r in zip(cells, res)]
    cols = ["delta", "kappa", "g2", "g2_nh", "g2_estimate", "n_photon", "p_dd1", "p_dd2", "top_population"]
    return Table(cols, rows)


# ---------------------------------------------------------------------------
# Registry

SEMI = {"delta": (float, 0.0), "gamma": (float, 0.5), "t": (float, 0.5), "kappa": (float, 1.0)}
EP_SELECT = {"point": (("ep3", "ep2"), "ep3"), "t": (float, 0.5), "gamma": (float, 0.5),
             "kappa": (float, 1.0), "delta_near": (float, 0.29)}
CHAIN = {"delta": (float, 1.0), "gamma": (float, 0.5), "t": (float, 0.0), "kappa": (float, 1.0),
         "k_steps": (int, 256)}


@dataclass(frozen=True)
class Command:
    run: object
    params: dict
    fmt: str = "csv"
    help: str = ""


COMMANDS = {
    "ep-locus": Command(cmd_ep_locus, {"kind": (("ep2", "ep3"), "ep2"), "t": (float, 0.5), "kappa": (float, 1.0),
                                       "omega_grid": ("grid", REQUIRED)},
                        help="EP2 or EP3 parameter loci along a frequency grid"),
    "phase-diagram": Command(cmd_phase_diagram, {"gamma_grid": ("grid", "0:2:41"), "t_grid": ("grid", "0:2:41"),
                                                 "kappa": (float, 1.0)},
                             help="class I/II/III map over (gamma, t)"),
    "spectra": Command(cmd_spectra, {**SEMI, "delta_grid": ("grid", "-2:2:401")},
                       help="tracked eigenvalues and photonic weight versus detuning"),
    "rigidity": Command(cmd_rigidity, {**SEMI, "delta_grid": ("grid", "-1:1:401")},
                        help="phase rigidity of each state versus detuning"),
    "scaling": Command(cmd_scaling, {**EP_SELECT, "point": (("ep3", "ep2", "nep5"), "ep3"),
                                     "omega_s": (float, 1.0), "kappa1": (float, 1.0),
                                     "log_eps_grid": ("loggrid", "-8:-3:26")},
                       help="log-log slopes of rigidity or NEP5 root shift"),
    "encircle": Command(cmd_encircle, {**EP_SELECT, "radius": (float, 0.01), "steps": (int, 400),
                                       "loops": (int, 1), "ccw": (bool, True)}, fmt="json",
                        help="eigenvalue braid and geometric phase around an EP"),
    "nep": Command(cmd_nep, {"omega_s": (float, 1.0), "kappa1": (float, 1.0),
                             "log_eps_grid": ("loggrid", "-8:-3:26")},
                   help="quintic root branches near the NEP5"),
    "dynamics": Command(cmd_dynamics, {"mode": (("hermitian", "nonhermitian", "nonlinear"), "hermitian"),
                                       "delta": (float, 2.0), "gamma": (float, 0.4), "t": (float, 0.0),
                                       "kappa": (float, 1.0), "initial": (("atom1", "photon", "atom2"), "atom1"),
                                       "alpha": (float, 5.0), "beta": (float, 2.0),
                                       "dt": (float, 0.005), "T": (float, 20.0)},
                        help="population dynamics (linear or saturable gain)"),
    "steady-map": Command(cmd_steady_map, {"alpha_grid": ("grid", "0:6:13"), "beta_grid": ("grid", "0:6:13"),
                                           "dt": (float, 0.01), "T": (float, 200.0)},
                          help="long-time amplitude and gain over (alpha, beta)"),
    "chain-bands": Command(cmd_chain_bands, {**CHAIN, "lam": (float, 1.0)}, help="Bloch bands of the chain"),
    "chain-phases": Command(cmd_chain_phases, {**CHAIN, "lam_grid": ("grid", "0:2.5:26"),
                                               "gamma_grid": ("grid", "0.5:0.5:1")},
                            help="NHTI/NHNI/NHSM labels per gap over (lam, gamma)"),
    "zak": Command(cmd_zak, {**CHAIN, "lam_grid": ("grid", "0:2.5:26")}, help="Zak phases versus lam"),
    "edges": Command(cmd_edges, {**CHAIN, "lam": (float, 1.0), "n_cells": (int, 40)},
                     help="open-chain spectrum with localisation data"),
    "quantum-g2": Command(cmd_quantum_g2, {"delta_grid": ("grid", "0:0:1"), "kappa_grid": ("grid", "0.1:1.5:15"),
                                           "eta": (float, 0.01), "gamma1": (float, 1.0), "gamma2": (float, 0.3),
                                           "t": (float, 0.0), "n_max": (int, 6)},
                          help="G2(0) from the Lindblad and no-jump steady states"),
}

GLOBAL_KEYS = ("config", "output", "format", "jobs", "subcommand")


def usage() -> str:
    lines = ["usage: nhdicke SUBCOMMAND [--config FILE] [--output PATH] [--format csv|json] [--jobs N] [--key value ...]",
             "", "subcommands:"]
    for name, c in COMMANDS.items():
        lines.append(f"  {name:<14} {c.help}")
    return "\n".join(lines) + "\n"


def command_help(name: str) -> str:
    lines = [f"usage: nhdicke {name} [--key value ...]", "", COMMANDS[name].help, "", "parameters:"]
    for key, (kind, default) in COMMANDS[name].params.items():
        d = "(required)" if default is REQUIRED else f"default {default}"
        k = "/".join(kind) if isinstance(kind, tuple) else getattr(kind, "__name__", kind)
        lines.append(f"  --{key.replace('_', '-'):<14} {k:<12} {d}")
    return "\n".join(lines) + "\n"


def _norm(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_")


def read_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        k, v = line.split("=", 1)
        out[_norm(k)] = v.strip()
    return out


def parse_flags(tokens) -> dict:
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        if "=" in tok:
            k, v = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"flag {tok} needs a value")
            k, v = tok[2:], tokens[i + 1]
            i += 2
        out[_norm(k)] = v
    return out


def resolve(argv) -> RunConfig:
    """Merge config file and flags into a validated RunConfig."""
    argv = list(argv)
    sub = None
    if argv and not argv[0].startswith("-"):
        sub = argv.pop(0)
    flags = parse_flags(argv)
    raw = read_config_file(flags["config"]) if "config" in flags else {}
    raw.update(flags)
    sub = sub or raw.get("subcommand")
    if sub is None:
        raise ConfigError("no subcommand given")
    if sub not in COMMANDS:
        raise ConfigError(f"unknown subcommand {sub!r}")
    cmd = COMMANDS[sub]
    unknown = sorted(set(raw) - set(cmd.params) - set(GLOBAL_KEYS))
    if unknown:
        raise ConfigError(f"unknown keys for {sub}: {', '.join(unknown)}")
    params = {}
    for key, (kind, default) in cmd.params.items():
        if key in raw:
            params[key] = _convert(key, kind, raw[key])
        elif default is REQUIRED:
            raise ConfigError(f"missing required key {key.replace('_', '-')}")
        else:
            params[key] = _convert(key, kind, str(default)) if kind in ("grid", "loggrid") else default
    form = raw.get("format", cmd.fmt)
    if form not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    jobs = _convert("jobs", int, raw.get("jobs", "1"))
    if jobs < 1:
        raise ConfigError("jobs must be at least 1")
    if "output" in raw:
        out = Path(raw["output"])
    else:
        out = Path(os.environ.get(OUTPUT_ENV, ".")) / f"{sub}.{form}"
    return RunConfig(sub, params, out, form, jobs)


def run(cfg: RunConfig) -> int:
    try:
        table = COMMANDS[cfg.subcommand].run(cfg.params, cfg.jobs)
    except Exception as exc:  # numerical failures of any kind map to exit 3
        print(f"nhdicke {cfg.subcommand}: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    text = render(cfg, table)
    cfg.output.parent.mkdir(parents=True, exist_ok=True)
    cfg.output.write_text(text)
    print(str(cfg.output))
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv or argv[0] in ("-h", "--help"):
        (sys.stdout if argv else sys.stderr).write(usage())
        return 0 if argv else 2
    if argv[0] in COMMANDS and any(a in ("-h", "--help") for a in argv[1:]):
        sys.stdout.write(command_help(argv[0]))
        return 0
    try:
        cfg = resolve(argv)
    except ConfigError as exc:
        sys.stderr.write(f"nhdicke: {exc}\n\n{usage()}")
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
