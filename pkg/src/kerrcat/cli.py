"""Command-line entry point: ``kerrcat <subcommand> [--config file.json] [flags]``.

Each subcommand resolves its parameters from built-in defaults, then the
optional JSON config, then explicit flags. The resolved config is echoed in
the output (JSON key ``config`` or a ``# config`` comment line in CSV) together
with its SHA-256 prefix, so identical inputs give byte-identical files.

Exit codes: 0 success, 1 domain error, 2 numerical failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from fractions import Fraction
from typing import Callable

import numpy as np

from . import control, open_system, rydberg, squeezing
from .design import design as build_design
from .dynamics import Pulse, evolve_diagonal, evolve_driven
from .errors import DomainError, IntegrationError, KerrCatError, TruncationError
from .fock import cat_state, coherent_state, fidelity, number_moments, parity, recommended_dim, wigner

EXIT_OK, EXIT_DOMAIN, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2, 64
THREADS_ENV = "KERRCAT_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def fmt(x) -> str:
    """Floats with 17 significant digits; everything else via ``str``."""
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _boolean(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, Fraction):
        return str(x)
    return x


def _public(cfg: dict) -> dict:
    # the worker count changes scheduling only, never results
    return {k: v for k, v in cfg.items() if k != "threads"}


def config_hash(cfg: dict) -> str:
    blob = json.dumps(_jsonable(_public(cfg)), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_json(result: dict, cfg: dict, out) -> None:
    payload = {"config": _jsonable(_public(cfg)), "config_hash": config_hash(cfg), **_jsonable(result)}
    # 17 significant digits: json uses repr, which round-trips doubles exactly
    out.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_csv(header, rows, cfg: dict, out, units: str) -> None:
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash(cfg)} units={units} "
              f"config={json.dumps(_jsonable(_public(cfg)), sort_keys=True, separators=(',', ':'))}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    out.write(buf.getvalue())


# -- subcommands -------------------------------------------------------------

def cmd_design(cfg, out):
    d = build_design(int(cfg["m"]), constraint=cfg["constraint"], window=int(cfg["window"]))
    write_json(d.to_dict(), cfg, out)


def cmd_evolve(cfg, out):
    coeffs = [float(k) for k in cfg["coeffs"]]
    alpha = float(cfg["alpha"])
    dim = cfg["dim"] or recommended_dim(alpha)
    psi0 = coherent_state(alpha, dim)
    if cfg["drive"]:
        pulse = Pulse.constant(float(cfg["drive"]), float(cfg["t"]), int(cfg["nt"]))
        psi = evolve_driven(psi0, coeffs, pulse)
    else:
        psi = evolve_diagonal(psi0, coeffs, float(cfg["t"]))
    mom = number_moments(psi, 2)
    target = cat_state(alpha, float(cfg["phi"]), dim)
    write_json({"mean_n": mom[0], "var_n": mom[1] - mom[0] ** 2, "parity": parity(psi),
                "fidelity_to_cat": fidelity(psi, target), "tail": psi.tail}, cfg, out)


def _target(cfg):
    alpha = float(cfg["alpha"])
    return cat_state(alpha, math.pi / 2, int(cfg["dim"] or control.recommended_dim(alpha)))


def _krotov_kw(cfg):
    kw = {"max_iters": int(cfg["max_iters"]), "lambda_shrink": float(cfg["lambda_shrink"])}
    if cfg.get("lambda") is not None:
        kw["lam"] = float(cfg["lambda"])
    return kw


def cmd_optimize(cfg, out):
    coeffs = [float(k) for k in cfg["coeffs"]]
    T = float(cfg["T"])
    nt = int(cfg["nt"] or control.default_nt(T, coeffs, per_unit=int(cfg["nt_per_unit"])))
    bound = float(cfg["bound"])
    guess = control.random_guess(T, nt, bound, np.random.default_rng(int(cfg["seed"])))
    run = control.krotov_optimize(coeffs, _target(cfg), T, guess, **_krotov_kw(cfg))
    write_json({"infidelity": run.infidelity, "converged": run.converged,
                "iterations": run.iterations, "infidelity_trace": run.infidelity_trace,
                "dt": run.pulse.dt, "pulse": run.pulse.samples}, cfg, out)


def _run_scan(cfg, keep_runs=False):
    return control.min_time_scan(
        [float(k) for k in cfg["k3_values"]], [float(t) for t in cfg["T_grid"]],
        n_guesses=int(cfg["n_guesses"]), alpha=float(cfg["alpha"]), bound=float(cfg["bound"]),
        seed=int(cfg["seed"]), dim=cfg["dim"], nt_per_unit=int(cfg["nt_per_unit"]),
        workers=int(cfg["threads"]), keep_runs=keep_runs, prune=bool(cfg["prune"]), **_krotov_kw(cfg))


def cmd_scan(cfg, out):
    cells = _run_scan(cfg)
    rows = [(c.k3, c.T, c.best_infidelity, c.seed_of_best) for c in cells]
    write_csv(["K3", "T", "best_infidelity", "seed_of_best"], rows, cfg, out, "K_2")


def cmd_reeval(cfg, out):
    cells = _run_scan(cfg, keep_runs=True)
    if cfg["converged_only"]:
        cells = [c for c in cells if c.converged]
    params = open_system.LindbladParams(float(cfg["kappa_1ph"]), float(cfg["kappa_phi"]))
    rows = open_system.dissipative_reevaluate(cells, params, tol=float(cfg["tol"]))
    write_csv(["K3", "T", "infidelity_closed", "infidelity_dissipative"],
              [(r.k3, r.T, r.infidelity_closed, r.infidelity_dissipative) for r in rows], cfg, out, "K_2")


def cmd_decay(cfg, out):
    alpha = float(cfg["alpha"])
    dim = int(cfg["dim"] or recommended_dim(alpha))
    psi = cat_state(alpha, float(cfg["phi"]), dim)
    rho0 = psi.to_density_matrix()
    rows = []
    for kt in cfg["t_grid"]:
        k1, kp = float(cfg["kappa_1ph"]) * kt, float(cfg["kappa_phi"]) * kt
        exact = open_system.overlap(psi, open_system.analytic_decay(rho0, open_system.LindbladParams(k1, kp), 1.0))
        approx = open_system.overlap_expansion(psi, k1, kp, order=cfg["order"])
        rows.append((float(kt), exact, approx))
    write_csv(["t", "overlap_exact", "overlap_expansion"], rows, cfg, out, "1/kappa")


def cmd_squeeze_opt(cfg, out):
    params = open_system.LindbladParams(float(cfg["kappa_1ph"]), float(cfg["kappa_phi"]))
    res = squeezing.optimize_squeezing(float(cfg["alpha"]), params, c=int(cfg["c"]))
    write_json({"r": res.sq.r, "phi": res.sq.phi, "slope": res.slope, "mean_n": res.mean,
                "var_n": res.variance}, cfg, out)


def cmd_squeeze_scan(cfg, out):
    params = open_system.LindbladParams(float(cfg["kappa_1ph"]), float(cfg["kappa_phi"]))
    sqs = [squeezing.SqueezeParams(float(r), float(p), int(cfg["c"])) for r in cfg["r_list"] for p in cfg["phi_list"]]
    pts = squeezing.decay_scan(float(cfg["alpha"]), sqs, params, cfg["t_grid"])
    write_csv(["t", "r", "phi", "overlap"], [(p.t, p.r, p.phi, p.overlap) for p in pts], cfg, out, "1/kappa")


def _grid(spec):
    lo, hi, n = spec
    return np.linspace(float(lo), float(hi), int(n))


def cmd_rydberg_map(cfg, out):
    dg, vg = _grid(cfg["delta_range"]), _grid(cfg["v_range"])
    order = int(cfg["max_order"])
    cmap = rydberg.coefficient_map(float(cfg["omega_er"]), dg, vg, int(cfg["n_atoms"]), order,
                                   float(cfg["guard"]))
    rows = []
    for i, v in enumerate(vg):
        for j, d in enumerate(dg):
            rows.append((float(d), float(v), *cmap.coeffs[i, j], int(cmap.resonant[i, j])))
    write_csv(["delta", "v"] + [f"K{n}" for n in range(1, order + 1)] + ["resonance_flag"],
              rows, cfg, out, "angular MHz")


def cmd_rydberg_validate(cfg, out):
    rows = []
    for d in cfg["deltas"]:
        p = rydberg.RydbergParams(float(cfg["omega_er"]), float(d), float(cfg["v"]), int(cfg["n_atoms"]))
        val = rydberg.validate_effective(p, float(cfg["guard"]))
        rows.append((float(d), float(cfg["v"]), p.n_atoms, val.epsilon, int(val.flagged)))
    write_csv(["delta", "v", "N", "epsilon", "match_flag"], rows, cfg, out, "angular MHz")


def cmd_wigner(cfg, out):
    alpha = float(cfg["alpha"])
    psi = cat_state(alpha, float(cfg["phi"]), int(cfg["dim"] or recommended_dim(alpha)))
    xs = np.linspace(-float(cfg["extent"]), float(cfg["extent"]), int(cfg["points"]))
    w = wigner(psi, xs, xs, g=float(cfg["g"]))
    rows = [(float(x), float(y), w[i, j]) for i, y in enumerate(xs) for j, x in enumerate(xs)]
    write_csv(["x", "p", "W"], rows, cfg, out, "alpha = g/2 (x + i p)")


_SCAN_DEFAULTS = {"alpha": 2.0, "k3_values": [0.0, 0.25, 0.5, 1.0], "T_grid": [0.5, 1.0, 2.0],
                  "bound": 30.0, "n_guesses": 8, "seed": 0, "dim": 40, "nt_per_unit": 100,
                  "max_iters": 300, "lambda": None, "lambda_shrink": 1.3, "prune": False}

COMMANDS: dict[str, tuple[Callable, dict, str]] = {
    "design": (cmd_design, {"m": 4, "constraint": None, "window": 5},
               "exact nonlinear coefficients and minimal cat time"),
    "evolve": (cmd_evolve, {"coeffs": [0.0, 1.0], "alpha": 2.0, "t": math.pi / 2, "phi": math.pi / 2,
                            "dim": None, "drive": 0.0, "nt": 200},
               "evolve a coherent state under the nonlinear Hamiltonian"),
    "optimize": (cmd_optimize, {"coeffs": [0.0, 1.0, 0.0], "alpha": 2.0, "T": 2 * math.pi, "bound": 30.0,
                                "seed": 0, "dim": 40, "nt": None, "nt_per_unit": 100, "max_iters": 300,
                                "lambda": None, "lambda_shrink": 1.3},
                 "Krotov optimization of the drive for one duration"),
    "scan": (cmd_scan, dict(_SCAN_DEFAULTS), "minimum-duration scan over K3 and T"),
    "reeval": (cmd_reeval, {**_SCAN_DEFAULTS, "kappa_1ph": 3e-3, "kappa_phi": 3e-3, "tol": 1e-7,
                            "converged_only": True},
               "re-evaluate optimized pulses with loss and dephasing"),
    "decay": (cmd_decay, {"alpha": 2.0, "phi": 0.0, "kappa_1ph": 1.0, "kappa_phi": 1.0,
                          "t_grid": [0.0, 1e-3, 1e-2, 0.1], "dim": None, "order": "leading"},
              "free-decay overlap of a cat state, exact and expanded"),
    "squeeze-opt": (cmd_squeeze_opt, {"alpha": 2.0, "kappa_1ph": 1.0, "kappa_phi": 1.0, "c": 2},
                    "optimal squeezing for loss plus dephasing"),
    "squeeze-scan": (cmd_squeeze_scan, {"alpha": 2.0, "kappa_1ph": 1.0, "kappa_phi": 1.0, "c": 2,
                                        "r_list": [0.0, 0.25, 0.51, 0.75, 1.0],
                                        "phi_list": [0.0, math.pi / 2, math.pi],
                                        "t_grid": [0.0, 0.01, 0.02, 0.05, 0.1]},
                     "decay curves of squeezed cats"),
    "rydberg-map": (cmd_rydberg_map, {"omega_er": 2 * math.pi * 50,
                                      "delta_range": [-2 * math.pi * 200, 2 * math.pi * 200, 81],
                                      "v_range": [-2 * math.pi * 400, 2 * math.pi * 400, 81],
                                      "max_order": 4, "n_atoms": 4, "guard": rydberg.GUARD_BAND},
                    "effective coefficient map over detuning and interaction"),
    "rydberg-validate": (cmd_rydberg_validate, {"omega_er": 2 * math.pi * 50, "v": 2 * math.pi * 80,
                                                "deltas": [2 * math.pi * 50 * k for k in (3, 5, 10, 20)],
                                                "n_atoms": 2, "guard": rydberg.GUARD_BAND},
                         "effective-model energy error against exact diagonalization"),
    "wigner": (cmd_wigner, {"alpha": 2.0, "phi": math.pi / 2, "dim": None, "extent": 4.0, "points": 81,
                            "g": 2.0},
               "Wigner function of a cat state on a square grid"),
}

_FLAG_TYPES = {"m": int, "window": int, "constraint": float, "alpha": float, "t": float, "phi": float,
               "dim": int, "drive": float, "nt": int, "T": float, "bound": float, "seed": int,
               "nt_per_unit": int, "max_iters": int, "lambda": float, "lambda_shrink": float,
               "n_guesses": int, "kappa_1ph": float, "kappa_phi": float, "tol": float, "c": int,
               "order": str, "omega_er": float, "v": float, "n_atoms": int, "max_order": int,
               "guard": float, "extent": float, "points": int, "g": float,
               "prune": _boolean, "converged_only": _boolean}
_LIST_FLAGS = {"coeffs", "k3_values", "T_grid", "t_grid", "r_list", "phi_list", "deltas"}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kerrcat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, defaults, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file with parameters")
        p.add_argument("--output", "-o", help="output file (default: stdout)")
        p.add_argument("--threads", type=int, help=f"worker processes (default ${THREADS_ENV} or 1)")
        for key in defaults:
            flag = "--" + key.replace("_", "-")
            if key in _LIST_FLAGS:
                p.add_argument(flag, dest=key, type=float, nargs="+")
            elif key in _FLAG_TYPES:
                p.add_argument(flag, dest=key, type=_FLAG_TYPES[key])
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    defaults = COMMANDS[args.command][1]
    cfg = dict(defaults)
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(defaults) - {"threads"}
        if unknown:
            raise DomainError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        cfg.update(loaded)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    threads = args.threads if args.threads is not None else cfg.get("threads")
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    if args.command in ("scan", "reeval"):
        cfg["threads"] = int(threads)
    return cfg


def dispatch(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    try:
        cfg = resolve_config(args)
        func = COMMANDS[args.command][0]
        if args.output:
            with open(args.output, "w", newline="") as fh:
                func(cfg, fh)
        else:
            func(cfg, sys.stdout)
    except (IntegrationError, TruncationError) as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return EXIT_NUMERIC
    except (DomainError, ValueError, KeyError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DOMAIN
    except KerrCatError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERIC
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
