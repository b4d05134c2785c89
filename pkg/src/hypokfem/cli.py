"""Command-line driver: ``hypokfem <experiment> [--config path] [--check] [--expensive] [--out dir]``.

Configuration files are flat ``key = value`` text; ``#`` starts a comment
and lists are comma separated.  Keys (see ``SCHEMA``) left unset take the
experiment defaults below, and ``--set key=value`` overrides single keys on
the command line.  Every output file starts with a header naming the
library version, the experiment and the hash of the resolved configuration.
"""

import argparse
import csv
import hashlib
import logging
import os
import sys

import numpy as np

from . import __version__
from . import acceptance
from . import analysis as an
from . import experiments as ex
from .params import ADJOINT_BOUNDARY, HParams

log = logging.getLogger("hypokfem")


def _floats(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def _ints(text):
    return tuple(int(t) for t in text.split(",") if t.strip())


def _choice(options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {options}, got {text!r}")
        return text
    return parse


# key: (parser, default, description)
SCHEMA = {
    "ns": (_ints, (4, 8, 16, 32), "mesh refinements h^-1 for convergence studies"),
    "rs": (_ints, (2, 3, 4), "polynomial degrees for convergence studies"),
    "r": (int, 2, "polynomial degree for single-mesh experiments"),
    "n": (int, 32, "h^-1 for single-mesh experiments"),
    "eps": (float, 0.1, "diffusion coefficient"),
    "m": (float, 0.35, "parameter of M = eps [[m^3, m^2], [m^2, m]]"),
    "C_sigma": (float, 10.0, "penalty constant"),
    "alpha": (float, 1.0, "control cost weight"),
    "alphas": (_floats, (1e-1, 1e-2, 1e-3, 1e-4), "alpha values of the alpha sweep"),
    "epss": (_floats, (1e-1, 1e-4), "eps values of the alpha sweep"),
    "ms": (_floats, (1e-1, 10 ** -0.5, 1.0, 10 ** 0.5), "m values of the m sweep"),
    "targets": (lambda t: tuple(s.strip() for s in t.split(",")), ("D1", "D2"), "target names"),
    "target": (_choice(("D1", "D2")), "D2", "target of the m sweep and box control"),
    "omega": (float, 1e-3, "Richardson relaxation"),
    "kappa": (float, 1.0, "upper bound of the two-sided box"),
    "tol": (float, 1e-10, "Richardson stopping tolerance"),
    "max_iter": (int, 1_000_000, "Richardson iteration cap"),
    "T": (float, 1.0, "final time"),
    "K": (int, 32, "time steps of the time-dependent control"),
    "dt": (float, 0.01, "time step of the decay run"),
    "theta": (float, 1.0, "theta of the decay run"),
    "x_max": (float, 1.0, "half-width of the position interval"),
    "adjoint_boundary": (_choice(ADJOINT_BOUNDARY), "literal", "adjoint boundary treatment"),
    "seed": (int, 0, "seed of randomised checks"),
}

EXPERIMENTS = {
    "primal-convergence": {},
    "oc-convergence": {"alpha": 1.0},
    "alpha-sweep": {"n": 32},
    "m-sweep": {"n": 32, "alpha": 1e-3, "eps": 0.1},
    "box-control": {"n": 24, "alpha": 1e-3},
    "timedep-control": {"n": 8, "alpha": 1e-2, "K": 32, "T": 1.0},
    "decay": {"n": 16, "T": 2.0},
    "check": {},
}
EXPENSIVE = {
    "primal-convergence": {"ns": (4, 8, 16, 32, 64)},
    "alpha-sweep": {"n": 90},
    "m-sweep": {"n": 90},
    "box-control": {"n": 90},
    "timedep-control": {"n": 16},
}
# acceptance criteria checked by --check for each experiment
CHECKS = {
    "primal-convergence": (1,),
    "oc-convergence": (2,),
    "alpha-sweep": (3, 4, 9),
    "m-sweep": (3, 4),
    "box-control": (6,),
    "timedep-control": (8,),
    "decay": (5,),
}


class ConfigError(ValueError):
    pass


def parse_config_text(text):
    """``{key: raw string}`` from flat ``key = value`` text."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def resolve_config(experiment, raw=None, expensive=False):
    """Defaults, then experiment defaults, then the ``--expensive`` scale, then ``raw``."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    cfg = {k: v[1] for k, v in SCHEMA.items()}
    cfg.update(EXPERIMENTS[experiment])
    if expensive:
        cfg.update(EXPENSIVE.get(experiment, {}))
    for key, text in (raw or {}).items():
        try:
            cfg[key] = SCHEMA[key][0](text)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    _validate(cfg)
    return cfg


def _validate(cfg):
    for key in ("ns", "rs"):
        if not cfg[key]:
            raise ConfigError(f"{key} must not be empty")
    if any(r not in (2, 3, 4) for r in cfg["rs"] + (cfg["r"],)):
        raise ConfigError("degrees must lie in {2, 3, 4}")
    if list(cfg["ns"]) != sorted(set(cfg["ns"])) or min(cfg["ns"]) < 1:
        raise ConfigError("ns must be strictly increasing positive integers")
    if not 0 < cfg["omega"] <= 1:
        raise ConfigError("omega must lie in (0, 1]")
    for key in ("eps", "alpha", "T", "dt", "tol", "kappa", "x_max"):
        if not cfg[key] > 0:
            raise ConfigError(f"{key} must be positive")
    if cfg["m"] < 0 or cfg["C_sigma"] < 0 or min(cfg["ms"]) < 0:
        raise ConfigError("m and C_sigma must be non-negative")
    if min(cfg["alphas"]) <= 0 or min(cfg["epss"]) <= 0:
        raise ConfigError("alphas and epss must be positive")
    if cfg["n"] < 1 or cfg["K"] < 2:
        raise ConfigError("need n >= 1 and K >= 2")
    bad = set(cfg["targets"]) - {"D1", "D2"}
    if bad:
        raise ConfigError(f"unknown targets {sorted(bad)}")


def _fmt_value(v):
    if isinstance(v, tuple):
        return ",".join(map(_fmt_value, v))
    return v if isinstance(v, str) else repr(v)


def config_text(cfg):
    """Canonical ``key = value`` lines; parsing them back gives the same config."""
    return "".join(f"{k} = {_fmt_value(cfg[k])}\n" for k in sorted(cfg))


def config_hash(experiment, cfg):
    return hashlib.sha256(f"experiment = {experiment}\n{config_text(cfg)}".encode()).hexdigest()[:12]


def params_from(cfg, **over):
    keys = ("eps", "m", "C_sigma", "r", "alpha", "x_max", "adjoint_boundary")
    kw = {k: cfg[k] for k in keys}
    kw.update(over)
    return HParams(**kw)


class Output:
    """Writes files into the output directory with the config-hash header."""

    def __init__(self, root, experiment, cfg):
        self.root = root
        self.header = f"hypokfem {__version__} experiment={experiment} config={config_hash(experiment, cfg)}"
        self.files = []
        os.makedirs(root, exist_ok=True)

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.root, name)

    def table(self, name, columns, rows):
        with open(self.path(name), "w", newline="") as fh:
            fh.write(f"# {self.header}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])

    def errors(self, name, rows):
        an.write_error_csv(self.path(name), rows, self.header)

    def field(self, name, space, data):
        from .space import write_vtk

        write_vtk(self.path(name), space, data, header=self.header)

    def manifest(self, experiment, cfg, extra=None):
        with open(os.path.join(self.root, "manifest.txt"), "w") as fh:
            fh.write(f"# {self.header}\nexperiment = {experiment}\nversion = {__version__}\n")
            fh.write(config_text(cfg))
            for k, v in (extra or {}).items():
                fh.write(f"{k} = {v}\n")
            fh.write("files = " + ",".join(self.files) + "\n")


# -- experiments ---------------------------------------------------------

def run_primal_convergence(cfg, out):
    table = ex.primal_convergence(params_from(cfg), cfg["ns"], cfg["rs"], keep_fields=True)
    for r, rows in table.items():
        out.errors(f"errors_primal_r{r}.csv", rows)
        U = rows[-1].extra["U"]
        out.field(f"U_r{r}_n{cfg['ns'][-1]}.vtk", U.space, {"U": U.coeffs})
    return {"table": table}


def run_oc_convergence(cfg, out):
    table = ex.oc_convergence(params_from(cfg), cfg["ns"], cfg["rs"], keep_fields=True)
    for r, rows in table.items():
        out.errors(f"errors_oc_r{r}.csv", rows)
        sol = rows[-1].extra["solution"]
        out.field(f"oc_r{r}_n{cfg['ns'][-1]}.vtk", sol.U.space,
                  {"U": sol.U.coeffs, "Z": sol.Z.coeffs, "F": sol.F.coeffs})
    return {"table": table}


SUMMARY_KEYS = ("cost", "U_H", "F_H", "mismatch_H", "F_min", "F_max")


def run_alpha_sweep(cfg, out):
    rows = []
    for q, name, sol, s in ex.alpha_sweep(params_from(cfg), cfg["n"], cfg["alphas"], cfg["epss"],
                                          cfg["targets"]):
        rows.append([name, q.eps, q.alpha] + [s[k] for k in SUMMARY_KEYS])
        out.field(f"{name}_eps{q.eps:g}_alpha{q.alpha:g}.vtk", sol.U.space,
                  {"U": sol.U.coeffs, "F": sol.F.coeffs})
    out.table("alpha_sweep.csv", ("target", "eps", "alpha") + SUMMARY_KEYS, rows)
    return {}


def run_m_sweep(cfg, out):
    rows = []
    for q, sol, s in ex.m_sweep(params_from(cfg), cfg["n"], cfg["ms"], cfg["target"]):
        rows.append([q.m, int(q.hypocoercive)] + [s[k] for k in SUMMARY_KEYS])
        out.field(f"{cfg['target']}_m{q.m:.4g}.vtk", sol.U.space, {"U": sol.U.coeffs, "F": sol.F.coeffs})
    out.table("m_sweep.csv", ("m", "hypocoercive") + SUMMARY_KEYS, rows)
    return {}


def run_box_control(cfg, out):
    p = params_from(cfg)
    rows, status = [], {}
    for label, bounds in (("single", (0.0, np.inf)), ("double", (0.0, cfg["kappa"]))):
        try:
            sol, hist = ex.box_control(p, cfg["n"], bounds, cfg["target"], cfg["omega"], cfg["tol"],
                                       cfg["max_iter"])
        except Exception as exc:  # divergence or iteration cap: record and continue
            log.error("%s-sided box control failed: %s", label, exc)
            status[label] = f"failed: {exc}"
            continue
        status[label] = "converged"
        c = sol.F.coeffs
        rows.append([label, bounds[0], bounds[1], len(hist), hist[-1][1], sol.cost, c.min(), c.max()])
        out.table(f"history_{label}.csv", ("iteration", "increment"), hist)
        out.field(f"box_{label}.vtk", sol.U.space, {"U": sol.U.coeffs, "F": c})
    out.table("box_control.csv", ("variant", "lo", "hi", "iterations", "last_increment", "cost",
                                  "F_min", "F_max"), rows)
    return {"status": status}


def run_timedep_control(cfg, out):
    p = params_from(cfg)
    sol = ex.timedep_control(p, cfg["n"], cfg["K"], cfg["T"])
    t = sol.U.times
    l2 = sol.U.l2_norms()
    out.table("trajectory.csv", ("t", "U_L2", "U_H", "Z_H", "F_H", "pulse"),
              zip(t, l2, sol.U.h_norms, sol.Z.h_norms, sol.F.h_norms, 1.0 - np.cos(2 * np.pi * t)))
    for frac in (0.125, 0.375, 0.625, 1.0):
        k = int(np.argmin(np.abs(t - frac * cfg["T"])))
        out.field(f"snapshot_t{t[k]:.4f}.vtk", sol.U[k].space,
                  {"U": sol.U[k].coeffs, "F": sol.F[k].coeffs})
    return {"J": repr(sol.J), "correlation": repr(ex.pulse_correlation(sol)),
            "residual": repr(sol.residual)}


def run_decay(cfg, out):
    p = params_from(cfg)
    tr, monotone, rate = ex.primal_decay(p, cfg["n"], cfg["T"], cfg["dt"], cfg["theta"])
    out.table("decay.csv", ("t", "U_H"), zip(tr.times, tr.h_norms))
    c = an.constants(p)
    out.table("constants.csv", tuple(c.as_dict()), [list(c.as_dict().values())])
    return {"monotone": monotone, "rate": repr(rate), "delta_tilde": repr(c.delta_tilde)}


def run_check(cfg, out, expensive=False):
    lines = []

    def echo(line):
        print(line, flush=True)
        lines.append(line)

    verdicts = acceptance.run_all(params_from(cfg), expensive=expensive, echo=echo)
    with open(out.path("acceptance.txt"), "w") as fh:
        fh.write(f"# {out.header}\n" + "\n".join(lines) + "\n")
    return {"verdicts": verdicts}


RUNNERS = {
    "primal-convergence": run_primal_convergence,
    "oc-convergence": run_oc_convergence,
    "alpha-sweep": run_alpha_sweep,
    "m-sweep": run_m_sweep,
    "box-control": run_box_control,
    "timedep-control": run_timedep_control,
    "decay": run_decay,
}


def _check_verdicts(experiment, cfg, result, expensive):
    p = params_from(cfg)
    verdicts = []
    for number in CHECKS[experiment]:
        if number == 1 and "table" in result:
            v = _judged(1, "primal convergence", acceptance.judge_primal(result["table"]))
        elif number == 2 and "table" in result:
            v = _judged(2, "optimal-control convergence", acceptance.judge_oc(result["table"]))
        else:
            v = acceptance.run_criterion(number, p, expensive)
        print(v.line(), flush=True)
        verdicts.append(v)
    return verdicts


def _judged(number, name, outcome):
    ok, detail = outcome
    return acceptance.Verdict(number, name, "PASS" if ok else "FAIL", detail)


def build_parser():
    ap = argparse.ArgumentParser(prog="hypokfem", description=__doc__.splitlines()[0])
    ap.add_argument("experiment", choices=sorted(EXPERIMENTS))
    ap.add_argument("--config", help="flat key = value configuration file")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override one configuration key (repeatable)")
    ap.add_argument("--check", action="store_true",
                    help="run the matching acceptance criteria; exit 1 on failure")
    ap.add_argument("--expensive", action="store_true", help="use the full-size meshes (slow)")
    ap.add_argument("--out", default="out", help="output directory (default: ./out)")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = {}
        if args.config:
            with open(args.config) as fh:
                raw.update(parse_config_text(fh.read()))
        for item in args.set:
            raw.update(parse_config_text(item))
        cfg = resolve_config(args.experiment, raw, args.expensive)
    except (OSError, ConfigError) as exc:
        print(f"hypokfem: error: {exc}", file=sys.stderr)
        return 2
    out = Output(os.path.join(args.out, args.experiment), args.experiment, cfg)
    if args.experiment == "check":
        result = run_check(cfg, out, args.expensive)
        verdicts = result["verdicts"]
        out.manifest(args.experiment, cfg, {"expensive": args.expensive})
        return 0 if all(v.status != "FAIL" for v in verdicts) else 1
    result = RUNNERS[args.experiment](cfg, out)
    extra = {k: v for k, v in result.items() if k != "table"}
    extra["expensive"] = args.expensive
    code = 0
    if args.check:
        verdicts = _check_verdicts(args.experiment, cfg, result, args.expensive)
        extra["check"] = ",".join(f"{v.number}:{v.status}" for v in verdicts)
        code = 0 if all(v.status != "FAIL" for v in verdicts) else 1
    out.manifest(args.experiment, cfg, extra)
    print(f"wrote {len(out.files) + 1} files to {out.root}")
    return code


if __name__ == "__main__":
    sys.exit(main())
