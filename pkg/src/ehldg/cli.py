"""Command line entry point ``ehl``.

    ehl run <cfg>
    ehl sweep <cfg> --levels N --degrees 1,2 [--allow-partial]
    ehl defaults > cfg

``EHL_OUT`` overrides the output directory named in the config.
Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import mesh as meshmod
from . import physics, study
from .config import RunConfig, defaults_text, dump_config, load_config
from .dgspace import DgSpace, broken_norm, broken_norm_nu, integral, l2_error
from .errors import ConfigError, EhlError, ParameterDomainError
from .params import derive
from .penalty import PenaltyConfig
from .solver import hertz_guess, solve_with_force_balance

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("ehldg.cli")


class _IOFailure(Exception):
    pass


def _g(v) -> str:
    return "%.17g" % v


def _json(obj, indent=0) -> str:
    """Minimal JSON writer printing floats with 17 significant digits."""
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        items = [f'{pad}"{k}": {_json(v, indent + 1)}' for k, v in sorted(obj.items())]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json(v, indent + 1) for v in obj) + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return _g(v) if math.isfinite(v) else f'"{v}"'
    if obj is None:
        return "null"
    return '"' + str(obj).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _points_csv(x: np.ndarray, values: np.ndarray) -> str:
    head = "x,value" if x.shape[1] == 1 else "x,y,value"
    rows = [",".join(_g(v) for v in (*xi, val)) for xi, val in zip(x, values)]
    return head + "\n" + "\n".join(rows) + "\n"


def _out_dir(cfg: RunConfig) -> Path:
    return Path(os.environ.get("EHL_OUT") or cfg.output)


def _write(out: Path, files: dict):
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
    except OSError as exc:
        raise _IOFailure(f"cannot write to {out}: {exc}") from exc


def _space(cfg: RunConfig) -> DgSpace:
    return DgSpace(meshmod.build(meshmod.DomainSpec(cfg.bounds, cfg.cells), cfg.degree))


# --------------------------------------------------------------------------
# run
# --------------------------------------------------------------------------
def run_case(cfg: RunConfig, out: Path) -> dict:
    """Execute one configured case and write its artifacts; returns the summary."""
    lines = []
    if cfg.case in ("line", "point"):
        summary, files = _run_contact(cfg, lines.append)
    elif cfg.case == "manufactured":
        summary, files = _run_manufactured(cfg)
    else:
        summary, files = _run_obstacle(cfg)
    files["report.json"] = _json(summary) + "\n"
    files["config.resolved.ini"] = dump_config(cfg)
    if lines:
        files["solver.log"] = "\n".join(lines) + "\n"
    _write(out, files)
    return summary


def _run_contact(cfg: RunConfig, on_line):
    kind = cfg.case
    derived = derive(cfg.physics, kind, cfg.log_base)
    lub = physics.Lubricant.from_params(derived, cfg.physics)
    if cfg.lam_override is not None:
        lub = dataclasses.replace(lub, lam=cfg.lam_override)
    if cfg.ph_override is not None:
        lub = dataclasses.replace(lub, pH=cfg.ph_override)
    coeffs = physics.ReynoldsCoefficients(lub)
    space = _space(cfg)
    kernel = physics.build_kernel(space, kind)
    target = physics.FORCE_TARGET[kind]
    report = solve_with_force_balance(space, kernel, coeffs, cfg.solve, cfg.form, cfg.penalty,
                                      cfg.physics.h00_init, target, hertz_guess(space, target), on_line=on_line)
    summary = report.summary()
    summary.update(case=kind, pH=lub.pH, lam=lub.lam, z=derived.z, b=derived.b, E_prime=derived.E_prime,
                   target=target, seed=cfg.seed)
    V = space.vol
    files = {"pressure.csv": _points_csv(V.x, V.E @ report.pressure.coeffs),
             "film.csv": _points_csv(V.x, report.film)}
    return summary, files


def _run_manufactured(cfg: RunConfig):
    case = study.ManufacturedCase("config", cfg.expression, cfg.bounds, cfg.coefficient)
    if len(set(cfg.cells)) != 1:
        raise ConfigError("[domain] cells: manufactured runs need the same count on every axis")
    u = study.solve_manufactured(case, cfg.cells[0], cfg.degree, cfg.form, cfg.solve)
    exact, grad = case.exact(), case.exact_gradient()
    kw = dict(reference=exact, reference_grad=grad)
    summary = {"case": "manufactured", "expression": cfg.expression, "err_l2": l2_error(u, exact),
               "err_energy": broken_norm(u, cfg.form.a_k, cfg.form.beta, **kw),
               "err_energy_nu": broken_norm_nu(u, cfg.form.a_k, cfg.form.beta, **kw), "seed": cfg.seed}
    V = u.space.vol
    return summary, {"pressure.csv": _points_csv(V.x, V.E @ u.coeffs)}


def _run_obstacle(cfg: RunConfig):
    case = study.obstacle_case(cfg.obstacle)
    pen = cfg.penalty if cfg.penalty.enabled else PenaltyConfig(enabled=False)
    u = study.solve_obstacle(case, cfg.cells[0], cfg.degree, pen, cfg.form, cfg.solve)
    V = u.space.vol
    vals = V.E @ u.coeffs
    summary = {"case": "obstacle", "obstacle": case.name, "eps_p": cfg.penalty.eps_p,
               "err_l2": l2_error(u, case.exact), "min_u": float(vals.min()), "integral": integral(u),
               "seed": cfg.seed}
    return summary, {"pressure.csv": _points_csv(V.x, vals)}


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------
def sweep_case(cfg: RunConfig, levels: int, degrees, out: Path) -> study.RateTable:
    if levels < 1 or not degrees:
        raise ConfigError("sweep needs --levels >= 1 and a non-empty --degrees list")
    if cfg.case == "manufactured":
        case = study.ManufacturedCase("config", cfg.expression, cfg.bounds, cfg.coefficient)
        table = study.run_h_sweep(case, degrees, levels, cfg.cells[0], cfg.form, cfg.solve)
    elif cfg.case == "obstacle":
        table = _obstacle_table(cfg, levels, degrees)
    else:
        raise ConfigError(f"[run] case: sweeps support manufactured and obstacle cases, not {cfg.case}")
    _write(out, {"rates.csv": table.to_csv(), "config.resolved.ini": dump_config(cfg)})
    return table


def _obstacle_table(cfg: RunConfig, levels: int, degrees) -> study.RateTable:
    case = study.obstacle_case(cfg.obstacle)
    eps_list = cfg.sweep_eps or (cfg.penalty.eps_p,)
    table = study.RateTable(case.name, study.config_hash([dump_config(cfg), levels, list(degrees)]))
    for p in degrees:
        for eps in eps_list:
            for k in range(levels):
                n = cfg.cells[0] * 2**k
                row = study.RateRow(1.0 / n, int(p), float(eps))
                try:
                    u = study.solve_obstacle(case, n, int(p), PenaltyConfig(eps_p=eps), cfg.form, cfg.solve)
                    kw = dict(reference=case.exact, reference_grad=[case.exact_grad])
                    row.err_l2 = l2_error(u, case.exact)
                    row.err_energy = broken_norm(u, cfg.form.a_k, cfg.form.beta, **kw)
                    row.err_energy_nu = broken_norm_nu(u, cfg.form.a_k, cfg.form.beta, **kw)
                except EhlError:
                    row.status = "failed"
                table.rows.append(row)
    return table.finalize()


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------
def _degrees(text: str):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad degree list {text!r}")
    return vals


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"ehl: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ehl", description="DG solver for EHL line and point contacts")
    ap.add_argument("-v", "--verbose", action="store_true", help="print solver progress lines")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run one configured case")
    r.add_argument("config")
    s = sub.add_parser("sweep", help="h-refinement / penalty sweep writing rates.csv")
    s.add_argument("config")
    s.add_argument("--levels", type=int, default=4)
    s.add_argument("--degrees", type=_degrees, default=[1, 2])
    s.add_argument("--allow-partial", action="store_true")
    sub.add_parser("defaults", help="print the paper operating point as a config file")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s",
                        stream=sys.stderr)
    if args.command == "defaults":
        sys.stdout.write(defaults_text())
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        out = _out_dir(cfg)
        if args.command == "run":
            summary = run_case(cfg, out)
            print(f"ok: wrote artifacts to {out}")
            if "force_residual" in summary:
                print(f"force_residual={_g(summary['force_residual'])} min_pressure={_g(summary['min_pressure'])}")
            return EXIT_OK
        table = sweep_case(cfg, args.levels, args.degrees, out)
        failed = sum(r.status != "ok" for r in table.rows)
        print(f"wrote {len(table.rows)} rows to {out / 'rates.csv'} ({failed} failed)")
        if failed == 0 or (args.allow_partial and failed < len(table.rows)):
            return EXIT_OK
        return EXIT_SOLVER
    except (ConfigError, ParameterDomainError) as exc:
        print(f"ehl: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _IOFailure as exc:
        print(f"ehl: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EhlError as exc:
        print(f"ehl: solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
