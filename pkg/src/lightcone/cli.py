"""Command-line front end.

Subcommands: spectrum, modes, evolve, decompose, verify, sweep. Each run
writes JSON/CSV reports (and figures) into --out; outputs are
deterministic for a fixed (config, seed). Exit codes: 0 all verdicts
pass, 1 verdict failure, 2 configuration error, 3 numerical abort.

Options may also come from a flat key=value config file (--config);
explicit flags win over file entries.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, plots
from .decompose import analytic_basis, check_membership, project
from .evolve import EvolutionOperator, TimeStepUnstableError
from .modes import (catalogue_to_json, free_eigenvalue, mode_catalogue,
                    semilinear_eigenvalues)
from .operators import ProblemParams, h_norm
from .spectral import make_basis

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem_free: bool
    p: float
    k: int
    n: int
    dtau: float | None
    tau_end: float
    seed: int
    out: Path
    no_gauge: bool
    allow_real_p: bool
    use_filter: bool

    def params(self) -> ProblemParams | None:
        if self.problem_free:
            return None
        return ProblemParams(self.p, k=self.k, allow_real_p=self.allow_real_p)

    def validate(self):
        if not self.problem_free:
            half_odd = float(self.p) == int(self.p) and int(self.p) % 2 == 1 and self.p >= 3
            if not half_odd and not self.allow_real_p:
                raise ConfigError(
                    f"p={self.p} is not an odd integer >= 3; pass --allow-real-p"
                )
            if self.allow_real_p and not self.p > 1:
                raise ConfigError(f"p must exceed 1, got {self.p}")
        if not 1 <= self.k <= 4:
            raise ConfigError(f"k must be in 1..4, got {self.k}")
        if not 16 <= self.n <= 512:
            raise ConfigError(f"n must be in [16, 512], got {self.n}")
        if self.tau_end <= 0:
            raise ConfigError(f"tau-end must be positive, got {self.tau_end}")


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--p", type=float, default=None)
    sub.add_argument("--k", type=int, default=None)
    sub.add_argument("--n", type=int, default=None)
    sub.add_argument("--dtau", type=float, default=None)
    sub.add_argument("--tau-end", type=float, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--out", type=str, default=None)
    sub.add_argument("--free", action="store_true", default=None)
    sub.add_argument("--no-gauge", action="store_true", default=None)
    sub.add_argument("--allow-real-p", action="store_true", default=None)
    sub.add_argument("--filter", action="store_true", default=None)
    sub.add_argument("--config", type=str, default=None)


_DEFAULTS = {
    "p": 3.0, "k": 1, "n": 64, "dtau": None, "tau_end": 6.0, "seed": 0,
    "out": "runs", "free": False, "no_gauge": False, "allow_real_p": False,
    "filter": False,
}
_BOOL_KEYS = {"free", "no_gauge", "allow_real_p", "filter"}


def _load_config_file(path: str) -> dict:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"bad config line: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        out[key] = value
    return out


def _resolve(args: argparse.Namespace) -> RunConfig:
    values = dict(_DEFAULTS)
    if getattr(args, "config", None):
        filecfg = _load_config_file(args.config)
        for key, raw in filecfg.items():
            if key not in values:
                raise ConfigError(f"unknown config key {key!r}")
            if key in _BOOL_KEYS:
                values[key] = raw.lower() in ("1", "true", "yes", "on")
            elif key in ("k", "n", "seed"):
                values[key] = int(raw)
            elif key == "out":
                values[key] = raw
            else:
                values[key] = float(raw)
    for key in values:
        arg = getattr(args, key, None)
        if arg is not None:
            values[key] = arg
    cfg = RunConfig(
        problem_free=bool(values["free"]),
        p=float(values["p"]),
        k=int(values["k"]),
        n=int(values["n"]),
        dtau=values["dtau"],
        tau_end=float(values["tau_end"]),
        seed=int(values["seed"]),
        out=Path(values["out"]),
        no_gauge=bool(values["no_gauge"]),
        allow_real_p=bool(values["allow_real_p"]),
        use_filter=bool(values["filter"]),
    )
    cfg.validate()
    return cfg


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_spectrum(args) -> int:
    cfg = _resolve(args)
    rows = []
    if cfg.problem_free:
        for j in range(1, args.jmax + 1):
            rows.append({"family": "free", "j": j, "lambda": free_eigenvalue(j)})
    else:
        params = cfg.params()
        for j in range(args.jmax + 1):
            lam_p, lam_m = semilinear_eigenvalues(params, j)
            rows.append({"family": "plus", "j": j, "lambda": lam_p})
            rows.append({"family": "minus", "j": j, "lambda": lam_m})
    for row in rows:
        print(f"{row['family']:>6} j={row['j']:<2d} lambda = {row['lambda']:.17g}")
    if args.out is not None:
        outdir = cfg.out
        outdir.mkdir(parents=True, exist_ok=True)
        _write_json(outdir / "spectrum.json", rows)
        plots.plot_spectrum(rows, outdir / "spectrum.png",
                            title="analytic eigenvalues")
    return EXIT_OK


def cmd_modes(args) -> int:
    cfg = _resolve(args)
    basis = make_basis(cfg.n)
    params = cfg.params()
    modes = analytic_basis(params, cfg.k, basis)
    outdir = cfg.out
    outdir.mkdir(parents=True, exist_ok=True)
    catalogue_to_json(modes, outdir / "modes.json")
    for m in modes:
        print(f"{m.label:>10} lambda = {complex(m.lam).real:.17g} "
              f"normalization = {m.normalization:.17g}")
    return EXIT_OK


def _initial_data(cfg: RunConfig, basis, params, mode_lambda):
    rng = np.random.default_rng(cfg.seed)
    if mode_lambda is None:
        field, _, _ = analysis.random_mode_combination(params, basis, rng)
        return field, "random"
    catalogue = mode_catalogue(params, basis, 2 * cfg.k + 4 if params is None
                               else cfg.k + 4)
    best = min(catalogue, key=lambda m: abs(complex(m.lam).real - mode_lambda))
    if abs(complex(best.lam).real - mode_lambda) > 1e-9:
        raise ConfigError(f"--mode {mode_lambda} matches no analytic eigenvalue")
    field = best.field * (1.0 / h_norm(best.field))
    return field, best.label


def cmd_evolve(args) -> int:
    cfg = _resolve(args)
    basis = make_basis(cfg.n)
    params = cfg.params()
    u0, data_label = _initial_data(cfg, basis, params, args.mode)
    op = EvolutionOperator(basis, params, k=cfg.k, dtau=cfg.dtau,
                           use_filter=cfg.use_filter)
    traj = op.run(u0, cfg.tau_end)
    outdir = cfg.out
    outdir.mkdir(parents=True, exist_ok=True)
    traj.to_csv(outdir / "norms.csv")
    manifest = traj.manifest()
    manifest.update({"seed": cfg.seed, "initial_data": data_label})
    _write_json(outdir / "manifest.json", manifest)
    if args.snapshots:
        for tau in sorted({float(t) for t in args.snapshots.split(",")}):
            traj.state_at(tau).to_csv(outdir / f"state_tau_{tau:g}.csv")
    pc0 = 0.0 if params is None else params.pc0
    plots.plot_norm_series(traj.taus, traj.norms, outdir / "norms.png",
                           bounds={"growth bound": 0.5 + pc0},
                           title=f"evolution ({data_label})")
    return EXIT_OK


def cmd_decompose(args) -> int:
    cfg = _resolve(args)
    basis = make_basis(cfg.n)
    params = cfg.params()
    u0, data_label = _initial_data(cfg, basis, params, args.mode)
    membership = check_membership(u0, cfg.k)
    dec = project(u0, cfg.k, params)
    outdir = cfg.out
    outdir.mkdir(parents=True, exist_ok=True)
    dec.remainder.to_csv(outdir / "remainder.csv")
    obj = dec.to_json(None, remainder_csv_path="remainder.csv")
    obj["initial_data"] = data_label
    obj["seed"] = cfg.seed
    obj["membership_max_residual"] = membership.max_residual
    obj["reconstruction_error"] = dec.reconstruction_error(u0)
    obj["orthogonality_residuals"] = list(map(float, dec.orthogonality_residuals()))
    _write_json(outdir / "decomposition.json", obj)
    plots.plot_coefficients([m.label for m in dec.basis_modes],
                            dec.coeffs, outdir / "coefficients.png",
                            title=f"mode coefficients ({data_label})")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _resolve(args)
    outdir = cfg.out
    outdir.mkdir(parents=True, exist_ok=True)
    if cfg.problem_free:
        # tau_end=None lets the free verification pick its k-aware horizon
        report = analysis.verify_free_theorem(
            cfg.k, n=cfg.n, seed=cfg.seed, tau_end=args.tau_end)
        rates = [report["remainder"]["fitted_rate"]]
        target = report["remainder"]["bound"]
        tol = 0.1
    elif cfg.no_gauge:
        params = cfg.params()
        report = analysis.verify_linear_stability(
            params, k=cfg.k, samples=args.samples, n=cfg.n,
            seed=cfg.seed, tau_end=cfg.tau_end)
        rates = [s["fitted_rate"] for s in report["per_sample"]]
        target = report["summary"]["target"]
        tol = 0.05
    else:
        params = cfg.params()
        report = analysis.verify_semilinear_theorem(
            params, cfg.k, n=cfg.n, seed=cfg.seed, tau_end=cfg.tau_end)
        rates = [report["remainder"]["fitted_rate"]]
        target = report["remainder"]["bound"]
        tol = 0.1
    _write_json(outdir / "report.json", report)
    plots.plot_rate_ensemble(rates, target, tol, outdir / "rates.png",
                             title="fitted decay rates")
    ok = bool(report["summary"]["pass"])
    print(f"verify: {'pass' if ok else 'FAIL'} "
          f"(report at {outdir / 'report.json'})")
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_sweep(args) -> int:
    cfg = _resolve(args)
    if not args.p_grid or not args.k_grid:
        raise ConfigError("sweep needs nonempty --p-grid and --k-grid")
    p_values = [float(v) for v in args.p_grid.split(",") if v.strip()]
    k_values = [int(v) for v in args.k_grid.split(",") if v.strip()]
    if not p_values or not k_values:
        raise ConfigError("sweep needs nonempty --p-grid and --k-grid")
    outdir = cfg.out
    outdir.mkdir(parents=True, exist_ok=True)
    cells = []
    any_fail = False
    for p in p_values:
        is_odd = float(p) == int(p) and int(p) % 2 == 1 and p >= 3
        if not is_odd and not cfg.allow_real_p:
            raise ConfigError(f"grid value p={p} is not an odd integer >= 3; "
                              "pass --allow-real-p")
        for k in k_values:
            params = ProblemParams(p, k=k, allow_real_p=cfg.allow_real_p)
            cell_dir = outdir / f"p{p:g}_k{k}"
            cell_dir.mkdir(parents=True, exist_ok=True)
            try:
                report = analysis.verify_semilinear_theorem(
                    params, k, n=cfg.n, seed=cfg.seed, tau_end=cfg.tau_end)
                status = "pass" if report["summary"]["pass"] else "fail"
            except TimeStepUnstableError as exc:
                report = {"error": str(exc)}
                status = "numerical-abort"
            _write_json(cell_dir / "report.json", report)
            cell = {
                "p": p,
                "k": k,
                "status": status,
                "fitted_rate": report.get("remainder", {}).get("fitted_rate"),
                "bound": report.get("remainder", {}).get("bound"),
                "dominant_lambda": report.get("dominant_lambda"),
                "full_solution_rate": report.get("full_solution", {}).get("fitted_rate"),
            }
            cells.append(cell)
            any_fail = any_fail or status != "pass"
            print(f"cell p={p:g} k={k}: {status}")
    summary = {"cells": cells, "pass": not any_fail,
               "n": cfg.n, "seed": cfg.seed, "tau_end": cfg.tau_end}
    _write_json(outdir / "sweep.json", summary)
    rates = [c["fitted_rate"] for c in cells if c["fitted_rate"] is not None]
    if rates:
        plots.plot_rate_ensemble(rates, float(np.mean(rates)), 0.1,
                                 outdir / "sweep_rates.png",
                                 title="sweep: remainder rates")
    return EXIT_OK if not any_fail else EXIT_VERDICT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lightcone",
        description="Pseudospectral evolution and eigenmode analysis of "
                    "radial waves in similarity coordinates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="tabulate analytic eigenvalues")
    _add_common(sp)
    sp.add_argument("--jmax", type=int, default=3)
    sp.set_defaults(fn=cmd_spectrum)

    sp = sub.add_parser("modes", help="export the normalized mode catalogue")
    _add_common(sp)
    sp.set_defaults(fn=cmd_modes)

    sp = sub.add_parser("evolve", help="run one evolution and dump norm series")
    _add_common(sp)
    sp.add_argument("--mode", type=float, default=None,
                    help="start from the analytic mode with this eigenvalue")
    sp.add_argument("--snapshots", type=str, default=None,
                    help="comma-separated tau values for full-state dumps")
    sp.set_defaults(fn=cmd_evolve)

    sp = sub.add_parser("decompose", help="project data onto the mode kernel")
    _add_common(sp)
    sp.add_argument("--mode", type=float, default=None)
    sp.set_defaults(fn=cmd_decompose)

    sp = sub.add_parser("verify", help="run a theorem verification report")
    _add_common(sp)
    sp.add_argument("--samples", type=int, default=20)
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("sweep", help="verify over a (p, k) grid")
    _add_common(sp)
    sp.add_argument("--p-grid", type=str, default="")
    sp.add_argument("--k-grid", type=str, default="")
    sp.set_defaults(fn=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TimeStepUnstableError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
