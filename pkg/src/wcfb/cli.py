"""Command-line front end.

Subcommands: ``phantom``, ``project``, ``solve``, ``baseline``, ``diagnose``
and ``demo-1d``. Every option can also come from a ``key = value`` file given
with ``--config``; flags on the command line win. Output files go to
``--out-dir``, else ``$WCFB_OUTPUT_DIR``, else the working directory.

Exit status: 0 on success, 2 on configuration errors or missing inputs,
1 on runtime failures.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .errors import ConfigError, ParameterError
from .functions import BallDistanceTerm, BinaryPenalty, CompositeProblem
from .linalg import read_matrix_market, write_matrix_market
from .solver import SolverConfig, read_trajectory_csv, run_fb, write_trajectory_csv
from . import tomography as tomo

OUTPUT_ENV = "WCFB_OUTPUT_DIR"
NOMINAL_MU = 1.0

# option name -> (type, default); shared by flags and config files
_OPTIONS = {
    "out_dir": (str, None),
    "seed": (int, 0),
    "kind": (str, "disk"),
    "size": (int, None),
    "width": (int, 16),
    "height": (int, 16),
    "out": (str, None),
    "phantom": (str, None),
    "projector": (str, None),
    "sinogram": (str, None),
    "angles": (int, 8),
    "angle_list": (str, None),
    "detectors": (int, 24),
    "spacing": (float, None),
    "sigma": (float, 0.0),
    "theta": (float, None),
    "alpha": (float, None),
    "eps": (float, 0.0),
    "mode": (str, "exact"),
    "max_iter": (int, 2000),
    "tol": (float, 1e-10),
    "lsqr_iter": (int, 100),
    "trajectory": (str, None),
    "samples": (int, 10_000),
    "dim": (int, 8),
    "x0": (float, 0.5),
}

_COMMANDS = {
    "phantom": ["kind", "size", "width", "height", "seed", "out", "out_dir"],
    "project": ["phantom", "kind", "size", "width", "height", "seed", "angles", "angle_list",
                "detectors", "spacing", "sigma", "out_dir"],
    "solve": ["phantom", "kind", "size", "width", "height", "seed", "angles", "angle_list",
              "detectors", "spacing", "sigma", "projector", "sinogram", "theta", "alpha", "eps",
              "mode", "max_iter", "tol", "out_dir"],
    "baseline": ["phantom", "kind", "size", "width", "height", "seed", "angles", "angle_list",
                 "detectors", "spacing", "sigma", "projector", "sinogram", "lsqr_iter", "out_dir"],
    "diagnose": ["trajectory", "samples", "dim", "seed", "out_dir"],
    "demo-1d": ["alpha", "x0", "max_iter", "tol", "out_dir"],
}

_HELP = {
    "phantom": "write a synthetic binary phantom as PGM",
    "project": "build the projector (Matrix Market) and a sinogram (CSV)",
    "solve": "relaxed binary reconstruction by forward-backward splitting",
    "baseline": "LSQR and thresholded LSQR reconstructions",
    "diagnose": "thresholds, zeta check, rate fit and sharpness probe for a trajectory",
    "demo-1d": "scalar example: |x^2 - 1| + (x - 1)^2 / 2",
}


def _flag(key):
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wcfb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, keys in _COMMANDS.items():
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", default=None, help="key = value file")
        for key in keys:
            typ, default = _OPTIONS[key]
            p.add_argument(_flag(key), dest=key, type=typ, default=None,
                           help=f"default: {default}")
    return parser


def read_config(path, allowed) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in allowed:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def _convert(key, value):
    typ = _OPTIONS[key][0]
    try:
        v = typ(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {value!r}") from exc
    if isinstance(v, float) and not math.isfinite(v):
        raise ConfigError(f"{key}: value must be finite")
    return v


def resolve(args) -> dict:
    keys = _COMMANDS[args.command]
    cfg = {k: _OPTIONS[k][1] for k in keys}
    if args.config:
        cfg.update(read_config(args.config, keys))
    for k in keys:
        v = getattr(args, k)
        if v is not None:
            if isinstance(v, float) and not math.isfinite(v):
                raise ConfigError(f"{k}: value must be finite")
            cfg[k] = v
    if cfg.get("size") is not None:
        cfg["width"] = cfg["height"] = cfg["size"]
    out_dir = cfg.get("out_dir") or os.environ.get(OUTPUT_ENV) or "."
    cfg["out_dir"] = Path(out_dir)
    return cfg


def _require_file(path, what):
    if path is None or not Path(path).is_file():
        raise ConfigError(f"{what} file not found: {path}")
    return Path(path)


def _geometry(cfg) -> tomo.ScanGeometry:
    if cfg["detectors"] < 1:
        raise ConfigError("detectors must be >= 1")
    if cfg["angle_list"]:
        try:
            angles = [float(a) for a in cfg["angle_list"].split(",") if a.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad angle list {cfg['angle_list']!r}") from exc
        return tomo.ScanGeometry(angles, cfg["detectors"], cfg["spacing"])
    if cfg["angles"] < 1:
        raise ConfigError("angles must be >= 1")
    return tomo.ScanGeometry.uniform(cfg["angles"], cfg["detectors"], cfg["spacing"])


def _ground_truth(cfg):
    if cfg.get("phantom"):
        img = tomo.read_pgm(_require_file(cfg["phantom"], "phantom"))
        return img
    return tomo.make_phantom(cfg["kind"], cfg["width"], cfg["height"], cfg["seed"])


def _measurements(cfg):
    """Ground truth (or None), geometry, projector and sinogram for a run."""
    geometry = _geometry(cfg)
    if cfg.get("sinogram") or cfg.get("projector"):
        A = read_matrix_market(_require_file(cfg["projector"], "projector"))
        sino = tomo.read_sinogram_csv(_require_file(cfg["sinogram"], "sinogram"))
        if sino.y.shape[0] != A.n_rows:
            raise ConfigError("sinogram length does not match the projector")
        truth = None
        if cfg.get("phantom"):
            truth = tomo.read_pgm(_require_file(cfg["phantom"], "phantom"))
            width, height = truth.width, truth.height
        else:
            width, height = cfg["width"], cfg["height"]
        if width * height != A.n_cols:
            raise ConfigError("image size does not match the projector")
        return truth, geometry, A, sino, width, height
    truth = _ground_truth(cfg)
    A = tomo.build_projector(truth.width, truth.height, geometry)
    sino = tomo.simulate_sinogram(A, truth, cfg["sigma"], cfg["seed"])
    return truth, geometry, A, sino, truth.width, truth.height


def cmd_phantom(cfg, out):
    img = tomo.make_phantom(cfg["kind"], cfg["width"], cfg["height"], cfg["seed"])
    path = cfg["out_dir"] / (cfg["out"] or f"phantom_{cfg['kind']}.pgm")
    tomo.write_pgm(img, path)
    print(f"wrote {path} ({img.width}x{img.height}, {np.mean(img.pixels > 0):.3f} foreground)",
          file=out)


def cmd_project(cfg, out):
    truth = _ground_truth(cfg)
    geometry = _geometry(cfg)
    A = tomo.build_projector(truth.width, truth.height, geometry)
    sino = tomo.simulate_sinogram(A, truth, cfg["sigma"], cfg["seed"])
    d = cfg["out_dir"]
    write_matrix_market(A, d / "projector.mtx")
    tomo.write_sinogram_csv(sino, geometry, d / "sinogram.csv")
    tomo.write_pgm(truth, d / "truth.pgm")
    print(f"projector {A.n_rows}x{A.n_cols}, nnz={A.nnz}; wrote projector.mtx, sinogram.csv, truth.pgm",
          file=out)


def cmd_solve(cfg, out):
    truth, geometry, A, sino, width, height = _measurements(cfg)
    theta = cfg["theta"]
    if theta is None:
        theta = tomo.default_theta(geometry.n_detectors, sino.sigma)
    term = BallDistanceTerm(A, sino.y, theta)
    alpha = cfg["alpha"] if cfg["alpha"] is not None else tomo.default_step(term.lipschitz)
    config = SolverConfig(alpha=alpha, eps=cfg["eps"], mode=cfg["mode"],
                          max_iterations=cfg["max_iter"], step_tolerance=cfg["tol"])
    # a feasible ground truth is a solution; log distances to it with the
    # binary penalty's sharpness constant as the nominal mu
    known = truth if truth is not None and term.value(truth.vector()) == 0.0 else None
    img, traj = tomo.reconstruct_crbt(A, sino, width, height, theta=theta, config=config,
                                      lipschitz=term.lipschitz, truth=known,
                                      mu=None if known is None else NOMINAL_MU)
    d = cfg["out_dir"]
    tomo.write_pgm(img, d / "reconstruction.pgm")
    extra = {"theta": theta}
    if truth is not None:
        extra["misclassification"] = tomo.misclassification_rate(img, truth)
    write_trajectory_csv(traj, d / "trajectory.csv", extra)
    print(f"status={traj.status} iterations={traj.n_iterations} alpha={alpha:.6g} "
          f"theta={theta:.6g} objective={traj.records[-1].objective:.6g}", file=out)
    if truth is not None:
        print(f"misclassification={extra['misclassification']:.6g}", file=out)
    if traj.status.startswith("error"):
        raise RuntimeError(traj.status)


def cmd_baseline(cfg, out):
    truth, geometry, A, sino, width, height = _measurements(cfg)
    x = tomo.lsqr_solve(A, sino.y, cfg["lsqr_iter"])
    img = tomo.threshold_to_binary(x, width, height)
    d = cfg["out_dir"]
    with open(d / "lsqr.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("pixel,value\n")
        for j, v in enumerate(x.tolist()):
            fh.write(f"{j},{v:.17g}\n")
    tomo.write_pgm(img, d / "tlsqr.pgm")
    print(f"lsqr iterations={cfg['lsqr_iter']} residual={np.linalg.norm(A.matvec(x) - sino.y):.6g}",
          file=out)
    if truth is not None:
        print(f"tlsqr misclassification={tomo.misclassification_rate(img, truth):.6g}", file=out)


def _summary_float(summary, key):
    v = summary.get(key, "")
    return float(v) if v != "" else None


def cmd_diagnose(cfg, out):
    path = _require_file(cfg["trajectory"], "trajectory")
    cols, summary = read_trajectory_csv(path)
    mode = summary.get("mode", "exact")
    alpha = _summary_float(summary, "alpha")
    eps = _summary_float(summary, "eps") or 0.0
    rho = _summary_float(summary, "rho")
    mu = _summary_float(summary, "mu")
    if alpha is None or rho is None:
        raise ConfigError(f"{path}: summary rows lack alpha/rho")
    print(f"mode={mode} alpha={alpha:.17g} eps={eps:.17g} rho={rho:.17g} mu={mu}", file=out)
    mismatch = 0.0
    if mu is not None:
        th = diag.compute_thresholds(mu, rho, alpha, eps)
        print(f"E_minus={th.E_minus:.17g} E_plus={th.E_plus:.17g} tau1={th.tau1:.17g} "
              f"tau2={th.tau2:.17g}", file=out)
        dist, zeta = cols["dist_to_S"], cols["zeta"]
        checked = 0
        for t in range(1, dist.shape[0]):
            if np.isnan(zeta[t]) or np.isnan(dist[t]):
                continue
            z = diag.contraction_factor(dist[t], mu, rho, alpha, th.E_minus, mode)
            mismatch = max(mismatch, abs(z - zeta[t]))
            checked += 1
        print(f"zeta recomputed at {checked} iterations, max abs diff={mismatch:.3e}", file=out)
        d = dist[~np.isnan(dist)]
        try:
            fit = diag.rate_fit(d)
            print(f"rate fit: factor={fit.factor:.6g} r_squared={fit.r_squared:.6g} "
                  f"points={fit.n_points}", file=out)
        except ValueError as exc:
            print(f"rate fit skipped: {exc}", file=out)
    pen = BinaryPenalty(-1.0, 1.0)
    rep = diag.sharpness_probe(
        lambda X: np.sum(np.abs(X * X - 1.0), axis=1), 0.0,
        lambda X: np.where(X < 0, -1.0, 1.0),
        diag.uniform_box_sampler(cfg["dim"]), cfg["samples"], mu=pen.mu, seed=cfg["seed"],
        batched=True)
    print(f"sharpness probe (binary penalty, n={cfg['dim']}): min_ratio={rep.min_ratio:.6g} "
          f"violations={rep.violations}", file=out)
    if mismatch > 1e-12:
        raise RuntimeError(f"logged zeta differs from recomputation by {mismatch:.3e}")


def demo_problem() -> CompositeProblem:
    """``|x^2 - 1| + (x - 1)^2 / 2`` on the real line."""
    pen = BinaryPenalty(-1.0, 1.0, 1)
    return CompositeProblem(
        f_value=pen.value, f_prox=pen.prox,
        g_value=lambda x: 0.5 * float((x[0] - 1.0) ** 2),
        g_gradient=lambda x: np.asarray(x, dtype=np.float64) - 1.0,
        rho=2.0, lipschitz=1.0, mu=1.0, solution_projector=lambda x: np.ones_like(x),
        name="demo-1d")


def cmd_demo(cfg, out):
    alpha = cfg["alpha"] if cfg["alpha"] is not None else 0.3
    config = SolverConfig(alpha=alpha, max_iterations=cfg["max_iter"], step_tolerance=cfg["tol"])
    traj = run_fb(demo_problem(), config, [cfg["x0"]])
    print("t,x_hash,objective,step_norm,dist_to_S", file=out)
    for r in traj.records:
        step = "" if r.step_norm is None else f"{r.step_norm:.17g}"
        print(f"{r.t},{r.x_hash},{r.objective:.17g},{step},{r.dist_to_S:.17g}", file=out)
    print(f"x_final={traj.x_final[0]:.17g} status={traj.status}", file=out)
    if cfg.get("out_dir") and cfg["out_dir"] != Path("."):
        write_trajectory_csv(traj, cfg["out_dir"] / "demo_trajectory.csv")


_DISPATCH = {
    "phantom": cmd_phantom,
    "project": cmd_project,
    "solve": cmd_solve,
    "baseline": cmd_baseline,
    "diagnose": cmd_diagnose,
    "demo-1d": cmd_demo,
}


def run_cli(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = resolve(args)
        if not cfg["out_dir"].is_dir():
            cfg["out_dir"].mkdir(parents=True, exist_ok=True)
        _DISPATCH[args.command](cfg, out)
    except (ConfigError, ParameterError, FileNotFoundError) as exc:
        print(f"wcfb {args.command}: error: {exc}", file=err)
        parser.print_usage(err)
        return 2
    except Exception as exc:
        print(f"wcfb {args.command}: failed: {type(exc).__name__}: {exc}", file=err)
        return 1
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
