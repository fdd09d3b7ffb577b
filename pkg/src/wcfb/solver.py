"""Forward-backward splitting with exact or inexact proximal steps.

Each iteration takes a gradient step on the smooth term and then an
(``eps``-inexact) proximal step on the weakly convex term. Step size and
accuracy are checked against the admissible region before a run, and the
run logs objective values, step norms, distances to the solution set and
contraction factors.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .diagnostics import Thresholds, compute_thresholds, contraction_factor
from .errors import ParameterError, SolutionReached
from .functions import CompositeProblem
from .linalg import as_vector

__all__ = [
    "SolverConfig",
    "ParamReport",
    "IterationRecord",
    "Trajectory",
    "validate_parameters",
    "fb_step",
    "run_fb",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "TRAJECTORY_HEADER",
]

DESCENT_SLACK = 1e-12
TRAJECTORY_HEADER = ["t", "objective", "f_value", "g_value", "step_norm", "dist_to_S", "zeta"]


@dataclass(frozen=True)
class SolverConfig:
    """Fixed step size ``alpha`` and prox accuracy ``eps`` for one run.

    ``step_tolerance=None`` disables the step-norm stop, so exactly
    ``max_iterations`` steps are taken. ``dist_tolerance`` stops once the
    distance to ``S`` falls below it (needs a solution projector).
    ``override=True`` runs even when the parameters fail validation; the
    trajectory records that it did.
    """

    alpha: float
    eps: float = 0.0
    max_iterations: int = 1000
    step_tolerance: Optional[float] = 1e-10
    mode: str = "exact"
    log_distances: bool = True
    override: bool = False
    dist_tolerance: Optional[float] = None
    keep_iterates: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ParameterError("alpha must be positive and finite")
        if not (math.isfinite(self.eps) and self.eps >= 0):
            raise ParameterError("eps must be nonnegative and finite")
        if self.max_iterations < 0:
            raise ParameterError("max_iterations must be >= 0")
        if self.mode not in ("exact", "inexact"):
            raise ParameterError(f"mode must be 'exact' or 'inexact', got {self.mode!r}")
        if self.mode == "exact" and self.eps != 0:
            raise ParameterError("exact mode requires eps = 0")
        if self.mode == "inexact" and self.eps <= 0:
            raise ParameterError("inexact mode requires eps > 0")


@dataclass(frozen=True)
class ParamReport:
    """Bounds of the admissible ``(alpha, eps)`` region and the verdict.

    ``valid`` is the full condition used by the inexact analysis;
    ``exact_valid`` is the weaker ``alpha < min(1/L_g, 1/rho)`` that suffices
    for exact steps.
    """

    eps_bound: float
    alpha_lower: float
    alpha_upper: float
    exact_alpha_upper: float
    descent_alpha_upper: float
    valid: bool
    exact_valid: bool
    violated_conditions: tuple = ()


def _recip(v):
    return math.inf if v == 0 else 1.0 / v


def validate_parameters(rho: float, L_g: float, mu: Optional[float], alpha: float,
                        eps: float) -> ParamReport:
    """Check ``(alpha, eps)`` against the admissible region.

    The region is ``eps < mu^2/(2(rho+1)) min(1/(L_g+1), 1/(rho+2))`` and
    ``2 eps (rho+1)/(mu^2 - 2 eps (rho+1)) <= alpha < min(1/L_g, 1/(rho+1))``.
    For ``eps = 0`` only the upper step bound remains.

    Raises
    ------
    ParameterError
        If ``eps > 0`` and ``mu`` is missing or nonpositive.
    """
    if rho < 0 or L_g < 0 or eps < 0:
        raise ParameterError("need rho >= 0, L_g >= 0 and eps >= 0")
    if eps > 0 and (mu is None or not mu > 0):
        raise ParameterError("a positive sharpness constant mu is required when eps > 0")
    violated = []
    if mu is not None and mu > 0:
        eps_bound = mu * mu / (2.0 * (rho + 1.0) * max(L_g + 1.0, rho + 2.0))
        denom = mu * mu - 2.0 * eps * (rho + 1.0)
        alpha_lower = 2.0 * eps * (rho + 1.0) / denom if denom > 0 else math.inf
    else:
        eps_bound = math.nan
        alpha_lower = 0.0
    alpha_upper = min(_recip(L_g), _recip(rho + 1.0))
    exact_upper = min(_recip(L_g), _recip(rho))
    descent_upper = _recip((rho + L_g) / 2.0)
    if eps > 0 and not eps < eps_bound:
        violated.append(f"eps={eps:.6g} >= eps_bound={eps_bound:.6g}")
    if not alpha >= alpha_lower:
        violated.append(f"alpha={alpha:.6g} < alpha_lower={alpha_lower:.6g}")
    if not alpha < alpha_upper:
        violated.append(f"alpha={alpha:.6g} >= alpha_upper={alpha_upper:.6g}")
    if not alpha > 0:
        violated.append("alpha must be positive")
    exact_valid = bool(eps == 0 and 0 < alpha < exact_upper)
    return ParamReport(eps_bound, alpha_lower, alpha_upper, exact_upper, descent_upper,
                       not violated, exact_valid, tuple(violated))


def fb_step(x, alpha: float, g_gradient: Callable, f_prox: Callable) -> np.ndarray:
    """One forward-backward step ``f_prox(x - alpha * grad g(x), alpha)``."""
    x = np.asarray(x, dtype=np.float64)
    return np.asarray(f_prox(x - alpha * g_gradient(x), alpha), dtype=np.float64)


@dataclass
class IterationRecord:
    t: int
    objective: float
    f_value: float
    g_value: float
    step_norm: Optional[float]
    dist_to_S: Optional[float]
    zeta: Optional[float]
    certificate: Optional[bool]
    x_hash: str


@dataclass
class Trajectory:
    """Per-iteration log of one run plus the run's settings and verdicts."""

    records: List[IterationRecord]
    x_final: np.ndarray
    status: str
    alpha: float
    eps: float
    mode: str
    rho: float
    lipschitz: float
    mu: Optional[float]
    report: ParamReport
    thresholds: Optional[Thresholds] = None
    overridden: bool = False
    descent_checked: bool = False
    descent_violations: List[int] = field(default_factory=list)
    iterates: Optional[List[np.ndarray]] = None

    @property
    def n_iterations(self) -> int:
        return len(self.records) - 1

    def column(self, name: str) -> np.ndarray:
        """Column of the log as floats, ``nan`` where a value is missing."""
        return np.array([np.nan if getattr(r, name) is None else float(getattr(r, name))
                         for r in self.records])

    def summary(self) -> dict:
        out = {
            "status": self.status,
            "mode": self.mode,
            "alpha": self.alpha,
            "eps": self.eps,
            "rho": self.rho,
            "lipschitz": self.lipschitz,
            "mu": "" if self.mu is None else self.mu,
            "overridden": int(self.overridden),
            "valid": int(self.report.valid),
            "exact_valid": int(self.report.exact_valid),
            "descent_checked": int(self.descent_checked),
            "descent_violations": len(self.descent_violations),
            "iterations": self.n_iterations,
            "final_x_hash": self.records[-1].x_hash,
        }
        if self.thresholds is not None:
            out.update(E_minus=self.thresholds.E_minus, E_plus=self.thresholds.E_plus,
                       tau1=self.thresholds.tau1, tau2=self.thresholds.tau2)
        return out


def _hash(x: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(x, dtype=np.float64).tobytes()).hexdigest()[:16]


def run_fb(problem: CompositeProblem, config: SolverConfig, x0) -> Trajectory:
    """Run forward-backward splitting from ``x0``.

    Exact mode accepts ``alpha < min(1/L_g, 1/rho)``; inexact mode needs the
    full admissible region. In exact mode with ``2/alpha > rho + L_g`` every
    objective decrease is checked against ``-1e-12``; in inexact mode against
    ``-eps - sqrt(2 eps/alpha) * step_norm - 1e-12``. Failing iterations are
    listed in ``descent_violations``.

    An oracle error ends the run early with ``status = "error: ..."``.
    """
    x = as_vector(x0, name="x0").copy()
    alpha, eps, mode = config.alpha, config.eps, config.mode
    report = validate_parameters(problem.rho, problem.lipschitz, problem.mu, alpha, eps)
    accepted = report.valid or (mode == "exact" and report.exact_valid)
    if not accepted and not config.override:
        raise ParameterError("invalid solver parameters: " + "; ".join(report.violated_conditions))

    if mode == "exact":
        if problem.f_prox is None:
            raise ParameterError("exact mode needs an exact prox oracle")
        prox = problem.f_prox
    else:
        if problem.f_eps_prox is None:
            raise ParameterError("inexact mode needs an eps-prox oracle")

        def prox(y, a):
            return problem.f_eps_prox(y, a, eps)

    thresholds = None
    if problem.mu is not None and problem.rho > 0:
        try:
            thresholds = compute_thresholds(problem.mu, problem.rho, alpha, eps)
        except ParameterError:
            if not config.override:
                raise
    track = config.log_distances and problem.solution_projector is not None
    E_minus = thresholds.E_minus if thresholds is not None else 0.0
    with_zeta = track and thresholds is not None

    def measure(z, t, step, cert):
        fv, gv = float(problem.f_value(z)), float(problem.g_value(z))
        dist = problem.dist_to_solutions(z) if track else None
        zeta = None
        if with_zeta and t > 0:
            try:
                zeta = contraction_factor(dist, problem.mu, problem.rho, alpha, E_minus, mode)
            except SolutionReached:
                zeta = None
        return IterationRecord(t, fv + gv, fv, gv, step, dist, zeta, cert, _hash(z))

    records = [measure(x, 0, None, None)]
    iterates = [x.copy()] if config.keep_iterates else None
    descent_checked = (mode == "inexact") or (2.0 / alpha > problem.rho + problem.lipschitz)
    violations: List[int] = []
    status = "max_iterations"
    if config.dist_tolerance is not None and track and records[0].dist_to_S <= config.dist_tolerance:
        status = "dist_tolerance"
    else:
        for t in range(1, config.max_iterations + 1):
            cert = None
            try:
                out = prox(x - alpha * problem.g_gradient(x), alpha)
                if isinstance(out, tuple):
                    out, c = out
                    cert = bool(c.satisfied)
                x_new = as_vector(out, x.shape[0], name="prox output")
            except Exception as exc:  # oracle failure truncates the run
                status = f"error: {type(exc).__name__}: {exc}"
                break
            step = float(np.linalg.norm(x_new - x))
            rec = measure(x_new, t, step, cert)
            decrease = records[-1].objective - rec.objective
            if mode == "exact":
                floor = -DESCENT_SLACK
            else:
                floor = -eps - math.sqrt(2.0 * eps / alpha) * step - DESCENT_SLACK
            if descent_checked and decrease < floor:
                violations.append(t)
            records.append(rec)
            x = x_new
            if iterates is not None:
                iterates.append(x.copy())
            if config.step_tolerance is not None and step <= config.step_tolerance:
                status = "converged"
                break
            if (config.dist_tolerance is not None and track
                    and rec.dist_to_S <= config.dist_tolerance):
                status = "dist_tolerance"
                break

    return Trajectory(records, x, status, alpha, eps, mode, float(problem.rho),
                      float(problem.lipschitz), problem.mu, report, thresholds,
                      overridden=not accepted, descent_checked=descent_checked,
                      descent_violations=violations, iterates=iterates)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_trajectory_csv(traj: Trajectory, path, extra_summary: Optional[dict] = None) -> None:
    """Write the per-iteration table followed by ``#summary,key,value`` rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for r in traj.records:
            w.writerow([_fmt(r.t), _fmt(r.objective), _fmt(r.f_value), _fmt(r.g_value),
                        _fmt(r.step_norm), _fmt(r.dist_to_S), _fmt(r.zeta)])
        summary = traj.summary()
        if extra_summary:
            summary.update(extra_summary)
        for k, v in summary.items():
            w.writerow(["#summary", k, _fmt(v)])


def read_trajectory_csv(path):
    """Read a trajectory CSV.

    Returns
    -------
    columns : dict of str -> ndarray
        One float array per header column, ``nan`` for empty cells.
    summary : dict of str -> str
        The ``#summary`` rows.
    """
    rows, summary = [], {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRAJECTORY_HEADER:
            raise ValueError(f"{path}: unexpected trajectory header {header!r}")
        for row in reader:
            if not row:
                continue
            if row[0] == "#summary":
                summary[row[1]] = row[2] if len(row) > 2 else ""
                continue
            rows.append([float(c) if c != "" else math.nan for c in row])
    data = np.array(rows, dtype=np.float64).reshape(-1, len(TRAJECTORY_HEADER))
    return {name: data[:, i] for i, name in enumerate(TRAJECTORY_HEADER)}, summary
