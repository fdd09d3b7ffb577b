"""Computable convergence quantities for forward-backward runs.

Tube radii ``E_minus``/``E_plus``, the critical-point rings ``tau1``/``tau2``,
per-iteration contraction factors, sampled sharpness and criticality
probes, and a geometric rate fit for distance sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError, SolutionReached
from .linalg import as_vector

__all__ = [
    "Thresholds",
    "compute_thresholds",
    "dist_to_binary_set",
    "contraction_factor",
    "uniform_exact_rate",
    "SharpnessReport",
    "sharpness_probe",
    "uniform_box_sampler",
    "eps_criticality_check",
    "RateFit",
    "rate_fit",
]

# tolerance on h(x) - h(x0) + C|x-x0|^2 + eps >= 0 to absorb rounding on
# probes where the inequality is tight
CRITICALITY_SLACK = 1e-12


@dataclass(frozen=True)
class Thresholds:
    """Tube radii around ``S`` and the rings of critical points.

    ``exact_tube`` is ``2 mu / rho``, the radius inside which exact steps
    contract (``zeta = 1`` on its boundary). At the smallest admissible step
    size the tube radicand vanishes and ``E_minus == E_plus``.
    """

    E_minus: float
    E_plus: float
    tau1: float
    tau2: float
    tube_radicand: float
    ring_radicand: float
    exact_tube: float

    def as_tuple(self):
        return (self.E_minus, self.E_plus, self.tau1, self.tau2)

    def ordered(self) -> bool:
        return self.tau1 <= self.E_minus < self.E_plus <= self.tau2


def compute_thresholds(mu: float, rho: float, alpha: float, eps: float) -> Thresholds:
    """Evaluate ``E_minus, E_plus`` and ``tau1, tau2`` (with ``C = rho/2``).

    Raises
    ------
    ParameterError
        If a square root argument is negative, which happens exactly when
        ``alpha`` is below its lower bound ``2 eps (rho+1)/(mu^2 - 2 eps (rho+1))``
        or ``eps`` exceeds ``mu^2/(2 rho)``.
    """
    if not (mu > 0 and rho > 0 and alpha > 0 and eps >= 0):
        raise ParameterError("need mu > 0, rho > 0, alpha > 0 and eps >= 0")
    tube_rad = mu * mu - 2.0 * eps * (rho + 1.0) * (alpha + 1.0) / alpha
    C = rho / 2.0
    ring_rad = mu * mu - 4.0 * C * eps
    # rounding at the step-size lower bound can leave a tiny negative value
    if -1e-12 * mu * mu <= tube_rad < 0:
        tube_rad = 0.0
    if -1e-12 * mu * mu <= ring_rad < 0:
        ring_rad = 0.0
    if tube_rad < 0:
        raise ParameterError(
            f"tube radicand {tube_rad:.3e} < 0: the step-size lower bound "
            f"alpha >= 2 eps (rho+1)/(mu^2 - 2 eps (rho+1)) is violated")
    if ring_rad < 0:
        raise ParameterError(f"ring radicand {ring_rad:.3e} < 0: eps > mu^2/(2 rho)")
    root = math.sqrt(tube_rad)
    ring = math.sqrt(ring_rad)
    return Thresholds(
        E_minus=(mu - root) / (rho + 1.0),
        E_plus=(mu + root) / (rho + 1.0),
        tau1=(mu - ring) / (2.0 * C),
        tau2=(mu + ring) / (2.0 * C),
        tube_radicand=tube_rad,
        ring_radicand=ring_rad,
        exact_tube=2.0 * mu / rho,
    )


def dist_to_binary_set(x, a: float = -1.0, b: float = 1.0):
    """Distance to ``{a, b}^n`` and the nearest point (midpoint ties go to ``b``)."""
    if not a < b:
        raise ParameterError("need a < b")
    x = as_vector(x)
    nearest = np.where(np.abs(x - a) < np.abs(x - b), a, b).astype(np.float64)
    return float(np.linalg.norm(x - nearest)), nearest


def contraction_factor(dist_next: float, mu: float, rho: float, alpha: float,
                       E_minus: float = 0.0, mode: str = "exact") -> float:
    """Per-iteration factor ``zeta`` multiplying the next squared distance.

    exact:   ``1 - alpha rho + 2 alpha mu / dist_next``
    inexact: ``1 - alpha rho - alpha + 2 alpha mu / (dist_next + E_minus)``

    Raises
    ------
    SolutionReached
        In exact mode when ``dist_next == 0``.
    """
    if mode == "exact":
        if dist_next <= 0:
            raise SolutionReached("iterate lies in S; contraction factor undefined")
        return 1.0 - alpha * rho + 2.0 * alpha * mu / dist_next
    if mode == "inexact":
        denom = dist_next + E_minus
        if denom <= 0:
            raise SolutionReached("dist + E_minus is zero; contraction factor undefined")
        return 1.0 - alpha * rho - alpha + 2.0 * alpha * mu / denom
    raise ValueError(f"unknown mode {mode!r}")


def uniform_exact_rate(dist0: float, mu: float, rho: float, alpha: float) -> float:
    """Lower bound ``1 + alpha (2 mu / dist0 - rho)`` on every exact-mode factor.

    Valid once ``dist0 < 2 mu / rho``, since distances then keep decreasing.
    """
    if dist0 <= 0:
        raise SolutionReached("start point lies in S")
    return 1.0 + alpha * (2.0 * mu / dist0 - rho)


@dataclass(frozen=True)
class SharpnessReport:
    min_ratio: float
    violations: int
    evaluated: int
    skipped: int


def uniform_box_sampler(n: int, low: float = -3.0, high: float = 3.0):
    """Sampler drawing uniform points of ``[low, high]^n``."""
    def draw(rng, count):
        return rng.uniform(low, high, size=(count, n))
    return draw


def sharpness_probe(h: Callable, optimal_value: float, solution_projector: Callable,
                    sampler: Callable, n_samples: int, mu: float = 1.0, seed: int = 0,
                    batched: bool = False) -> SharpnessReport:
    """Sample ``(h(x) - optimal_value) / dist(x, S)`` and count ratios below ``mu``.

    ``sampler(rng, count)`` returns a ``(count, n)`` array. With
    ``batched=True``, ``h`` and ``solution_projector`` act on whole arrays
    (rows are points). Samples lying in ``S`` are skipped.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    pts = np.asarray(sampler(rng, n_samples), dtype=np.float64)
    if batched:
        vals = np.asarray(h(pts), dtype=np.float64)
        dists = np.linalg.norm(pts - solution_projector(pts), axis=1)
    else:
        vals = np.array([h(p) for p in pts])
        dists = np.array([np.linalg.norm(p - solution_projector(p)) for p in pts])
    keep = dists > 0
    ratios = (vals[keep] - optimal_value) / dists[keep]
    min_ratio = float(ratios.min()) if ratios.size else float("inf")
    return SharpnessReport(min_ratio, int(np.sum(ratios < mu)), int(ratios.size),
                           int(n_samples - ratios.size))


def eps_criticality_check(h: Callable, x0, C: float, eps: float, sampler: Optional[Callable] = None,
                          n_probes: int = 10_000, radius: float = 3.0, seed: int = 0,
                          probes=None) -> bool:
    """Sampled test of ``0`` being a proximal ``eps``-subgradient at ``x0``.

    Checks ``h(x) - h(x0) >= -C ||x - x0||^2 - eps`` (up to 1e-12) on the
    given ``probes`` or on ``n_probes`` points ``x0 + radius * N(0, I)``
    (or ``sampler(rng, n_probes)`` when supplied). ``False`` is a
    certified witness of non-criticality; ``True`` only means no probe
    found one.
    """
    if C < 0 or eps < 0:
        raise ParameterError("need C >= 0 and eps >= 0")
    x0 = as_vector(x0, name="x0")
    if probes is None:
        rng = np.random.default_rng(seed)
        if sampler is None:
            probes = x0 + radius * rng.standard_normal((n_probes, x0.shape[0]))
        else:
            probes = sampler(rng, n_probes)
    probes = np.asarray(probes, dtype=np.float64).reshape(-1, x0.shape[0])
    h0 = h(x0)
    for p in probes:
        gap = h(p) - h0 + C * float(np.sum((p - x0) ** 2)) + eps
        if gap < -CRITICALITY_SLACK:
            return False
    return True


@dataclass(frozen=True)
class RateFit:
    factor: float
    r_squared: float
    n_points: int


def rate_fit(distances) -> RateFit:
    """Least-squares fit of ``log dist_t^2 = c + t log(factor)``.

    The fit uses the leading run of positive entries; at least three are
    required.
    """
    d = np.asarray(distances, dtype=np.float64).ravel()
    bad = np.flatnonzero(~(d > 0))
    if bad.size:
        d = d[:bad[0]]
    if d.size < 3:
        raise ValueError("rate_fit needs at least 3 leading positive distances")
    t = np.arange(d.size, dtype=np.float64)
    logs = 2.0 * np.log(d)
    tc = t - t.mean()
    slope = float(tc @ (logs - logs.mean()) / (tc @ tc))
    resid = logs - logs.mean() - slope * tc
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(math.exp(slope), r2, int(d.size))
