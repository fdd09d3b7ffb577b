"""Inexact proximal points of the two-root penalty via a smooth surrogate.

The penalty ``F(x) = sum_i |(x_i - a_i)(x_i - b_i)|`` is replaced by
``F_hat(x) = sum_i sqrt(((x_i - a_i)(x_i - b_i))^2 + eps_i^2)``, which is
smooth and satisfies ``F <= F_hat <= F + sum_i eps_i``. For ``alpha < 1/2``
both prox objectives are strongly convex, so the exact minimiser of the
surrogate prox objective lies in the ``sum_i eps_i`` sublevel set of the
true one, i.e. it is an ``eps``-proximal point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConvergenceError, DimensionError, ParameterError
from .linalg import as_vector

__all__ = [
    "SurrogateSpec",
    "EpsProxCertificate",
    "surrogate_value",
    "penalty_value",
    "exact_two_root_prox",
    "eps_prox",
    "certify_eps_solution",
]

CERTIFICATE_SLACK = 1e-12
DERIVATIVE_TOL = 1e-12
MAX_NEWTON_ITERATIONS = 200


@dataclass(frozen=True, eq=False)
class SurrogateSpec:
    """Per-coordinate roots ``a_i < b_i`` and smoothing levels ``eps_i > 0``."""

    a: np.ndarray
    b: np.ndarray
    eps: np.ndarray

    def __post_init__(self):
        eps = as_vector(self.eps, name="eps")
        a = np.broadcast_to(as_vector(self.a, name="a"), eps.shape).astype(np.float64)
        b = np.broadcast_to(as_vector(self.b, name="b"), eps.shape).astype(np.float64)
        if np.any(eps <= 0):
            raise ParameterError("smoothing levels must be positive")
        if np.any(a >= b):
            raise ParameterError("roots must satisfy a_i < b_i")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "eps", eps)

    @property
    def n(self) -> int:
        return int(self.eps.shape[0])

    @property
    def budget(self) -> float:
        """Total accuracy ``sum_i eps_i``."""
        return float(np.sum(self.eps))

    @classmethod
    def uniform(cls, n: int, total_eps: float, a=-1.0, b=1.0):
        """Split a total budget evenly over ``n`` coordinates."""
        if n < 1:
            raise DimensionError("n must be >= 1")
        if not total_eps > 0:
            raise ParameterError("total smoothing budget must be positive")
        return cls(np.full(n, float(a)), np.full(n, float(b)), np.full(n, total_eps / n))


@dataclass(frozen=True, eq=False)
class EpsProxCertificate:
    """Outcome of comparing a candidate with a reference minimiser.

    ``satisfied`` holds exactly when
    ``candidate_value <= reference_value + budget + 1e-12``.
    """

    candidate: np.ndarray
    candidate_value: float
    reference_value: float
    budget: float
    satisfied: bool
    surrogate_value: float = float("nan")

    @property
    def gap(self) -> float:
        return self.candidate_value - self.reference_value


def _check(s: SurrogateSpec, x, name="x"):
    return as_vector(x, s.n, name=name)


def penalty_value(s: SurrogateSpec, x) -> float:
    """Nonsmooth penalty ``sum_i |(x_i - a_i)(x_i - b_i)|``."""
    x = _check(s, x)
    return float(np.sum(np.abs((x - s.a) * (x - s.b))))


def surrogate_value(s: SurrogateSpec, x) -> float:
    x = _check(s, x)
    q = (x - s.a) * (x - s.b)
    return float(np.sum(np.sqrt(q * q + s.eps * s.eps)))


def _check_alpha(alpha):
    if not (0.0 < alpha < 0.5):
        raise ParameterError(f"alpha={alpha!r} must lie in (0, 1/2) so the prox objective is strongly convex")


def _prox_objective(values, x, y, alpha):
    return values + np.sum((x - y) ** 2) / (2.0 * alpha)


def exact_two_root_prox(s: SurrogateSpec, y, alpha: float) -> np.ndarray:
    """Exact prox of ``alpha * sum_i |(x_i - a_i)(x_i - b_i)|``.

    On each of the three pieces cut by the roots the objective is a strictly
    convex quadratic, so the minimiser is the best of the clipped stationary
    points of the pieces. Used as the certification reference.
    """
    _check_alpha(alpha)
    y = _check(s, y, "y")
    a, b = s.a, s.b
    outer = (y + alpha * (a + b)) / (1.0 + 2.0 * alpha)
    inner = (y - alpha * (a + b)) / (1.0 - 2.0 * alpha)
    cands = np.stack([
        np.minimum(outer, a),
        np.maximum(outer, b),
        np.clip(inner, a, b),
    ])

    def obj(x):
        return np.abs((x - a) * (x - b)) + (x - y) ** 2 / (2.0 * alpha)

    vals = np.stack([obj(c) for c in cands])
    pick = np.argmin(vals, axis=0)
    return cands[pick, np.arange(s.n)]


def eps_prox(s: SurrogateSpec, y, alpha: float):
    """Minimise the surrogate prox objective coordinatewise.

    Each scalar problem is solved by Newton's method on the derivative,
    safeguarded by a bisection bracket ``[min(y_i, a_i) - 1, max(y_i, b_i) + 1]``.
    A coordinate is converged once ``|derivative| < 1e-12`` or its bracket has
    shrunk to adjacent floats.

    Returns
    -------
    x : ndarray
        The surrogate minimiser, an ``s.budget``-proximal point.
    certificate : EpsProxCertificate
        Check against the exact prox objective and exact minimiser.

    Raises
    ------
    ConvergenceError
        If some coordinate is not converged after 200 iterations.
    """
    _check_alpha(alpha)
    y = _check(s, y, "y")
    a, b, e2 = s.a, s.b, s.eps ** 2
    inv_alpha = 1.0 / alpha
    mid = 0.5 * (a + b)
    lo = np.minimum(y, a) - 1.0
    hi = np.maximum(y, b) + 1.0

    def derivs(x):
        q = (x - a) * (x - b)
        dq = 2.0 * (x - mid)
        root = np.sqrt(q * q + e2)
        d1 = q * dq / root + (x - y) * inv_alpha
        d2 = dq * dq * e2 / root ** 3 + 2.0 * q / root + inv_alpha
        return d1, d2

    x = np.clip(exact_two_root_prox(s, y, alpha), lo, hi)
    done = np.zeros(s.n, dtype=bool)
    for _ in range(MAX_NEWTON_ITERATIONS):
        d1, d2 = derivs(x)
        done |= np.abs(d1) < DERIVATIVE_TOL
        done |= np.nextafter(lo, hi) >= hi
        if np.all(done):
            break
        act = ~done
        pos = act & (d1 > 0)
        neg = act & (d1 < 0)
        hi = np.where(pos, x, hi)
        lo = np.where(neg, x, lo)
        newton = x - d1 / d2
        inside = (newton > lo) & (newton < hi)
        step = np.where(inside, newton, 0.5 * (lo + hi))
        x = np.where(act, step, x)
    else:
        d1, _ = derivs(x)
        bad = np.flatnonzero(~done)
        raise ConvergenceError(
            f"surrogate prox did not converge for {bad.size} coordinate(s); "
            f"first index {bad[0]}, |derivative|={abs(d1[bad[0]]):.3e}")

    reference = exact_two_root_prox(s, y, alpha)

    def h(z):
        return _prox_objective(penalty_value(s, z), z, y, alpha)

    cert = certify_eps_solution(h, x, reference, s.budget)
    cert = EpsProxCertificate(cert.candidate, cert.candidate_value, cert.reference_value,
                              cert.budget, cert.satisfied,
                              surrogate_value=_prox_objective(surrogate_value(s, x), x, y, alpha))
    return x, cert


def certify_eps_solution(h_value: Callable[[np.ndarray], float], candidate, reference,
                         eps: float) -> EpsProxCertificate:
    """Check ``h(candidate) <= h(reference) + eps`` with a 1e-12 slack."""
    if eps < 0:
        raise ParameterError("eps must be nonnegative")
    candidate = np.asarray(candidate, dtype=np.float64)
    hc = float(h_value(candidate))
    hr = float(h_value(np.asarray(reference, dtype=np.float64)))
    ok = bool(hc <= hr + eps + CERTIFICATE_SLACK)
    return EpsProxCertificate(candidate, hc, hr, float(eps), ok)
