"""Weakly convex penalties, the ball-distance data term and composite problems.

The binary penalty ``sum_i |(x_i - a)(x_i - b)|`` is 2-weakly convex and
bounded below by ``(b - a)/2 * dist(x, {a, b}^n)``; its
proximal map has a closed form when ``(a, b) = (-1, 1)``. The data term
``0.5 * dist^2(Ax, B(y, theta))`` is convex with an ``||A||^2``-Lipschitz
gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError
from .linalg import CsrMatrix, as_vector, matvec, matvec_transpose, operator_norm_estimate

__all__ = [
    "BinaryPenalty",
    "SpherePenalty",
    "BallDistanceTerm",
    "CompositeProblem",
    "binary_penalty_value",
    "binary_penalty_prox",
    "binary_projection",
    "sphere_penalty_value",
    "sphere_penalty_prox",
    "norm_prox",
    "ball_projection",
    "dist_term_value",
    "dist_term_gradient",
    "reformulate_problem",
    "binary_tomography_problem",
]


def _check_prox_step(alpha):
    if not (0.0 < alpha < 0.5):
        raise ParameterError(f"prox step alpha={alpha!r} must lie in (0, 1/2)")


@dataclass(frozen=True)
class BinaryPenalty:
    """``f(x) = sum_i |(x_i - a)(x_i - b)|`` with roots ``a < b``."""

    a: float = -1.0
    b: float = 1.0
    n: Optional[int] = None

    def __post_init__(self):
        if not self.a < self.b:
            raise ParameterError(f"roots must satisfy a < b, got a={self.a}, b={self.b}")

    @property
    def rho(self) -> float:
        return 2.0

    @property
    def mu(self) -> float:
        return (self.b - self.a) / 2.0

    def value(self, x):
        return binary_penalty_value(self, x)

    def prox(self, y, alpha):
        return binary_penalty_prox(self, y, alpha)

    def project(self, x):
        """Nearest point of ``{a, b}^n``."""
        return binary_projection(x, self.a, self.b)


@dataclass(frozen=True)
class SpherePenalty:
    """``f(x) = | ||x||^2 - 1 |``, minimised on the unit sphere."""

    n: Optional[int] = None

    @property
    def rho(self) -> float:
        return 2.0

    @property
    def mu(self) -> float:
        return 1.0

    def value(self, x):
        return sphere_penalty_value(self, x)

    def prox(self, y, alpha):
        return sphere_penalty_prox(self, y, alpha)

    def project(self, x):
        x = as_vector(x, self.n)
        nrm = np.linalg.norm(x)
        if nrm == 0.0:
            e = np.zeros_like(x)
            e[0] = 1.0
            return e
        return x / nrm


def binary_penalty_value(p: BinaryPenalty, x) -> float:
    x = as_vector(x, p.n)
    return float(np.sum(np.abs((x - p.a) * (x - p.b))))


def binary_penalty_prox(p: BinaryPenalty, y, alpha: float) -> np.ndarray:
    """Closed-form proximal map of ``alpha * sum_i |x_i^2 - 1|``.

    Coordinatewise, ``y / (1 + 2 alpha)`` when ``|y| > 1 + 2 alpha``,
    ``y / (1 - 2 alpha)`` when ``|y| < 1 - 2 alpha`` and ``sign(y)`` on the
    closed band in between. Only the roots ``(-1, 1)`` are supported; other
    roots go through :func:`wcfb.inexact.eps_prox`.
    """
    if (p.a, p.b) != (-1.0, 1.0):
        raise NotImplementedError(
            "closed-form prox only exists for roots (-1, 1); use wcfb.inexact.eps_prox")
    _check_prox_step(alpha)
    y = as_vector(y, p.n, name="y")
    mag = np.abs(y)
    out = np.sign(y)
    outer = mag > 1.0 + 2.0 * alpha
    inner = mag < 1.0 - 2.0 * alpha
    out[outer] = y[outer] / (1.0 + 2.0 * alpha)
    out[inner] = y[inner] / (1.0 - 2.0 * alpha)
    return out


def binary_projection(x, a=-1.0, b=1.0) -> np.ndarray:
    """Componentwise nearest root; the midpoint goes to ``b``."""
    x = as_vector(x)
    return np.where(np.abs(x - a) < np.abs(x - b), a, b).astype(np.float64)


def sphere_penalty_value(p: SpherePenalty, x) -> float:
    x = as_vector(x, p.n)
    return float(abs(x @ x - 1.0))


def sphere_penalty_prox(p: SpherePenalty, y, alpha: float) -> np.ndarray:
    """Radial version of the binary prox; ``y = 0`` maps to ``e_1``."""
    _check_prox_step(alpha)
    y = as_vector(y, p.n, name="y")
    nrm = np.linalg.norm(y)
    if nrm > 1.0 + 2.0 * alpha:
        return y / (1.0 + 2.0 * alpha)
    if nrm == 0.0:
        e = np.zeros_like(y)
        e[0] = 1.0
        return e
    if nrm < 1.0 - 2.0 * alpha:
        return y / (1.0 - 2.0 * alpha)
    return y / nrm


def norm_prox(z, theta: float) -> np.ndarray:
    """Proximal map of ``theta * ||.||_2`` (block soft thresholding)."""
    if theta < 0:
        raise ParameterError("theta must be nonnegative")
    z = as_vector(z, name="z")
    nrm = np.linalg.norm(z)
    if nrm <= theta:
        return np.zeros_like(z)
    return (1.0 - theta / nrm) * z


def ball_projection(x, center, theta: float) -> np.ndarray:
    """Projection onto the closed ball ``B(center, theta)``."""
    if theta <= 0:
        raise ParameterError("ball radius must be positive")
    x = as_vector(x)
    center = as_vector(center, x.shape[0], name="center")
    return x - norm_prox(x - center, theta)


@dataclass(eq=False)
class BallDistanceTerm:
    """``g(x) = 0.5 * dist^2(A x, B(y, theta))``.

    ``lipschitz`` defaults to the squared power-iteration estimate of
    ``||A||`` (100 iterations).
    """

    A: CsrMatrix
    y: np.ndarray
    theta: float
    lipschitz: Optional[float] = None

    def __post_init__(self):
        self.y = as_vector(self.y, self.A.n_rows, name="y")
        if not self.theta > 0:
            raise ParameterError("theta must be positive")
        if self.lipschitz is None:
            self.lipschitz = operator_norm_estimate(self.A, 100) ** 2

    def residual(self, x):
        """``A x - proj_B(A x)``, which equals ``norm_prox(A x - y, theta)``."""
        x = as_vector(x, self.A.n_cols)
        return norm_prox(matvec(self.A, x) - self.y, self.theta)

    def value(self, x):
        return dist_term_value(self, x)

    def gradient(self, x):
        return dist_term_gradient(self, x)


def dist_term_value(t: BallDistanceTerm, x) -> float:
    r = t.residual(x)
    return 0.5 * float(r @ r)


def dist_term_gradient(t: BallDistanceTerm, x) -> np.ndarray:
    return matvec_transpose(t.A, t.residual(x))


@dataclass
class CompositeProblem:
    """Oracles and constants for ``min f(x) + g(x)``.

    ``f_prox(y, alpha)`` returns the exact proximal point of ``alpha f``;
    ``f_eps_prox(y, alpha, eps)`` returns an ``eps``-proximal point. The
    optional ``solution_projector`` maps ``x`` to its nearest point of the
    solution set ``S``.
    """

    f_value: Callable[[np.ndarray], float]
    f_prox: Optional[Callable[[np.ndarray, float], np.ndarray]]
    g_value: Callable[[np.ndarray], float]
    g_gradient: Callable[[np.ndarray], np.ndarray]
    rho: float
    lipschitz: float
    mu: Optional[float] = None
    solution_projector: Optional[Callable[[np.ndarray], np.ndarray]] = None
    f_eps_prox: Optional[Callable[[np.ndarray, float, float], np.ndarray]] = None
    name: str = field(default="problem")

    def __post_init__(self):
        if not (np.isfinite(self.rho) and np.isfinite(self.lipschitz)):
            raise ParameterError("rho and lipschitz must be finite")
        if self.rho < 0 or self.lipschitz < 0:
            raise ParameterError("rho and lipschitz must be nonnegative")
        if self.mu is not None and not self.mu > 0:
            raise ParameterError("sharpness constant mu must be positive")

    def objective(self, x) -> float:
        return self.f_value(x) + self.g_value(x)

    def dist_to_solutions(self, x):
        """Exact ``dist(x, S)``, or ``None`` without a projector."""
        if self.solution_projector is None:
            return None
        return float(np.linalg.norm(x - self.solution_projector(x)))


def reformulate_problem(rho_F, L_G, F_value, F_prox, G_value, G_gradient, *,
                        mu=None, solution_projector=None):
    """Move the concavity of a smooth term ``G`` into the nonsmooth part.

    With ``f = F - (L_G/2)||x||^2`` and ``g = (L_G/2)||x||^2 + G`` the sum is
    unchanged, ``f`` is ``(rho_F + L_G)``-weakly convex and ``g`` is convex
    with a ``2 L_G``-Lipschitz gradient. The prox of ``alpha f`` is obtained
    from the prox of ``F`` by rescaling (requires ``alpha L_G < 1``).
    """
    if rho_F < 0 or L_G < 0:
        raise ParameterError("rho_F and L_G must be nonnegative")
    if L_G == 0:
        return CompositeProblem(F_value, F_prox, G_value, G_gradient, float(rho_F), 0.0,
                                mu=mu, solution_projector=solution_projector)
    half = 0.5 * L_G

    def f_value(x):
        x = np.asarray(x, dtype=np.float64)
        return F_value(x) - half * float(x @ x)

    def g_value(x):
        x = np.asarray(x, dtype=np.float64)
        return half * float(x @ x) + G_value(x)

    def g_gradient(x):
        x = np.asarray(x, dtype=np.float64)
        return L_G * x + G_gradient(x)

    f_prox = None
    if F_prox is not None:
        def f_prox(y, alpha):
            shrink = 1.0 - alpha * L_G
            if shrink <= 0:
                raise ParameterError("reformulated prox needs alpha * L_G < 1")
            return F_prox(np.asarray(y, dtype=np.float64) / shrink, alpha / shrink)

    return CompositeProblem(f_value, f_prox, g_value, g_gradient,
                            float(rho_F + L_G), float(2.0 * L_G),
                            mu=mu, solution_projector=solution_projector)


def binary_tomography_problem(term: BallDistanceTerm, mu: Optional[float] = None,
                              solution=None) -> CompositeProblem:
    """``sum_i |x_i^2 - 1| + 0.5 dist^2(Ax, B(y, theta))`` as a composite problem.

    Parameters
    ----------
    mu : float, optional
        Sharpness constant to use in diagnostics, if one is known.
    solution : array, optional
        A known binary solution (e.g. a feasible ground truth). When given,
        the solution set is taken to be this single point, so distances and
        contraction factors can be logged.
    """
    from .inexact import SurrogateSpec, eps_prox

    penalty = BinaryPenalty(-1.0, 1.0, term.A.n_cols)

    def f_eps_prox(y, alpha, eps):
        if eps == 0:
            return penalty.prox(y, alpha)
        spec = SurrogateSpec.uniform(len(y), eps, penalty.a, penalty.b)
        return eps_prox(spec, y, alpha)

    projector = None
    if solution is not None:
        point = as_vector(solution, term.A.n_cols, name="solution")

        def projector(x):
            return point.copy()

    return CompositeProblem(
        f_value=penalty.value,
        f_prox=penalty.prox,
        g_value=term.value,
        g_gradient=term.gradient,
        rho=penalty.rho,
        lipschitz=float(term.lipschitz),
        mu=mu,
        solution_projector=projector,
        f_eps_prox=f_eps_prox,
        name="binary-tomography",
    )
