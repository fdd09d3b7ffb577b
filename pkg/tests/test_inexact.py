import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wcfb.errors import ParameterError
from wcfb.functions import BinaryPenalty, binary_penalty_prox
from wcfb.inexact import (SurrogateSpec, certify_eps_solution, eps_prox, exact_two_root_prox,
                          penalty_value, surrogate_value)

from oracles import full_grid_argmin


def spec1(eps, a=-1.0, b=1.0):
    return SurrogateSpec([a], [b], [eps])


def test_surrogate_value_examples():
    assert surrogate_value(spec1(0.01), [1.0]) == 0.01
    assert abs(surrogate_value(spec1(0.01), [0.0]) - math.sqrt(1 + 1e-4)) < 1e-15
    assert 1.0 <= surrogate_value(spec1(0.01), [0.0]) <= 1.0 + 0.01


def test_spec_validation():
    with pytest.raises(ParameterError):
        SurrogateSpec([-1.0], [1.0], [0.0])
    with pytest.raises(ParameterError):
        SurrogateSpec([1.0], [1.0], [0.1])
    s = SurrogateSpec.uniform(4, 0.02)
    assert np.allclose(s.eps, 0.005) and abs(s.budget - 0.02) < 1e-15


def test_sandwich_on_random_points():
    rng = np.random.default_rng(0)
    n = 5
    a = rng.uniform(-2, 0, n)
    b = a + rng.uniform(0.1, 3, n)
    s = SurrogateSpec(a, b, rng.uniform(1e-4, 0.1, n))
    X = rng.uniform(-5, 5, size=(100_000 // n, n))
    for x in X:
        F, Fh = penalty_value(s, x), surrogate_value(s, x)
        assert F <= Fh <= F + s.budget


def test_eps_prox_close_to_closed_form():
    s = SurrogateSpec.uniform(1, 1e-4)
    x, cert = eps_prox(s, [2.0], 0.25)
    assert abs(x[0] - 4.0 / 3.0) < 1e-2
    assert cert.satisfied
    assert np.array_equal(exact_two_root_prox(s, [2.0], 0.25), binary_penalty_prox(BinaryPenalty(), [2.0], 0.25))


def test_eps_prox_at_root():
    for eps in (1e-2, 1e-4, 1e-6):
        s = spec1(eps)
        x, cert = eps_prox(s, [-1.0], 0.3)
        assert abs(x[0] + 1.0) <= 2 * eps
        assert cert.gap <= eps


def test_eps_prox_is_separable():
    rng = np.random.default_rng(1)
    a = np.array([-1.0, 0.0, 2.0])
    b = np.array([1.0, 3.0, 2.5])
    eps = np.array([1e-3, 2e-2, 5e-4])
    y = rng.uniform(-3, 4, 3)
    x, _ = eps_prox(SurrogateSpec(a, b, eps), y, 0.35)
    parts = [eps_prox(SurrogateSpec([a[i]], [b[i]], [eps[i]]), [y[i]], 0.35)[0][0] for i in range(3)]
    assert np.array_equal(x, parts)


def test_eps_prox_rejects_step():
    with pytest.raises(ParameterError):
        eps_prox(spec1(0.1), [0.0], 0.5)


def test_eps_prox_surrogate_stationarity():
    rng = np.random.default_rng(2)
    s = SurrogateSpec.uniform(50, 0.05, -1.0, 2.0)
    y = rng.uniform(-4, 5, 50)
    alpha = 0.4
    x, _ = eps_prox(s, y, alpha)
    q = (x - s.a) * (x - s.b)
    d = q * (2 * x - s.a - s.b) / np.sqrt(q * q + s.eps ** 2) + (x - y) / alpha
    assert np.all(np.abs(d) < 1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(-4, 4), st.floats(0.01, 0.49), st.floats(-1.5, 0.5), st.floats(0.1, 3.0))
def test_exact_two_root_prox_against_grid(y, alpha, a, width):
    b = a + width
    s = SurrogateSpec([a], [b], [1e-3])
    x = exact_two_root_prox(s, [y], alpha)[0]
    obj = lambda z: np.abs((z - a) * (z - b)) + (z - y) ** 2 / (2 * alpha)
    _, vg = full_grid_argmin(obj, -6, 6, 1e-4)
    assert obj(x) <= vg + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_level_set_certificate_general_roots(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    a = rng.uniform(-2, 1, n)
    b = a + rng.uniform(0.05, 3, n)
    s = SurrogateSpec(a, b, 10 ** rng.uniform(-8, -1, n))
    y = rng.uniform(-5, 5, n)
    x, cert = eps_prox(s, y, float(rng.uniform(0.01, 0.49)))
    assert cert.satisfied
    assert cert.reference_value <= cert.candidate_value + 1e-12


def test_eps_subgradient_inclusion():
    # the surrogate minimiser admits the witness e = 0: (y - x_eps)/alpha
    # satisfies the proximal eps-subgradient inequality with C = rho/2 = 1
    rng = np.random.default_rng(3)
    C = 1.0
    for _ in range(30):
        n = 3
        alpha = rng.uniform(0.05, 0.45)
        eps = 10 ** rng.uniform(-4, -1)
        s = SurrogateSpec.uniform(n, eps)
        y = rng.uniform(-3, 3, n)
        x, _ = eps_prox(s, y, alpha)
        e = np.zeros(n)
        assert e @ e / (2 * alpha) <= eps
        v = (y - x - e) / alpha
        probes = x + 3 * rng.standard_normal((1000, n))
        fx = penalty_value(s, x)
        for p in probes:
            lhs = penalty_value(s, p) - fx
            rhs = v @ (p - x) - C * np.sum((p - x) ** 2) - eps
            assert lhs >= rhs - 1e-12


def test_subgradient_witness_is_not_arbitrary():
    # f = 0 is 0-weakly convex and its only eps-subgradient is v = 0, yet
    # x = y is an exact prox point; an admissible e != 0 gives v != 0
    alpha, eps = 0.25, 0.02
    x = y = np.zeros(1)
    e = np.array([math.sqrt(2 * alpha * eps)])
    v = (y - x - e) / alpha
    p = x + 10.0 * v / np.linalg.norm(v)
    # inequality 0 >= <v, p - x> - 0 * |p - x|^2 - eps fails at p
    assert v @ (p - x) - eps > 0.0


def test_certify_eps_solution_examples():
    h = lambda z: float(np.sum((np.asarray(z) - 1.0) ** 2))
    assert certify_eps_solution(h, [1.0], [1.0], 0.0).satisfied
    assert not certify_eps_solution(h, [1.1], [1.0], 0.009).satisfied
    assert certify_eps_solution(h, [1.1], [1.0], 0.011).satisfied
    with pytest.raises(ParameterError):
        certify_eps_solution(h, [1.0], [1.0], -1.0)
