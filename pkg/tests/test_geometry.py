import numpy as np
import pytest

from msdnet import (
    DomainError,
    EntropyMap,
    EuclideanMap,
    FreeSpace,
    Linear,
    Quadratic,
    Simplex,
    bregman_prox,
    simplex_projection,
)

from conftest import entropy_mirror_oracle_2d, projection_oracle, simplex_oracle_min

ALL_MAPS = [EuclideanMap(FreeSpace(4)), EuclideanMap(Simplex(4)), EntropyMap(4)]


def sample(rng, domain):
    if isinstance(domain, Simplex):
        y = rng.dirichlet(np.ones(domain.dim))
        return 0.95 * y + 0.05 / domain.dim
    return rng.standard_normal(domain.dim)


# ---------------------------------------------------------------- divergences

def test_bregman_zero_at_equal_points(rng):
    for mirror in ALL_MAPS:
        x = sample(rng, mirror.domain)
        assert mirror.bregman(x, x) == pytest.approx(0.0, abs=1e-14)


def test_bregman_euclidean_half_squared_distance():
    mirror = EuclideanMap(FreeSpace(2))
    assert mirror.bregman(np.array([1.0, 0.0]), np.zeros(2)) == 0.5


def test_bregman_entropy_matches_potential_form(rng):
    # KL evaluation against the generic potential-based formula
    mirror = EntropyMap(3)
    for _ in range(300):
        xp = sample(rng, mirror.domain)
        x = sample(rng, mirror.domain)
        direct = mirror.bregman(xp, x)
        generic = (
            mirror.potential(xp)
            - mirror.potential(x)
            - float(np.dot(mirror.grad(x), xp - x))
        )
        assert direct == pytest.approx(generic, abs=1e-12)


def test_bregman_entropy_known_value():
    mirror = EntropyMap(2)
    got = mirror.bregman(np.array([1 / 3, 2 / 3]), np.array([0.5, 0.5]))
    expected = (1 / 3) * np.log((1 / 3) / 0.5) + (2 / 3) * np.log((2 / 3) / 0.5)
    assert got == pytest.approx(expected, abs=1e-15)


def test_bregman_entropy_boundary_first_argument_ok():
    mirror = EntropyMap(3)
    vertex = np.array([1.0, 0.0, 0.0])
    x = np.array([0.2, 0.3, 0.5])
    assert mirror.bregman(vertex, x) == pytest.approx(-np.log(0.2), abs=1e-14)


def test_bregman_entropy_boundary_second_argument_rejected():
    mirror = EntropyMap(3)
    with pytest.raises(DomainError):
        mirror.bregman(np.array([0.2, 0.3, 0.5]), np.array([1.0, 0.0, 0.0]))


def test_strong_convexity_many_pairs(rng):
    for mirror in ALL_MAPS:
        for _ in range(10_000):
            xp = sample(rng, mirror.domain)
            x = sample(rng, mirror.domain)
            d = xp - x
            assert mirror.bregman(xp, x) >= 0.5 * float(np.dot(d, d)) - 1e-12


def test_three_point_identity(rng):
    for mirror in ALL_MAPS:
        for _ in range(2000):
            xp = sample(rng, mirror.domain)
            x = sample(rng, mirror.domain)
            xq = sample(rng, mirror.domain)
            lhs = (
                mirror.bregman(xp, x)
                - mirror.bregman(xp, xq)
                - mirror.bregman(xq, x)
            )
            rhs = float(np.dot(mirror.grad(xq) - mirror.grad(x), xp - xq))
            assert lhs == pytest.approx(rhs, abs=1e-10)


# ---------------------------------------------------------------- mirror step

def test_mirror_step_zero_coefficient_is_identity(rng):
    for mirror in ALL_MAPS:
        x = sample(rng, mirror.domain)
        assert np.allclose(mirror.mirror_step(x, np.zeros_like(x)), x, atol=1e-14)


def test_mirror_step_entropy_closed_form():
    mirror = EntropyMap(2)
    got = mirror.mirror_step(np.array([0.5, 0.5]), np.array([np.log(2.0), 0.0]))
    assert np.allclose(got, [1 / 3, 2 / 3], atol=1e-14)


def test_mirror_step_entropy_against_stationarity_oracle(rng):
    mirror = EntropyMap(2)
    for _ in range(50):
        x = sample(rng, mirror.domain)
        c = rng.uniform(-2.0, 2.0, size=2)
        got = mirror.mirror_step(x, c)
        assert np.allclose(got, entropy_mirror_oracle_2d(x, c), atol=1e-8)


def test_mirror_step_euclidean_free():
    mirror = EuclideanMap(FreeSpace(2))
    got = mirror.mirror_step(np.array([1.0, 1.0]), np.array([0.5, -0.5]))
    assert np.array_equal(got, [0.5, 1.5])


def test_mirror_step_euclidean_simplex_is_projection(rng):
    mirror = EuclideanMap(Simplex(4))
    x = sample(rng, mirror.domain)
    c = rng.standard_normal(4)
    assert np.allclose(mirror.mirror_step(x, c), simplex_projection(x - c), atol=1e-15)


def test_mirror_step_first_order_optimality(rng):
    for mirror in [EuclideanMap(Simplex(4)), EntropyMap(4)]:
        eye = np.eye(4)
        for _ in range(500):
            x = sample(rng, mirror.domain)
            c = rng.standard_normal(4)
            x_plus = mirror.mirror_step(x, c)
            if np.min(x_plus) <= 0:
                continue
            shift = c + mirror.grad(x_plus) - mirror.grad(x)
            for v in range(4):
                assert float(np.dot(shift, eye[v] - x_plus)) >= -1e-9


def test_mirror_step_stacked_matches_rowwise(rng):
    mirror = EntropyMap(3)
    x = np.stack([sample(rng, mirror.domain) for _ in range(5)])
    c = rng.standard_normal((5, 3))
    stacked = mirror.mirror_step(x, c)
    rows = np.stack([mirror.mirror_step(x[i], c[i]) for i in range(5)])
    assert np.allclose(stacked, rows, atol=1e-15)


def test_mirror_step_underflow_flagged():
    mirror = EntropyMap(2)
    with pytest.warns(RuntimeWarning, match="1e-300"):
        mirror.mirror_step(np.array([0.5, 0.5]), np.array([0.0, 800.0]))


# ---------------------------------------------------------------- projection

def test_projection_fixes_feasible_points(rng):
    v = rng.dirichlet(np.ones(5))
    assert np.allclose(simplex_projection(v), v, atol=1e-12)


def test_projection_nearest_vertex():
    assert np.allclose(simplex_projection(np.array([2.0, 0.0])), [1.0, 0.0])


def test_projection_feasibility(rng):
    for _ in range(500):
        v = rng.uniform(-2, 2, size=6)
        y = simplex_projection(v)
        assert np.min(y) >= 0.0
        assert abs(np.sum(y) - 1.0) <= 1e-12


def test_projection_against_active_set_oracle(rng):
    for _ in range(200):
        v = rng.uniform(-2.0, 2.0, size=5)
        assert np.allclose(simplex_projection(v), projection_oracle(v), atol=1e-8)


# ---------------------------------------------------------------- prox solver

def test_prox_linear_cost_folds_into_mirror_step(rng):
    mirror = EntropyMap(3)
    x = sample(rng, mirror.domain)
    cost = Linear(rng.random(3))
    c = rng.standard_normal(3)
    alpha = 0.4
    got = bregman_prox(mirror, x, c, cost, alpha)
    assert np.allclose(got, mirror.mirror_step(x, c + alpha * cost.a), atol=1e-15)


def test_prox_quadratic_euclidean_free_closed_form(rng):
    mirror = EuclideanMap(FreeSpace(3))
    x = rng.standard_normal(3)
    b = rng.standard_normal(3)
    alpha = 0.7
    got = bregman_prox(mirror, x, np.zeros(3), Quadratic(1.0, b), alpha)
    assert np.allclose(got, (x + alpha * b) / (1 + alpha), atol=1e-14)


def test_prox_entropy_quadratic_vs_bruteforce_oracle(rng):
    mirror = EntropyMap(3)
    for _ in range(10):
        x = sample(rng, mirror.domain)
        cost = Quadratic(float(rng.uniform(0.5, 2.0)), rng.dirichlet(np.ones(3)))
        c = 0.3 * rng.standard_normal(3)
        alpha = float(rng.uniform(0.1, 0.9))
        got = bregman_prox(mirror, x, c, cost, alpha)

        def objective(y):
            return alpha * cost.value(y) + float(np.dot(c, y)) + mirror.bregman(y, x)

        ref = simplex_oracle_min(objective, 3)
        assert np.allclose(got, ref, atol=1e-6)


def test_prox_descent_inequality(rng):
    for mirror in ALL_MAPS:
        for _ in range(300):
            x = sample(rng, mirror.domain)
            cost = Quadratic(
                float(rng.uniform(0.5, 2.0)), sample(rng, mirror.domain)
            )
            c = 0.3 * rng.standard_normal(mirror.domain.dim)
            alpha = float(rng.uniform(0.05, 1.0))
            x_plus = bregman_prox(mirror, x, c, cost, alpha)
            x_ref = sample(rng, mirror.domain)

            def phi(y):
                return alpha * cost.value(y) + float(np.dot(c, y))

            lhs = mirror.bregman(x_ref, x_plus) - mirror.bregman(x_ref, x)
            rhs = -0.5 * float(np.sum((x_plus - x) ** 2)) + phi(x_ref) - phi(x_plus)
            assert lhs <= rhs + 1e-9


def test_prox_rejects_nonpositive_alpha(rng):
    mirror = EntropyMap(3)
    with pytest.raises(ValueError):
        bregman_prox(mirror, sample(rng, mirror.domain), np.zeros(3), Linear(np.ones(3)), 0.0)


# ---------------------------------------------------------------- domains

def test_domain_membership():
    simplex = Simplex(3)
    assert simplex.contains(np.array([0.2, 0.3, 0.5]))
    assert not simplex.contains(np.array([0.5, 0.6, 0.1]))
    assert not simplex.contains(np.array([-0.1, 0.6, 0.5]))
    free = FreeSpace(2)
    assert free.contains(np.array([1e6, -3.0]))
    assert not free.contains(np.array([np.inf, 0.0]))


def test_entropy_pairs_with_simplex_only():
    assert isinstance(EntropyMap(4).domain, Simplex)


def test_euclidean_grad_inv_simplex_rejected():
    with pytest.raises(DomainError):
        EuclideanMap(Simplex(3)).grad_inv(np.zeros(3))
