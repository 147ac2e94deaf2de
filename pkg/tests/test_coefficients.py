import numpy as np
import pytest

from landau.coefficients import (
    ConfigurationError,
    make_model,
    maxwell_a,
    maxwell_b,
    maxwell_sigma,
)


def finite_difference_divergence(v, h=1e-5):
    """Oracle for maxwell_b: central differences of the row divergence of a."""
    v = np.asarray(v, dtype=np.float64)
    d = v.shape[0]
    b = np.zeros(d)
    for i in range(d):
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            b[i] += (maxwell_a(v + e)[i, j] - maxwell_a(v - e)[i, j]) / (2 * h)
    return b


def test_maxwell_a_examples():
    np.testing.assert_allclose(maxwell_a([1.0, 0.0, 0.0]), np.diag([0.0, 1.0, 1.0]))
    np.testing.assert_array_equal(maxwell_a(np.zeros(3)), np.zeros((3, 3)))
    np.testing.assert_allclose(maxwell_a([1.0, 1.0]), [[1.0, -1.0], [-1.0, 1.0]])


def test_maxwell_b_closed_form_matches_divergence_oracle():
    np.testing.assert_allclose(maxwell_b([1.0, 2.0, 3.0]), [-2.0, -4.0, -6.0])
    np.testing.assert_array_equal(maxwell_b(np.zeros(3)), np.zeros(3))
    np.testing.assert_array_equal(maxwell_b([7.3]), [0.0])
    rng = np.random.default_rng(7)
    for d in (1, 2, 3, 5):
        for _ in range(20):
            v = rng.normal(size=d) * rng.uniform(0.1, 3.0)
            oracle = finite_difference_divergence(v)
            got = maxwell_b(v)
            np.testing.assert_allclose(got, oracle, rtol=1e-6, atol=1e-6)


def test_maxwell_sigma_examples():
    np.testing.assert_allclose(
        maxwell_sigma(np.array([2.0, 0.0, 0.0])), np.diag([0.0, 2.0, 2.0]), atol=1e-15)
    np.testing.assert_allclose(
        maxwell_sigma(np.array([1.0, 0.0, 0.0]), "cross3"),
        [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
    assert np.array_equal(maxwell_sigma(np.zeros(4)), np.zeros((4, 4)))


@pytest.mark.parametrize("d", [2, 3, 5])
def test_sigma_squares_to_a(d):
    rng = np.random.default_rng(d)
    variants = ["projection"] + (["cross3"] if d == 3 else [])
    for _ in range(200):
        v = rng.normal(size=d) * rng.uniform(0.0, 4.0)
        a = maxwell_a(v)
        for variant in variants:
            s = maxwell_sigma(v, variant)
            assert np.max(np.abs(s @ s.T - a)) <= 1e-12 * max(1.0, np.dot(v, v))


@pytest.mark.parametrize("d", [2, 3, 5])
def test_a_trace_and_kernel(d):
    rng = np.random.default_rng(10 + d)
    for _ in range(200):
        v = rng.normal(size=d)
        a = maxwell_a(v)
        assert abs(np.trace(a) - (d - 1) * np.dot(v, v)) <= 1e-12 * max(1, np.dot(v, v))
        assert np.max(np.abs(a @ v)) <= 1e-12 * max(1.0, np.linalg.norm(v) ** 3)


def test_b_is_odd():
    rng = np.random.default_rng(3)
    for _ in range(50):
        v = rng.normal(size=3)
        np.testing.assert_array_equal(maxwell_b(-v), -maxwell_b(v))


@pytest.mark.parametrize("d", [2, 3, 5])
def test_projection_sigma_lipschitz_probe(d):
    rng = np.random.default_rng(20 + d)
    worst = 0.0
    for _ in range(10_000):
        u = rng.normal(size=d)
        v = rng.normal(size=d)
        u /= max(1.0, np.linalg.norm(u))
        v /= max(1.0, np.linalg.norm(v))
        gap = np.linalg.norm(u - v)
        if gap < 1e-12:
            continue
        ratio = np.linalg.norm(maxwell_sigma(u) - maxwell_sigma(v), 2) / gap
        worst = max(worst, ratio)
    assert worst <= 3.0


def test_make_model_maxwell():
    m = make_model("maxwell", 3)
    np.testing.assert_allclose(
        m.sigma(np.array([2.0, 0.0, 0.0])), np.diag([0.0, 2.0, 2.0]), atol=1e-15)
    assert m.kernel_id == "maxwell_projection"


def test_make_model_isotropic_ou():
    m = make_model("isotropic_ou", 2)
    np.testing.assert_array_equal(m.sigma(np.array([5.0, 1.0])), np.eye(2))
    np.testing.assert_array_equal(m.drift(np.array([5.0, 1.0])), [-5.0, -1.0])


def test_make_model_maxwell_d1_flagged_degenerate():
    m = make_model("maxwell", 1)
    assert any("degenerate" in f for f in m.flags)
    # a(v) = 0 identically in d=1
    assert maxwell_a([2.5]) == np.zeros((1, 1))


def test_make_model_errors():
    with pytest.raises(ConfigurationError):
        make_model("maxwell", 2, {"sigma_variant": "cross3"})
    with pytest.raises(ConfigurationError):
        make_model("nope", 3)
    with pytest.raises(ConfigurationError):
        make_model("maxwell", 0)
