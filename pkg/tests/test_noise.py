import numpy as np

from landau.noise import NoiseStream


def test_determinism():
    a = NoiseStream(123456789)
    b = NoiseStream(123456789)
    for step, i, k in [(0, 0, 0), (3, 1, 7), (1000, 42, 42)]:
        np.testing.assert_array_equal(a.normals(step, i, k, 5), b.normals(step, i, k, 5))


def test_distinct_keys_give_distinct_values():
    s = NoiseStream(1)
    base = s.normals(0, 0, 0, 3)
    assert not np.array_equal(base, s.normals(0, 0, 1, 3))
    assert not np.array_equal(base, s.normals(0, 1, 0, 3))
    assert not np.array_equal(base, s.normals(1, 0, 0, 3))
    assert not np.array_equal(base, NoiseStream(2).normals(0, 0, 0, 3))


def test_marginal_moments():
    s = NoiseStream(777)
    n = 40_000
    z = np.array([s.normals(0, i % 200, i // 200, 4) for i in range(n)])
    flat = z.ravel()
    se = 1.0 / np.sqrt(flat.size)
    assert abs(flat.mean()) < 3 * se
    assert abs(flat.var() - 1.0) < 3 * np.sqrt(2.0) * se
    # skewness and excess kurtosis of a standard normal
    assert abs((flat**3).mean()) < 3 * np.sqrt(15.0) * se
    assert abs((flat**4).mean() - 3.0) < 3 * np.sqrt(96.0) * se


def test_cross_key_correlations_vanish():
    s = NoiseStream(2024)
    m = 20_000
    z_ik = np.array([s.normals(0, i, i + 1, 2) for i in range(m)])
    z_ki = np.array([s.normals(0, i + 1, i, 2) for i in range(m)])
    z_next = np.array([s.normals(1, i, i + 1, 2) for i in range(m)])
    se = 1.0 / np.sqrt(m)
    assert abs(np.mean(z_ik[:, 0] * z_ik[:, 1])) < 4 * se
    assert abs(np.mean(z_ik[:, 0] * z_ki[:, 0])) < 4 * se
    assert abs(np.mean(z_ik[:, 0] * z_next[:, 0])) < 4 * se


def test_increments_scale_with_dt():
    s = NoiseStream(5)
    z = s.normals(2, 3, 4, 3)
    inc = s.increments(2, 3, 4, 3, dt=0.25)
    np.testing.assert_allclose(inc, 0.5 * z)


def test_relabel_remaps_pair_keys():
    plain = NoiseStream(99)
    perm = np.array([2, 0, 1])
    relabeled = NoiseStream(99, relabel=perm)
    np.testing.assert_array_equal(
        relabeled.normals(0, 0, 1, 3), plain.normals(0, 2, 0, 3))
