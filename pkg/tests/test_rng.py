import numpy as np

from portfolio_recovery.rng import Stream, hash_words, u01


def test_uniform_in_open_interval():
    s = Stream.from_seed(1)
    u = s.uniforms(np.arange(100_000))
    assert u.min() > 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.005


def test_vectorised_matches_scalar():
    s = Stream.from_seed(3).child("x", 4)
    vec = s.uniforms(np.arange(50), 7)
    assert np.array_equal(vec, [s.uniform(7, i) for i in range(50)])
    assert np.array_equal(s.normals(np.arange(20)), [s.normal(i) for i in range(20)])


def test_children_are_distinct_and_stable():
    root = Stream.from_seed(2019)
    assert root.child("hazard").key != root.child("damage").key
    assert root.child("hazard", 0).key != root.child("hazard", 1).key
    assert root.child("hazard").key == Stream.from_seed(2019).child("hazard").key


def test_hash_is_order_sensitive():
    assert hash_words(5, 1, 2) != hash_words(5, 2, 1)
    assert 0.0 < u01(hash_words(0)) < 1.0


def test_normals_moments():
    z = Stream.from_seed(9).normals(np.arange(200_000))
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01
