import numpy as np
import pytest

from dmat import DMat, det_H_partial, dmat_add, dmat_matmul, dmat_scale, op_H


def random_dmat(rng, m, n, d=2):
    return DMat(rng.normal(size=(m, n, d)))


def test_scale_add_matmul_examples(rng):
    a = random_dmat(rng, 3, 4)
    assert np.array_equal(dmat_scale(a, 0.0).entries, np.zeros((3, 4, 2)))
    assert np.allclose(dmat_matmul(a, np.eye(4)).entries, a.entries)
    single = DMat(np.array([[[1.0, 2.0]]]))
    assert np.array_equal(dmat_matmul(single, [[3.0]]).entries, [[[3.0, 6.0]]])
    assert np.array_equal(dmat_add(single, single).entries, [[[2.0, 4.0]]])


def test_shape_mismatches_raise(rng):
    with pytest.raises(ValueError):
        dmat_add(random_dmat(rng, 2, 2), random_dmat(rng, 2, 3))
    with pytest.raises(ValueError):
        dmat_matmul(random_dmat(rng, 2, 3), np.eye(2))
    with pytest.raises(ValueError):
        op_H(random_dmat(rng, 3, 3), DMat.column(rng.normal(size=(2, 2))))
    with pytest.raises(ValueError):
        DMat(np.zeros((2, 2)))


def test_op_h_examples(rng):
    a = DMat(np.array([[[1.0, 0.0]]]))
    assert np.array_equal(op_H(a, DMat.column([[0.0, 1.0]])), [[0.0]])

    b = random_dmat(rng, 3, 4)
    for eta in range(2):
        v = np.zeros((3, 2))
        v[:, eta] = 1.0
        assert np.array_equal(op_H(b, DMat.column(v)), b.entries[:, :, eta])


def test_op_h_is_additive_and_commutes_with_matmul(rng):
    for _ in range(100):
        m, n, p = rng.integers(1, 6, size=3)
        a, b = random_dmat(rng, m, n), random_dmat(rng, m, n)
        v = DMat.column(rng.normal(size=(m, 2)))
        q = rng.normal(size=(n, p))
        assert np.allclose(op_H(dmat_add(a, b), v), op_H(a, v) + op_H(b, v), atol=1e-12)
        assert np.allclose(op_H(dmat_matmul(a, q), v), op_H(a, v) @ q, atol=1e-12)


def test_det_h_partial_single_entry():
    a = DMat(np.array([[[0.7, -1.3]]]))
    v = DMat.column([[0.6, 0.8]])
    assert det_H_partial(a, v, 0, 0) == pytest.approx(0.7)
    assert det_H_partial(a, v, 0, 1) == pytest.approx(-1.3)


def test_det_h_partial_matches_finite_differences(rng):
    h = 1e-6
    for _ in range(100):
        a = random_dmat(rng, 3, 3)
        vectors = rng.normal(size=(3, 2))
        i, eta = rng.integers(0, 3), rng.integers(0, 2)
        plus, minus = vectors.copy(), vectors.copy()
        plus[i, eta] += h
        minus[i, eta] -= h
        numeric = (np.linalg.det(op_H(a, DMat.column(plus)))
                   - np.linalg.det(op_H(a, DMat.column(minus)))) / (2 * h)
        analytic = det_H_partial(a, DMat.column(vectors), i, eta)
        assert analytic == pytest.approx(numeric, rel=1e-6, abs=1e-8)


def test_det_h_partial_rejects_bad_indices(rng):
    a = random_dmat(rng, 2, 2)
    v = DMat.column(rng.normal(size=(2, 2)))
    with pytest.raises(IndexError):
        det_H_partial(a, v, 2, 0)
    with pytest.raises(IndexError):
        det_H_partial(a, v, 0, 2)
    with pytest.raises(ValueError):
        det_H_partial(random_dmat(rng, 2, 3), v, 0, 0)


def test_submatrix_keeps_entries(rng):
    a = random_dmat(rng, 4, 4)
    sub = a.submatrix([0, 2], [1, 3])
    assert sub.shape == (2, 2)
    assert np.array_equal(sub[1, 0], a[2, 1])
