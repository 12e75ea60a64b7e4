import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import family_matrices
from qtmeans import FiniteQT, NotPositiveDefinite, QTMatrix
from qtmeans.estimator import GeometricMean, check_matrix_list

DIAGONALS = [np.diag([1.0, 4.0]), np.diag([8.0, 2.0]), np.diag([27.0, 8.0])]


class TestValidation:
    def test_three_dimensional_array(self):
        mats, dense = check_matrix_list(np.stack(DIAGONALS))
        assert dense and len(mats) == 3

    def test_single_structured_matrix(self):
        mats, dense = check_matrix_list(QTMatrix.identity())
        assert not dense and len(mats) == 1

    def test_minimum_count(self):
        with pytest.raises(ValueError):
            check_matrix_list([np.eye(2)], min_count=2)

    def test_non_square(self):
        with pytest.raises(ValueError):
            check_matrix_list([np.ones((2, 3))])

    def test_non_finite(self):
        with pytest.raises(ValueError):
            check_matrix_list([np.diag([1.0, np.nan])])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            check_matrix_list([np.eye(2), np.eye(3)])

    def test_mixed(self):
        with pytest.raises(TypeError):
            check_matrix_list([QTMatrix.identity(), np.eye(2)])
        with pytest.raises(TypeError):
            check_matrix_list([QTMatrix.identity(), FiniteQT.identity(3)])

    def test_finite_sizes(self):
        with pytest.raises(ValueError):
            check_matrix_list([FiniteQT.identity(3), FiniteQT.identity(4)])


class TestEstimator:
    def test_params_and_clone(self):
        est = GeometricMean(kind="weighted", weights=[0.5, 0.5], tol=1e-10)
        params = est.get_params()
        assert params == {"kind": "weighted", "weights": [0.5, 0.5], "tol": 1e-10,
                          "max_iter": est.max_iter, "truncation": None}
        twin = clone(est)
        assert twin.get_params() == params and twin is not est
        assert est.set_params(kind="alm").kind == "alm"

    @pytest.mark.parametrize("kind", ["alm", "nbmp", "karcher"])
    def test_dense_fit(self, kind):
        est = GeometricMean(kind=kind).fit(DIAGONALS)
        np.testing.assert_allclose(est.mean_, np.diag([6.0, 4.0]), rtol=1e-12)
        assert est.dense_ and math.isnan(est.symbol_check_)

    def test_transform(self):
        D = GeometricMean().fit(DIAGONALS).transform(DIAGONALS)
        assert D.shape == (3, 1)
        expected = [max(abs(math.log(1 / 6)), abs(math.log(4 / 4))),
                    max(abs(math.log(8 / 6)), abs(math.log(2 / 4))),
                    max(abs(math.log(27 / 6)), abs(math.log(8 / 4)))]
        np.testing.assert_allclose(D[:, 0], expected, rtol=1e-12)

    def test_fit_transform(self):
        D = GeometricMean().fit_transform(DIAGONALS)
        assert D.shape == (3, 1) and np.all(D >= 0)

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            GeometricMean().transform(DIAGONALS)

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            GeometricMean(kind="median").fit(DIAGONALS)

    def test_indefinite(self):
        with pytest.raises(NotPositiveDefinite):
            GeometricMean().fit([np.diag([1.0, -1.0]), np.eye(2)])

    def test_representation_mismatch(self):
        est = GeometricMean().fit(DIAGONALS)
        with pytest.raises(TypeError):
            est.transform([QTMatrix.identity()])

    def test_qt_fit(self):
        mats = family_matrices(1.0)[:2]
        est = GeometricMean(truncation=200).fit(mats)
        assert isinstance(est.mean_, QTMatrix) and est.symbol_check_ <= 1e-8
        D = est.transform(mats)
        # for two matrices the mean is their midpoint in the Thompson metric;
        # the distances are estimated on a 200 x 200 truncation
        assert D[0, 0] == pytest.approx(D[1, 0], rel=1e-4)

    def test_finite_fit(self):
        mats = [FiniteQT.from_qt(A, 20) for A in family_matrices(1.0)]
        est = GeometricMean().fit(mats)
        assert isinstance(est.mean_, FiniteQT) and est.transform(mats).shape == (3, 1)
