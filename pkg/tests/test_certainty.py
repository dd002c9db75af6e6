import numpy as np
import pytest

from clustcert import dissimilarity as D
from clustcert.certainty import (
    CertaintyMatrix,
    avg_dissim,
    certainty,
    certainty_dissimilarity,
    certainty_silhouette,
    probabilities_from_dissimilarities,
    probabilities_from_silhouettes,
    silhouette_matrix,
)
from clustcert.errors import DegenerateClusterError, UndefinedSilhouetteError, ValidationError
from clustcert.partition import Partition, silhouette_width

from oracles import (
    avg_dissim_loop,
    certainty_dis_oracle,
    certainty_sil_oracle,
    reassigned_silhouettes,
)


def matrix(n, seed, dim=2):
    return D.euclidean(np.random.default_rng(seed).normal(size=(n, dim)))


# --- from silhouettes -----------------------------------------------------------


@pytest.mark.parametrize("l", [0.3, 1.0, 5.0])
def test_equal_silhouettes_give_equal_mass(l):
    np.testing.assert_allclose(probabilities_from_silhouettes([0.5, 0.5], l), [0.5, 0.5])


@pytest.mark.parametrize("l", [0.3, 1.0, 5.0])
def test_extreme_silhouettes(l):
    np.testing.assert_allclose(probabilities_from_silhouettes([1.0, -1.0], l), [1.0, 0.0])


def test_silhouette_arithmetic_example():
    # (1.2^2, 0.6^2) = (1.44, 0.36), total 1.80
    np.testing.assert_allclose(probabilities_from_silhouettes([0.2, -0.4], 2.0), [0.8, 0.2], atol=1e-15)


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
def test_silhouette_exponent_must_be_positive(bad):
    with pytest.raises(ValidationError):
        probabilities_from_silhouettes([0.1, 0.2], bad)


def test_mirror_configuration_midpoint_is_even():
    x = np.array([[-3.0, 0.0], [-2.0, 0.0], [2.0, 0.0], [3.0, 0.0], [0.0, 0.0]])
    m = D.euclidean(x)
    z = Partition(np.array([1, 1, 2, 2, 1]))
    for fn in (certainty_silhouette, certainty_dissimilarity):
        row = fn(m, z, 1.0).p[4]
        assert row[0] == pytest.approx(row[1], abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_reassignment_oracle_six_points(seed):
    m = matrix(6, seed)
    labels = [0, 0, 0, 1, 1, 1]
    sil = silhouette_matrix(m, np.array(labels) + 1)
    for i in range(6):
        np.testing.assert_allclose(sil[i], reassigned_silhouettes(m.d, labels, i, 2), atol=1e-12)


def test_own_column_is_classic_silhouette():
    m = matrix(10, 5)
    z = np.array([1, 2, 3, 1, 2, 3, 1, 2, 3, 1])
    sil = silhouette_matrix(m, z)
    for i in range(10):
        assert sil[i, z[i] - 1] == pytest.approx(silhouette_width(m, z, i), abs=1e-12)


def test_certainty_silhouette_needs_two_clusters():
    with pytest.raises(UndefinedSilhouetteError):
        certainty_silhouette(matrix(4, 0), np.ones(4, dtype=int))


# --- from dissimilarities -------------------------------------------------------


def test_avg_dissim_unit_distance():
    d = np.array([[0, 1, 1], [1, 0, 2], [1, 2, 0]], dtype=float)
    assert avg_dissim(d, [1, 2, 2], 0, 2) == 1.0


def test_avg_dissim_alone_raises():
    with pytest.raises(DegenerateClusterError):
        avg_dissim(matrix(3, 0), [1, 1, 2], 2, 2)


def test_avg_dissim_five_points_loop():
    m = matrix(5, 2)
    labels = [0, 0, 1, 1, 1]
    for i in range(5):
        for k in range(2):
            if labels.count(k) - (labels[i] == k) == 0:
                continue
            assert avg_dissim(m, np.array(labels) + 1, i, k + 1) == pytest.approx(
                avg_dissim_loop(m.d, labels, i, k), abs=1e-12
            )


@pytest.mark.parametrize("v", [0.5, 1.0, 3.0])
def test_equal_h_give_equal_mass(v):
    np.testing.assert_allclose(probabilities_from_dissimilarities([2.0, 2.0], v), [0.5, 0.5])


def test_dissimilarity_arithmetic_example():
    np.testing.assert_allclose(probabilities_from_dissimilarities([1.0, 3.0], 1.0), [0.75, 0.25], atol=1e-15)


def test_zero_dissimilarity_takes_all_mass():
    np.testing.assert_array_equal(probabilities_from_dissimilarities([0.0, 5.0], 1.0), [1.0, 0.0])
    np.testing.assert_array_equal(probabilities_from_dissimilarities([0.0, 5.0, 0.0], 2.0), [0.5, 0.0, 0.5])


def test_dissimilarity_measure_rejects_degenerate_cluster():
    with pytest.raises(DegenerateClusterError):
        certainty_dissimilarity(matrix(5, 0), np.array([1, 1, 1, 1, 2]))


@pytest.mark.parametrize("bad", [0.0, -2.0])
def test_dissimilarity_exponent_must_be_positive(bad):
    with pytest.raises(ValidationError):
        certainty_dissimilarity(matrix(4, 0), np.array([1, 1, 2, 2]), bad)


# --- both against the formula evaluators ------------------------------------------


def test_eight_point_three_cluster_formulas():
    m = matrix(8, 11, dim=3)
    labels = [0, 0, 0, 1, 1, 1, 2, 2]
    z = np.array(labels) + 1
    for e in (0.5, 1.0, 2.7):
        np.testing.assert_allclose(certainty_silhouette(m, z, e).p,
                                   certainty_sil_oracle(m.d, labels, 3, e), atol=1e-12)
        np.testing.assert_allclose(certainty_dissimilarity(m, z, e).p,
                                   certainty_dis_oracle(m.d, labels, 3, e), atol=1e-12)


def test_larger_exponent_sharpens():
    m = matrix(20, 4)
    z = np.array([1] * 10 + [2] * 10)
    for fn in (certainty_silhouette, certainty_dissimilarity):
        lo, hi = fn(m, z, 0.5).p.max(axis=1), fn(m, z, 4.0).p.max(axis=1)
        assert np.all(hi >= lo - 1e-12)


def test_exponent_does_not_move_argmax():
    m = matrix(20, 6)
    z = np.array([1, 2] * 10)
    for fn in (certainty_silhouette, certainty_dissimilarity):
        tops = {tuple(fn(m, z, e).argmax()) for e in (0.2, 1.0, 9.0)}
        assert len(tops) == 1


def test_dispatch_and_unknown_measure():
    m, z = matrix(6, 0), np.array([1, 1, 1, 2, 2, 2])
    assert certainty(m, z, "dis", 2.0).kind == "dissimilarity_based"
    with pytest.raises(ValidationError):
        certainty(m, z, "posterior")


def test_certainty_matrix_validates_rows():
    with pytest.raises(ValidationError):
        CertaintyMatrix(np.array([[0.5, 0.6]]), "fanny", 2.0)


def test_certainty_csv(tmp_path):
    m, z = matrix(6, 0), np.array([1, 1, 1, 2, 2, 2])
    cm = certainty_silhouette(m, z)
    path = tmp_path / "c.csv"
    cm.to_csv(path, z)
    lines = path.read_text().splitlines()
    assert lines[0] == "individual,cluster_1,cluster_2,assigned,argmax"
    assert len(lines) == 7
