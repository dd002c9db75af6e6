import numpy as np
import pytest

from clustcert import dissimilarity as D
from clustcert.errors import KindMismatchError, UndefinedSilhouetteError, ValidationError
from clustcert.partition import (
    Partition,
    canonical,
    hierarchical,
    kmeans,
    kmeans_fit,
    linkage_tree,
    load_partition,
    pam,
    pam_fit,
    save_partition,
    silhouette_width,
)

from oracles import average_linkage_heights, euclid_loop, kmeans_brute_wss, pam_brute_cost, silhouette_naive, wss


def rand_matrix(n, seed, dim=2):
    return D.euclidean(np.random.default_rng(seed).normal(size=(n, dim)))


# --- PAM ----------------------------------------------------------------------


def test_pam_c_equals_n_zero_cost():
    res = pam_fit(rand_matrix(6, 0), 6)
    assert res.cost == 0.0
    assert sorted(res.partition.z.tolist()) == [1, 2, 3, 4, 5, 6]


def test_pam_one_medoid_minimises_row_sum():
    m = rand_matrix(9, 1)
    res = pam_fit(m, 1)
    assert res.medoids.tolist() == [int(np.argmin(m.d.sum(axis=1)))]


@pytest.mark.parametrize("seed", range(5))
def test_pam_six_points_matches_enumeration(seed):
    m = rand_matrix(6, seed)
    assert pam_fit(m, 2).cost == pytest.approx(pam_brute_cost(m.d, 2), abs=1e-12)


def test_pam_rejects_too_many_clusters():
    with pytest.raises(ValidationError):
        pam(rand_matrix(4, 0), 5)


def test_pam_never_worse_than_build():
    for seed in range(5):
        res = pam_fit(rand_matrix(20, seed), 3)
        assert res.cost <= res.build_cost


# --- hierarchical -------------------------------------------------------------


def test_hierarchical_c_equals_n_singletons():
    z = hierarchical(rand_matrix(5, 0), 5)
    assert sorted(z.z.tolist()) == [1, 2, 3, 4, 5]


@pytest.mark.parametrize("linkage", ["average", "complete", "single", "ward"])
def test_separated_pairs_grouped(linkage):
    x = np.array([[0.0, 0.0], [0.1, 0.0], [10.0, 10.0], [10.0, 10.1]])
    z = hierarchical(D.euclidean(x), 2, linkage)
    assert z.z.tolist() == [1, 1, 2, 2]


@pytest.mark.parametrize("seed", range(3))
def test_average_linkage_heights_match_naive(seed):
    m = rand_matrix(7, seed, dim=3)
    merges, _ = linkage_tree(m, "average")
    heights = [h for _, _, h, _ in merges]
    np.testing.assert_allclose(heights, average_linkage_heights(m.d), atol=1e-12, rtol=0)


def test_ward_agrees_with_scipy_on_raw_dissimilarities():
    from scipy.cluster.hierarchy import fcluster, linkage
    from scipy.spatial.distance import squareform

    m = rand_matrix(15, 4)
    # scipy's ward squares nothing when fed a condensed matrix; it applies the
    # same Lance-Williams update to the values supplied
    ref = fcluster(linkage(squareform(m.d), "ward"), 3, "maxclust")
    ours = hierarchical(m, 3, "ward").z
    assert np.array_equal(canonical(ref), ours)


def test_unknown_linkage():
    with pytest.raises(ValidationError):
        hierarchical(rand_matrix(4, 0), 2, "centroid")


# --- k-means ------------------------------------------------------------------


def test_kmeans_one_cluster_center_is_mean():
    x = np.random.default_rng(0).normal(size=(12, 3))
    res = kmeans_fit(x, 1)
    np.testing.assert_allclose(res.centers[0], x.mean(axis=0), atol=1e-12)


def test_kmeans_recovers_blobs():
    rng = np.random.default_rng(1)
    x = np.vstack([rng.normal(0, 0.1, (10, 2)), rng.normal(5, 0.1, (10, 2))])
    assert kmeans(x, 2).z.tolist() == [1] * 10 + [2] * 10


@pytest.mark.parametrize("seed", range(3))
def test_kmeans_eight_points_is_optimal(seed):
    x = np.random.default_rng(seed).normal(size=(8, 2))
    res = kmeans_fit(x, 2, seed=seed)
    assert res.wss == pytest.approx(wss(x, res.partition.z.tolist()), abs=1e-9)
    assert res.wss <= kmeans_brute_wss(x, 2) + 1e-9


def test_kmeans_rejects_binary():
    data = D.Dataset(np.array([[0, 1], [1, 0], [1, 1]]), kind="binary")
    with pytest.raises(KindMismatchError):
        kmeans(data, 2)


def test_kmeans_deterministic():
    x = np.random.default_rng(2).normal(size=(30, 2))
    assert np.array_equal(kmeans(x, 3, seed=9).z, kmeans(x, 3, seed=9).z)


# --- silhouette ---------------------------------------------------------------


def test_silhouette_equidistant_is_zero():
    # individual 0 sits at distance 1 from its mate and from the other cluster
    d = np.array([[0, 1, 1, 1], [1, 0, 2, 2], [1, 2, 0, 1], [1, 2, 1, 0]], dtype=float)
    assert silhouette_width(d, [1, 1, 2, 2], 0) == 0.0


def test_silhouette_perfect_fit_is_one():
    d = np.array([[0, 0, 3], [0, 0, 3], [3, 3, 0]], dtype=float)
    assert silhouette_width(d, [1, 1, 2], 0) == 1.0


def test_silhouette_five_points_match_definition():
    x = np.array([[0.0], [1.0], [2.5], [6.0], [7.0]])
    d = euclid_loop(x)
    z = [1, 1, 1, 2, 2]
    for i in range(5):
        assert silhouette_width(d, z, i) == pytest.approx(silhouette_naive(d, [v - 1 for v in z], i), abs=1e-12)
    # individual 3 (0-based) by hand: a = 1, b = mean(6, 5, 3.5) = 14.5/3
    b = 14.5 / 3
    assert silhouette_width(d, z, 3) == pytest.approx((b - 1) / b, abs=1e-12)


def test_silhouette_singleton_is_zero():
    d = rand_matrix(4, 0).d
    assert silhouette_width(d, [1, 1, 1, 2], 3) == 0.0


def test_silhouette_one_cluster_raises():
    with pytest.raises(UndefinedSilhouetteError):
        silhouette_width(rand_matrix(3, 0), [1, 1, 1], 0)


def test_silhouette_scale_invariant():
    m = rand_matrix(8, 3)
    z = [1, 1, 2, 2, 3, 3, 1, 2]
    for c in (0.1, 7.0, 1000.0):
        assert silhouette_width(m.scaled(c), z, 4) == pytest.approx(silhouette_width(m, z, 4), abs=1e-12)


# --- Partition and files ------------------------------------------------------


def test_partition_rejects_empty_cluster():
    with pytest.raises(ValidationError):
        Partition(np.array([1, 1, 3]))


def test_canonical_first_appearance():
    assert canonical([3, 3, 1, 2, 1]).tolist() == [1, 1, 2, 3, 2]


def test_partition_file_round_trip(tmp_path):
    z = Partition(np.array([2, 1, 1, 2, 3]))
    path = tmp_path / "z.csv"
    save_partition(z, path)
    assert path.read_text().splitlines()[0] == "1,2"
    assert np.array_equal(load_partition(path).z, z.z)
