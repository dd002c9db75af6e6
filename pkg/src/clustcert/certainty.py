"""Probability-like cluster-membership certainties for a hard partition.

Two measures are computed from a dissimilarity matrix and a partition:

* silhouette-based: individual i is moved to each cluster k in turn (all other
  labels fixed), its silhouette ``sil_ik`` is recomputed, and the shifted
  values ``(sil_ik + 1) ** l`` are normalised across k;
* dissimilarity-based: ``s_ik = 1 / h_ik`` with ``h_ik`` the mean
  dissimilarity from i to the other members of cluster k, and
  ``s_ik ** v`` normalised across k.

Both reduce to the N x C matrix ``h``: with i placed in cluster k, the
within-cluster mean is ``h_ik`` and the nearest other cluster is
``min_{k' != k} h_ik'``, so no partition is ever rebuilt.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateClusterError, UndefinedSilhouetteError, ValidationError
from .dissimilarity import as_array
from .partition import Partition, labels_of

KINDS = ("silhouette_based", "dissimilarity_based", "fanny")
ROW_TOL = 1e-9


@dataclass(frozen=True)
class CertaintyMatrix:
    """Row-stochastic N x C matrix of membership certainties.

    ``exponent`` is l, v or r depending on ``kind``.
    """

    p: np.ndarray
    kind: str
    exponent: float

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 2:
            raise ValidationError("certainty matrix must be 2-D")
        if self.kind not in KINDS:
            raise ValidationError(f"unknown certainty kind {self.kind!r}")
        if np.any(p < 0) or np.any(p > 1):
            raise ValidationError("certainties must lie in [0, 1]")
        if np.any(np.abs(p.sum(axis=1) - 1) > ROW_TOL):
            raise ValidationError("certainty rows must sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.p.shape[0]

    @property
    def c(self) -> int:
        return self.p.shape[1]

    def argmax(self) -> np.ndarray:
        """1-based cluster of highest certainty per individual."""
        return np.argmax(self.p, axis=1) + 1

    def assigned(self, z) -> np.ndarray:
        """Certainty each individual has for its own cluster in ``z``."""
        labels, _ = labels_of(z)
        return self.p[np.arange(self.n), labels]

    def to_csv(self, path, z) -> None:
        labels, _ = labels_of(z)
        header = ["individual"] + [f"cluster_{k}" for k in range(1, self.c + 1)]
        header += ["assigned", "argmax"]
        top = self.argmax()
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for i, row in enumerate(self.p):
                vals = [f"{v:.10f}" for v in row]
                fh.write(f"{i + 1}," + ",".join(vals) + f",{labels[i] + 1},{top[i]}\n")


def _onehot(labels, c):
    out = np.zeros((labels.size, c))
    out[np.arange(labels.size), labels] = 1.0
    return out


def _others_count(labels, c):
    """Entry (i, k): number of individuals j != i with z_j = k."""
    oh = _onehot(labels, c)
    return oh.sum(axis=0)[None, :] - oh


def avg_dissim_matrix(m, z) -> np.ndarray:
    """All ``h_ik`` at once; NaN where cluster k has no member besides i."""
    d = as_array(m)
    labels, c = labels_of(z)
    if d.shape[0] != labels.size:
        raise ValidationError("matrix and partition sizes differ")
    sums = d @ _onehot(labels, c)
    counts = _others_count(labels, c)
    with np.errstate(invalid="ignore", divide="ignore"):
        h = sums / counts
    h[counts == 0] = np.nan
    return h


def avg_dissim(m, z, i: int, k: int) -> float:
    """Mean dissimilarity from individual ``i`` to the other members of cluster ``k`` (1-based)."""
    d = as_array(m)
    labels, _ = labels_of(z)
    sel = labels == k - 1
    sel[i] = False
    if not sel.any():
        raise DegenerateClusterError(i, k)
    return float(d[i, sel].mean())


def silhouette_matrix(m, z) -> np.ndarray:
    """Entry (i, k): silhouette of i after moving it alone into cluster k.

    Column ``z_i`` is the classic silhouette. The value is 0 whenever i would
    be the sole member of cluster k, or no other nonempty cluster remains.
    """
    labels, c = labels_of(z)
    if c < 2:
        raise UndefinedSilhouetteError("silhouette needs at least two clusters")
    h = avg_dissim_matrix(m, z)
    usable = ~np.isnan(h)
    hh = np.where(usable, h, np.inf)

    order = np.argsort(hh, axis=1, kind="stable")
    rows = np.arange(hh.shape[0])
    first = hh[rows, order[:, 0]]
    second = hh[rows, order[:, 1]]
    # nearest other cluster when i sits in k: skip k itself
    b = np.where(order[:, [0]] == np.arange(c)[None, :], second[:, None], first[:, None])
    a = hh

    sil = np.zeros_like(hh)
    ok = usable & np.isfinite(b)
    top = np.maximum(a, b)
    ok &= top > 0
    sil[ok] = (b[ok] - a[ok]) / top[ok]
    return sil


def silhouette_vector(m, z, i: int) -> np.ndarray:
    return silhouette_matrix(m, z)[i]


def _check_exponent(x, name):
    if not np.isfinite(x) or x <= 0:
        raise ValidationError(f"exponent {name} must be a positive real, got {x}")


def probabilities_from_silhouettes(sil, l: float) -> np.ndarray:
    """Normalise ``(sil + 1) ** l`` along the last axis.

    Works on any stack of silhouette rows. An all-zero row (every silhouette
    equal to -1) becomes uniform.
    """
    _check_exponent(l, "l")
    shifted = np.clip(np.asarray(sil, dtype=float) + 1.0, 0.0, 2.0)
    top = shifted.max(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(top > 0, shifted / top, 1.0) ** l
    return w / w.sum(axis=-1, keepdims=True)


def probabilities_from_dissimilarities(h, v: float) -> np.ndarray:
    """Normalise ``(1 / h) ** v`` along the last axis.

    Rows where some ``h`` is 0 put equal mass on those clusters and 0
    elsewhere. ``h`` must contain no NaN.
    """
    _check_exponent(v, "v")
    h = np.asarray(h, dtype=float)
    zero = h == 0
    hmin = h.min(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = (hmin / h) ** v
    w = np.where(zero.any(axis=-1, keepdims=True), zero.astype(float), w)
    return w / w.sum(axis=-1, keepdims=True)


def certainty_silhouette(m, z, l: float = 1.0) -> CertaintyMatrix:
    _check_exponent(l, "l")
    p = probabilities_from_silhouettes(silhouette_matrix(m, z), l)
    return CertaintyMatrix(p, "silhouette_based", float(l))


def certainty_dissimilarity(m, z, v: float = 1.0) -> CertaintyMatrix:
    _check_exponent(v, "v")
    labels, c = labels_of(z)
    if c < 2:
        raise ValidationError("dissimilarity-based certainty needs at least two clusters")
    h = avg_dissim_matrix(m, z)
    bad = np.argwhere(np.isnan(h))
    if bad.size:
        i, k = bad[0]
        raise DegenerateClusterError(int(i), int(k) + 1)
    return CertaintyMatrix(probabilities_from_dissimilarities(h, v), "dissimilarity_based", float(v))


MEASURES = {
    "sil": certainty_silhouette,
    "dis": certainty_dissimilarity,
}


def certainty(m, z: Partition, measure: str, exponent: float = 1.0) -> CertaintyMatrix:
    try:
        fn = MEASURES[measure]
    except KeyError:
        raise ValidationError(f"unknown measure {measure!r}; choose from {sorted(MEASURES)}") from None
    return fn(m, z, exponent)
