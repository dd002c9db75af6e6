"""Pairwise dissimilarity matrices and the datasets they are built from.

Three constructors are provided (Euclidean, simple matching, chord), plus
CSV readers/writers for matrices and datasets. Individuals are indexed from
0 throughout the Python API; files written for humans use 1-based indices.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import (
    DegenerateRowError,
    IngestionError,
    KindMismatchError,
    ValidationError,
)

SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class DissimilarityMatrix:
    """Dense symmetric matrix of nonnegative dissimilarities with zero diagonal.

    The array is copied and marked read-only on construction.
    """

    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValidationError(f"dissimilarity matrix must be square, got shape {d.shape}")
        if d.shape[0] < 1:
            raise ValidationError("dissimilarity matrix is empty")
        if not np.all(np.isfinite(d)):
            raise ValidationError("dissimilarity matrix has non-finite entries")
        if np.any(d < 0):
            i, j = np.argwhere(d < 0)[0]
            raise ValidationError(f"negative dissimilarity d[{i},{j}] = {d[i, j]}")
        if np.any(np.diag(d) != 0):
            i = int(np.flatnonzero(np.diag(d) != 0)[0])
            raise ValidationError(f"nonzero diagonal d[{i},{i}] = {d[i, i]}")
        if not np.array_equal(d, d.T):
            raise ValidationError("dissimilarity matrix is not symmetric")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.d if dtype is None else self.d.astype(dtype)

    def scaled(self, c: float) -> "DissimilarityMatrix":
        return DissimilarityMatrix(self.d * c)

    @classmethod
    def from_array(cls, a, tol: float = SYMMETRY_TOL) -> "DissimilarityMatrix":
        """Build from an externally produced array, tolerating tiny asymmetry.

        Entries with ``|d_ij - d_ji| <= tol`` are replaced by their average.
        Larger asymmetry, negative entries or a nonzero diagonal are rejected.
        """
        a = np.array(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError(f"dissimilarity matrix must be square, got shape {a.shape}")
        gap = np.abs(a - a.T)
        if np.any(gap > tol):
            i, j = np.unravel_index(np.argmax(gap), gap.shape)
            raise ValidationError(
                f"asymmetric entries d[{i},{j}]={a[i, j]} vs d[{j},{i}]={a[j, i]}"
            )
        return cls((a + a.T) / 2.0)


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with optional true groups and a flagged hybrid individual.

    ``groups`` holds labels 1..G for ordinary individuals. The hybrid, when
    present, carries group label 0 since it belongs to no group.
    """

    x: np.ndarray
    kind: str = "continuous"
    groups: np.ndarray | None = None
    hybrid_index: int | None = None
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValidationError(f"dataset must be a non-empty 2-D array, got shape {x.shape}")
        if self.kind not in ("binary", "continuous"):
            raise ValidationError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "binary" and not np.all((x == 0) | (x == 1)):
            raise ValidationError("binary dataset has values outside {0, 1}")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        n = x.shape[0]
        if self.hybrid_index is not None and not 0 <= self.hybrid_index < n:
            raise ValidationError(f"hybrid index {self.hybrid_index} out of range")
        if self.groups is not None:
            g = np.asarray(self.groups, dtype=int).copy()
            if g.shape != (n,):
                raise ValidationError(f"groups must have length {n}, got shape {g.shape}")
            mask = np.ones(n, dtype=bool)
            if self.hybrid_index is not None:
                mask[self.hybrid_index] = False
            labels = np.unique(g[mask])
            if labels.size and not np.array_equal(labels, np.arange(1, labels.size + 1)):
                raise ValidationError(f"group labels must be contiguous 1..G, got {labels.tolist()}")
            g.setflags(write=False)
            object.__setattr__(self, "groups", g)
        if not self.feature_names:
            names = tuple(f"x{j + 1}" for j in range(x.shape[1]))
            object.__setattr__(self, "feature_names", names)
        elif len(self.feature_names) != x.shape[1]:
            raise ValidationError("feature_names length does not match feature count")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def n_groups(self) -> int:
        if self.groups is None:
            return 0
        return int(self.groups.max())

    def nonhybrid_mask(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        if self.hybrid_index is not None:
            mask[self.hybrid_index] = False
        return mask


def _features(data) -> np.ndarray:
    x = data.x if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValidationError(f"need a non-empty N x p feature matrix, got shape {x.shape}")
    return x


def euclidean(data) -> DissimilarityMatrix:
    """Euclidean distances between the rows of ``data``."""
    x = _features(data)
    return DissimilarityMatrix(squareform(pdist(x, "euclidean")))


def simple_matching(data) -> DissimilarityMatrix:
    """Proportion of binary features on which two individuals disagree."""
    if isinstance(data, Dataset) and data.kind != "binary":
        raise KindMismatchError("simple matching distance needs a binary dataset")
    x = _features(data)
    if not np.all((x == 0) | (x == 1)):
        raise KindMismatchError("simple matching distance needs features coded 0/1")
    mismatches = x @ (1 - x).T + (1 - x) @ x.T
    d = np.triu(mismatches / x.shape[1], 1)
    return DissimilarityMatrix(d + d.T)


def simple_matching_sqrt(data) -> DissimilarityMatrix:
    """Square root of the simple-matching proportion.

    This is the convention of several R packages (e.g. ade4's
    ``dist.binary``) and, up to a constant factor, plain Euclidean distance
    on 0/1 features.
    """
    m = simple_matching(data)
    return DissimilarityMatrix(np.sqrt(m.d))


def chord(data) -> DissimilarityMatrix:
    """Chord distance: Euclidean distance between rows scaled to unit length."""
    x = _features(data)
    norms = np.linalg.norm(x, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DegenerateRowError(int(zero[0]))
    return euclidean(x / norms[:, None])


METRICS = {
    "euclidean": euclidean,
    "smd": simple_matching,
    "smd_sqrt": simple_matching_sqrt,
    "chord": chord,
}


def compute(data, metric: str) -> DissimilarityMatrix:
    try:
        fn = METRICS[metric]
    except KeyError:
        raise ValidationError(f"unknown dissimilarity {metric!r}; choose from {sorted(METRICS)}") from None
    return fn(data)


def pca_scores(data, k: int = 2) -> np.ndarray:
    """Scores on the first ``k`` principal components of the centred features.

    Used only to give external plotting tools a 2-D layout.
    """
    x = _features(data)
    xc = x - x.mean(axis=0)
    u, s, _ = np.linalg.svd(xc, full_matrices=False)
    scores = u[:, :k] * s[:k]
    # sign convention: largest-magnitude loading positive per component
    signs = np.sign(scores[np.argmax(np.abs(scores), axis=0), np.arange(scores.shape[1])])
    signs[signs == 0] = 1
    return scores * signs


# --- file formats -----------------------------------------------------------


def save_matrix(m: DissimilarityMatrix, path) -> None:
    """Write ``n=<N>`` then N rows of comma-separated values (17 sig. digits)."""
    d = np.asarray(m)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"n={d.shape[0]}\n")
        for row in d:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_matrix(path) -> DissimilarityMatrix:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IngestionError(str(exc), path) from exc
    lines = [ln for ln in lines if ln.strip()]
    if not lines or not lines[0].startswith("n="):
        raise IngestionError("first line must be 'n=<N>'", path, 1)
    try:
        n = int(lines[0][2:])
    except ValueError:
        raise IngestionError(f"bad size header {lines[0]!r}", path, 1) from None
    if len(lines) - 1 != n:
        raise IngestionError(f"expected {n} matrix rows, found {len(lines) - 1}", path)
    rows = []
    for lineno, ln in enumerate(lines[1:], start=2):
        try:
            row = [float(v) for v in ln.split(",")]
        except ValueError:
            raise IngestionError(f"non-numeric value in {ln!r}", path, lineno) from None
        if len(row) != n:
            raise IngestionError(f"expected {n} values, found {len(row)}", path, lineno)
        rows.append(row)
    return DissimilarityMatrix.from_array(rows)


def save_dataset(data: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = list(data.feature_names)
        if data.groups is not None:
            header.append("group")
        if data.hybrid_index is not None:
            header.append("hybrid")
        w.writerow(header)
        for i, row in enumerate(data.x):
            out = [repr(float(v)) if data.kind == "continuous" else str(int(v)) for v in row]
            if data.groups is not None:
                out.append(str(int(data.groups[i])))
            if data.hybrid_index is not None:
                out.append("true" if i == data.hybrid_index else "false")
            w.writerow(out)


_TRUE = {"1", "true", "yes", "t", "y"}
_FALSE = {"0", "false", "no", "f", "n", ""}


def load_dataset(path, kind: str | None = None) -> Dataset:
    """Read a dataset CSV.

    A trailing ``group`` column holds integer labels; a ``hybrid`` column of
    booleans flags at most one hybrid individual. ``kind`` is inferred as
    binary when every feature value is 0 or 1, unless given explicitly.
    """
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise IngestionError(str(exc), path) from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError("empty file", path, 1) from None
        lower = [h.lower() for h in header]
        gcol = lower.index("group") if "group" in lower else None
        hcol = lower.index("hybrid") if "hybrid" in lower else None
        fcols = [j for j in range(len(header)) if j not in (gcol, hcol)]
        if not fcols:
            raise IngestionError("no feature columns", path, 1)
        x, groups, hybrids = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise IngestionError(f"expected {len(header)} fields, found {len(row)}", path, lineno)
            try:
                x.append([float(row[j]) for j in fcols])
                if gcol is not None:
                    groups.append(int(row[gcol]))
            except ValueError as exc:
                raise IngestionError(str(exc), path, lineno) from None
            if hcol is not None:
                flag = row[hcol].strip().lower()
                if flag in _TRUE:
                    hybrids.append(len(x) - 1)
                elif flag not in _FALSE:
                    raise IngestionError(f"bad hybrid flag {row[hcol]!r}", path, lineno)
    if not x:
        raise IngestionError("no data rows", path)
    if len(hybrids) > 1:
        raise IngestionError(f"at most one hybrid individual allowed, found {len(hybrids)}", path)
    xa = np.array(x)
    if kind is None:
        kind = "binary" if np.all((xa == 0) | (xa == 1)) else "continuous"
    return Dataset(
        xa,
        kind=kind,
        groups=np.array(groups) if gcol is not None else None,
        hybrid_index=hybrids[0] if hybrids else None,
        feature_names=tuple(header[j] for j in fcols),
    )


def iris() -> Dataset:
    """Fisher's iris data (150 x 4) with species as groups 1..3."""
    return load_dataset(Path(__file__).with_name("data") / "iris.csv", kind="continuous")


def as_array(m) -> np.ndarray:
    """Raw ndarray view of a DissimilarityMatrix or array-like."""
    if isinstance(m, DissimilarityMatrix):
        return m.d
    return np.asarray(m, dtype=float)
