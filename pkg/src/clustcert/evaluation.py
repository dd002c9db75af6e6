"""Scoring partitions and certainty matrices.

Rates are averaged over individuals, leaving out a flagged hybrid. Cluster
labels are matched to true groups by maximum-overlap assignment on the
C x C contingency table.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment

from .certainty import (
    CertaintyMatrix,
    avg_dissim_matrix,
    probabilities_from_dissimilarities,
    probabilities_from_silhouettes,
    silhouette_matrix,
)
from .errors import DegenerateClusterError, TuningError, ValidationError
from .partition import Partition, labels_of

EXPONENT_BRACKET = (1e-3, 64.0)
BISECTION_STEPS = 60
TUNING_TOL = 1e-3


def contingency(z, g, c: int | None = None, mask=None) -> np.ndarray:
    """Counts with clusters as rows and groups as columns.

    Individuals with group label 0 (a hybrid) are not counted.
    """
    labels, cz = labels_of(z)
    g = np.asarray(g, dtype=int)
    keep = g > 0
    if mask is not None:
        keep &= mask
    labels, g = labels[keep], g[keep]
    c = c or cz
    table = np.zeros((c, max(c, int(g.max()))), dtype=int)
    np.add.at(table, (labels, g - 1), 1)
    return table


def match_clusters(z, g, mask=None, c: int | None = None) -> dict[int, int]:
    """Bijection cluster -> group maximising the number of agreeing individuals.

    For two clusters this is the majority rule: cluster 1 is whichever cluster
    holds more members of group 1. ``mask`` restricts the count to selected
    individuals (e.g. everyone except a hybrid). ``c`` overrides the cluster
    count of a raw label vector whose last clusters are empty.
    """
    c = c or labels_of(z)[1]
    g = np.asarray(g, dtype=int)
    n_groups = int(g[mask].max() if mask is not None else g.max())
    if n_groups != c:
        raise ValidationError(f"cannot match {c} clusters to {n_groups} groups")
    table = contingency(z, g, c, mask)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return {int(r) + 1: int(k) + 1 for r, k in zip(rows, cols)}


def _group_columns(g, mapping) -> np.ndarray:
    inverse = {grp: clu for clu, grp in mapping.items()}
    return np.array([inverse.get(int(v), 0) - 1 for v in g])


def _keep(n, exclude):
    keep = np.ones(n, dtype=bool)
    if exclude is not None:
        keep[np.atleast_1d(exclude)] = False
    return keep


def _p(p):
    return p.p if isinstance(p, CertaintyMatrix) else np.asarray(p, dtype=float)


def soft_misclassification(p, g, mapping, exclude=None) -> float:
    """Mean of ``1 - P[i, cluster of true group g_i]`` over kept individuals."""
    p = _p(p)
    if g is None:
        raise ValidationError("soft-misclassification needs true groups")
    g = np.asarray(g, dtype=int)
    if g.shape != (p.shape[0],):
        raise ValidationError("group vector length differs from certainty rows")
    keep = _keep(p.shape[0], exclude)
    cols = _group_columns(g, mapping)
    if np.any(cols[keep] < 0):
        raise ValidationError("some true groups have no matched cluster")
    idx = np.flatnonzero(keep)
    return float(np.mean(1.0 - p[idx, cols[idx]]))


def partition_disagreement(p, z, exclude=None) -> float:
    """Mean of ``1 - P[i, z_i]`` over kept individuals."""
    p = _p(p)
    labels, c = labels_of(z)
    if not isinstance(z, Partition):
        c = max(c, p.shape[1])
    if labels.size != p.shape[0] or c != p.shape[1]:
        raise ValidationError(
            f"certainty matrix {p.shape} does not fit partition of {labels.size} into {c}"
        )
    keep = _keep(p.shape[0], exclude)
    idx = np.flatnonzero(keep)
    return float(np.mean(1.0 - p[idx, labels[idx]]))


def hard_misclassified(z, g, mapping, exclude=None) -> list[int]:
    labels, _ = labels_of(z)
    cols = _group_columns(g, mapping)
    keep = _keep(labels.size, exclude)
    return [int(i) for i in np.flatnonzero(keep & (labels != cols))]


@dataclass
class EvaluationReport:
    r_pd: float
    r_sm: float | None = None
    mapping: dict[int, int] | None = None
    misclassified: list[int] = field(default_factory=list)
    exponent: float | None = None
    measure: str | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.mapping is not None:
            out["mapping"] = {str(k): v for k, v in self.mapping.items()}
        # 1-based individual numbers in files
        out["misclassified"] = [i + 1 for i in self.misclassified]
        return out

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text


def evaluate(p: CertaintyMatrix, z, g=None, exclude=None) -> EvaluationReport:
    report = EvaluationReport(
        r_pd=partition_disagreement(p, z, exclude),
        exponent=p.exponent if isinstance(p, CertaintyMatrix) else None,
        measure=p.kind if isinstance(p, CertaintyMatrix) else None,
    )
    if g is not None:
        mask = _keep(len(g), exclude)
        mapping = match_clusters(z, g, mask)
        report.mapping = mapping
        report.r_sm = soft_misclassification(p, g, mapping, exclude)
        report.misclassified = hard_misclassified(z, g, mapping, exclude)
    return report


# --- exponent tuning ----------------------------------------------------------

# objective name -> does it increase with the exponent?
OBJECTIVES = {
    "target_sd_of_hybrid": True,
    "target_r_sm": False,
    "target_r_pd": False,
}


@dataclass(frozen=True)
class TuningResult:
    exponent: float
    value: float
    target: float
    attained: bool
    evaluations: int


def bisect_exponent(
    fn: Callable[[float], float],
    target: float,
    increasing: bool,
    bracket: tuple[float, float] = EXPONENT_BRACKET,
    steps: int = BISECTION_STEPS,
    tol: float = TUNING_TOL,
) -> TuningResult:
    """Find the exponent where a monotone objective ``fn`` hits ``target``.

    The upper end starts at 1 and doubles up to ``bracket[1]`` until the
    target is crossed, so the objective only needs to be monotone on the
    bracket actually searched. Raises TuningError when a value falls outside
    the values at the current bracket ends, which a monotone objective cannot
    do. An unreachable target returns the nearer bracket end with
    ``attained=False``.
    """
    lo, top = bracket
    sign = 1.0 if increasing else -1.0
    f_lo = fn(lo)
    calls = 1
    hi = min(1.0, top) if lo < 1.0 else top
    while True:
        f_hi = fn(hi)
        calls += 1
        if sign * (f_hi - target) >= 0 or hi >= top:
            break
        if sign * (f_hi - f_lo) < -1e-12 * max(1.0, abs(f_lo)):
            raise TuningError(f"objective runs the wrong way: f({lo:.6g})={f_lo:.6g}, f({hi:.6g})={f_hi:.6g}")
        hi = min(2.0 * hi, top)
    slack = 1e-12 * max(1.0, abs(f_lo), abs(f_hi))
    if sign * (f_hi - f_lo) < -slack:
        raise TuningError(
            f"objective runs the wrong way over [{lo}, {hi}]: {f_lo:.6g} -> {f_hi:.6g}"
        )
    if sign * (target - f_lo) <= 0:
        end = (lo, f_lo)
    elif sign * (target - f_hi) > 0:
        end = (hi, f_hi)
    else:
        end = None
    if end is not None:
        attained = abs(end[1] - target) <= tol
        if not attained:
            warnings.warn(
                f"target {target} outside objective range [{min(f_lo, f_hi):.6g}, "
                f"{max(f_lo, f_hi):.6g}]; returning bracket end {end[0]}",
                stacklevel=2,
            )
        return TuningResult(end[0], end[1], target, attained, calls)

    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        calls += 1
        if not (min(f_lo, f_hi) - slack <= f_mid <= max(f_lo, f_hi) + slack):
            raise TuningError(
                f"objective not monotone: f({mid:.6g})={f_mid:.6g} outside "
                f"[f({lo:.6g}), f({hi:.6g})] = [{f_lo:.6g}, {f_hi:.6g}]"
            )
        if sign * (f_mid - target) < 0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    best = (lo, f_lo) if abs(f_lo - target) <= abs(f_hi - target) else (hi, f_hi)
    attained = abs(best[1] - target) <= tol
    if not attained:
        warnings.warn(f"bisection ended {abs(best[1] - target):.3g} from target", stacklevel=2)
    return TuningResult(best[0], best[1], target, attained, calls)


def tune_exponent(objective: str, target: float, measure: str, context) -> TuningResult:
    """Tune l (``measure="sil"``) or v (``measure="dis"``) against a target.

    ``context`` supplies ``metrics(measure, exponent)`` returning a mapping
    with ``sd_ph1``, ``r_sm`` and ``r_pd``; both DatasetContext and the
    replication sets from :mod:`clustcert.simulate` do.
    """
    if objective not in OBJECTIVES:
        raise ValidationError(f"unknown objective {objective!r}; choose from {sorted(OBJECTIVES)}")
    key = {"target_sd_of_hybrid": "sd_ph1", "target_r_sm": "r_sm", "target_r_pd": "r_pd"}[objective]

    def fn(x):
        val = context.metrics(measure, x)[key]
        if val is None or not math.isfinite(val):
            raise TuningError(f"{key} unavailable for this context")
        return val

    return bisect_exponent(fn, target, OBJECTIVES[objective])


class DatasetContext:
    """One dataset and partition, with the exponent-free pieces cached.

    Silhouette rows and average dissimilarities do not depend on l or v, so
    repeated evaluation during tuning only re-normalises.
    """

    def __init__(self, m, z, g=None, exclude=None):
        self.z = z
        self.g = None if g is None else np.asarray(g, dtype=int)
        self.exclude = exclude
        self._sil = silhouette_matrix(m, z)
        h = avg_dissim_matrix(m, z)
        self._h = None if np.isnan(h).any() else h
        self._degenerate = None
        if self._h is None:
            i, k = np.argwhere(np.isnan(h))[0]
            self._degenerate = DegenerateClusterError(int(i), int(k) + 1)
        self.mapping = None
        if self.g is not None:
            self.mapping = match_clusters(z, self.g, _keep(len(self.g), exclude))

    def probabilities(self, measure: str, exponent: float) -> np.ndarray:
        if measure == "sil":
            return probabilities_from_silhouettes(self._sil, exponent)
        if measure == "dis":
            if self._h is None:
                raise self._degenerate
            return probabilities_from_dissimilarities(self._h, exponent)
        raise ValidationError(f"unknown measure {measure!r}")

    def metrics(self, measure: str, exponent: float) -> dict:
        p = self.probabilities(measure, exponent)
        out = {"r_pd": partition_disagreement(p, self.z, self.exclude), "r_sm": None, "sd_ph1": None}
        if self.g is not None:
            out["r_sm"] = soft_misclassification(p, self.g, self.mapping, self.exclude)
        return out
