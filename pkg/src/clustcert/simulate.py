"""Simulated designs with a hybrid individual, and the replication harness.

Each design has G groups of ``per_group`` individuals followed by one hybrid
whose latent values sit between the groups. Features come in blocks; block b
is driven by latent component b. Binary features are Bernoulli with a
logistic link whose intercept is calibrated so that Pr(X = 1) = 0.5 over the
groups; continuous features are Gaussian with unit variance around the
latent value.

Replicate ``k`` of a run with seed ``s`` draws from
``SeedSequence(s, spawn_key=(k,))``, so results do not depend on how
replicates are scheduled across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import dissimilarity as dissim
from .certainty import (
    avg_dissim_matrix,
    probabilities_from_dissimilarities,
    probabilities_from_silhouettes,
    silhouette_matrix,
)
from .dissimilarity import Dataset
from .errors import IngestionError, SolverError, ValidationError
from .evaluation import TuningResult, match_clusters, tune_exponent
from .fanny import fanny
from .partition import hierarchical, kmeans, pam

INTERCEPT_BRACKET = (-50.0, 50.0)


@dataclass(frozen=True)
class BinaryDesign:
    group_latents: tuple[tuple[float, ...], ...]
    hybrid_latent: tuple[float, ...]
    beta: float = 1.2
    per_group: int = 20
    features_per_latent: int = 10

    def __post_init__(self):
        _check_latents(self.group_latents, self.hybrid_latent, self.per_group, self.features_per_latent)
        if not math.isfinite(self.beta):
            raise ValidationError("beta must be finite")

    @property
    def intercept(self) -> float:
        # cached on first use; frozen dataclass, so store via object.__setattr__
        try:
            return self.__dict__["_intercept"]
        except KeyError:
            t = solve_intercept(self)
            object.__setattr__(self, "_intercept", t)
            return t

    @property
    def n_groups(self) -> int:
        return len(self.group_latents)


@dataclass(frozen=True)
class ContinuousDesign:
    group_latents: tuple[tuple[float, ...], ...]
    hybrid_latent: tuple[float, ...]
    per_group: int = 20
    features_per_latent: int = 10
    noise_sd: float = 1.0

    def __post_init__(self):
        _check_latents(self.group_latents, self.hybrid_latent, self.per_group, self.features_per_latent)
        if not self.noise_sd > 0:
            raise ValidationError("noise_sd must be positive")

    @property
    def n_groups(self) -> int:
        return len(self.group_latents)


def _check_latents(groups, hybrid, per_group, block):
    if not groups:
        raise ValidationError("design needs at least one group")
    widths = {len(u) for u in groups} | {len(hybrid)}
    if len(widths) != 1:
        raise ValidationError("all latent vectors must have the same length")
    if per_group < 1 or block < 1:
        raise ValidationError("per_group and features_per_latent must be positive")


BINARY_TWO = BinaryDesign(((3, 0), (0, 3)), (1.5, 1.5), 1.2, 20, 10)
BINARY_THREE = BinaryDesign(((3, 0, 0), (0, 3, 0), (0, 0, 3)), (1, 1, 1), 1.2, 20, 8)
CONTINUOUS_TWO = ContinuousDesign(((3, 0), (0, 3)), (1.5, 1.5), 20, 10)
CONTINUOUS_THREE = ContinuousDesign(((3, 0, 0), (0, 3, 0), (0, 0, 3)), (1, 1, 1), 20, 8)

DESIGNS = {
    "binary2": BINARY_TWO,
    "binary3": BINARY_THREE,
    "continuous2": CONTINUOUS_TWO,
    "continuous3": CONTINUOUS_THREE,
}


def solve_intercept(design: BinaryDesign) -> float:
    """Intercept t with mean over groups and blocks of sigmoid(t + beta*u) = 0.5.

    Groups are weighted equally. Solved by bisection on [-50, 50] until the
    bracket is narrower than 1e-12.
    """
    u = np.asarray(design.group_latents, dtype=float).ravel()

    def excess(t):
        return float(np.mean(expit(t + design.beta * u))) - 0.5

    lo, hi = INTERCEPT_BRACKET
    f_lo, f_hi = excess(lo), excess(hi)
    if f_lo > 0 or f_hi < 0:
        raise SolverError(
            f"intercept not bracketed by {INTERCEPT_BRACKET}: residuals {f_lo:.3g}, {f_hi:.3g}"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


def _latent_rows(design):
    rows = [u for u in design.group_latents for _ in range(design.per_group)]
    rows.append(design.hybrid_latent)
    lat = np.asarray(rows, dtype=float)
    return np.repeat(lat, design.features_per_latent, axis=1)


def _labels(design):
    g = np.repeat(np.arange(1, design.n_groups + 1), design.per_group)
    return np.append(g, 0)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def gen_binary(design: BinaryDesign, seed=None) -> Dataset:
    latent = _latent_rows(design)
    prob = expit(design.intercept + design.beta * latent)
    x = (_rng(seed).random(prob.shape) < prob).astype(float)
    n = x.shape[0]
    return Dataset(x, kind="binary", groups=_labels(design), hybrid_index=n - 1)


def gen_continuous(design: ContinuousDesign, seed=None) -> Dataset:
    latent = _latent_rows(design)
    x = latent + design.noise_sd * _rng(seed).standard_normal(latent.shape)
    n = x.shape[0]
    return Dataset(x, kind="continuous", groups=_labels(design), hybrid_index=n - 1)


def generate(design, seed=None) -> Dataset:
    if isinstance(design, BinaryDesign):
        return gen_binary(design, seed)
    return gen_continuous(design, seed)


# --- scenarios ----------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """One simulation experiment: design, dissimilarity, clustering and measure.

    ``tune_sd`` or ``tune_rsm`` replace the fixed ``exponent`` with one tuned
    on the pooled replicates.
    """

    design: str = "continuous2"
    dissimilarity: str = "euclidean"
    clustering: str = "hier"
    linkage: str = "average"
    measure: str = "sil"
    exponent: float = 1.0
    tune_sd: float | None = None
    tune_rsm: float | None = None
    replicates: int = 1000
    seed: int = 1
    restarts: int = 10
    fanny_r: float = 2.0

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ValidationError(f"unknown design {self.design!r}; choose from {sorted(DESIGNS)}")
        if self.dissimilarity not in dissim.METRICS:
            raise ValidationError(f"unknown dissimilarity {self.dissimilarity!r}")
        if self.clustering not in ("pam", "hier", "kmeans", "fanny"):
            raise ValidationError(f"unknown clustering {self.clustering!r}")
        if self.measure not in ("sil", "dis", "fanny"):
            raise ValidationError(f"unknown measure {self.measure!r}")
        if (self.measure == "fanny") != (self.clustering == "fanny"):
            raise ValidationError("measure 'fanny' goes with clustering 'fanny' and nothing else")
        if self.tune_sd is not None and self.tune_rsm is not None:
            raise ValidationError("give at most one of tune_sd and tune_rsm")
        if (self.tune_sd is not None or self.tune_rsm is not None) and self.measure == "fanny":
            raise ValidationError("FANNY's exponent is not tuned")
        if not self.exponent > 0:
            raise ValidationError("exponent must be positive")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ValidationError("seed must be an unsigned 64-bit integer")

    @property
    def design_obj(self):
        return DESIGNS[self.design]

    def replace(self, **changes) -> "Scenario":
        return Scenario(**{**asdict(self), **changes})


def load_scenario(path) -> Scenario:
    """Read ``key = value`` lines (``#`` starts a comment) into a Scenario."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IngestionError(str(exc), path) from exc
    types = {f.name: f.type for f in fields(Scenario)}
    values = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise IngestionError(f"expected 'key = value', got {raw!r}", path, lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise IngestionError(f"unknown scenario key {key!r}", path, lineno)
        try:
            values[key] = _coerce(types[key], val)
        except ValueError as exc:
            raise IngestionError(f"bad value for {key}: {exc}", path, lineno) from None
    return Scenario(**values)


def _coerce(typ, val):
    typ = str(typ)
    if val.lower() in ("none", "") and "None" in typ:
        return None
    if typ.startswith("int"):
        return int(val)
    if typ.startswith("float"):
        return float(val)
    return val


def save_scenario(s: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, val in asdict(s).items():
            fh.write(f"{key} = {val}\n")


# --- replication --------------------------------------------------------------


@dataclass
class ReplicateRecord:
    index: int
    labels: np.ndarray | None = None  # zero-based hard labels
    gcol: np.ndarray | None = None  # column of each individual's true group, -1 for hybrid
    col1: int = -1  # column matched to group 1
    sil: np.ndarray | None = None
    h: np.ndarray | None = None
    u: np.ndarray | None = None
    error: str | None = None


def _replicate(scenario: Scenario, index: int) -> ReplicateRecord:
    rec = ReplicateRecord(index)
    try:
        design = scenario.design_obj
        c = design.n_groups
        data = generate(design, np.random.SeedSequence(scenario.seed, spawn_key=(index,)))
        aux_seed = np.random.SeedSequence(scenario.seed, spawn_key=(index, 1))
        m = dissim.compute(data, scenario.dissimilarity)
        if scenario.clustering == "fanny":
            res = fanny(m, c, scenario.fanny_r, seed=aux_seed)
            rec.u = res.u
            labels = res.hard_labels()
        elif scenario.clustering == "pam":
            labels = pam(m, c).z
        elif scenario.clustering == "hier":
            labels = hierarchical(m, c, scenario.linkage).z
        else:
            labels = kmeans(data, c, seed=aux_seed, restarts=scenario.restarts).z
        mask = data.nonhybrid_mask()
        mapping = match_clusters(labels, data.groups, mask, c=c)
        inverse = {grp: clu for clu, grp in mapping.items()}
        rec.labels = labels - 1
        rec.gcol = np.array([inverse[int(v)] - 1 if v > 0 else -1 for v in data.groups])
        rec.col1 = inverse[1] - 1
        if scenario.measure == "sil":
            rec.sil = silhouette_matrix(m, labels)
        elif scenario.measure == "dis":
            h = avg_dissim_matrix(m, labels)
            if np.isnan(h).any():
                i, k = np.argwhere(np.isnan(h))[0]
                raise ValidationError(f"cluster {k + 1} has no members other than individual {i}")
            rec.h = h
    except Exception as exc:  # recorded per replicate, reported in the summary
        rec.error = f"{type(exc).__name__}: {exc}"
    return rec


def _replicate_batch(args):
    scenario, indices = args
    return [_replicate(scenario, k) for k in indices]


class ReplicationSet:
    """Exponent-free per-replicate results, re-scored cheaply for any exponent."""

    def __init__(self, scenario: Scenario, records: list[ReplicateRecord]):
        self.scenario = scenario
        self.records = records
        self.ok = [r for r in records if r.error is None]
        self.failed = [(r.index, r.error) for r in records if r.error is not None]
        if self.ok:
            self._labels = np.stack([r.labels for r in self.ok])
            self._gcol = np.stack([r.gcol for r in self.ok])
            self._col1 = np.array([r.col1 for r in self.ok])
            key = {"sil": "sil", "dis": "h", "fanny": "u"}[scenario.measure]
            self._base = np.stack([getattr(r, key) for r in self.ok])
            self._hyb = int(np.flatnonzero(self._gcol[0] < 0)[0])

    def __len__(self):
        return len(self.records)

    def probabilities(self, measure: str, exponent: float) -> np.ndarray:
        if measure != self.scenario.measure:
            raise ValidationError(
                f"replication set holds {self.scenario.measure!r} inputs, not {measure!r}"
            )
        if measure == "sil":
            return probabilities_from_silhouettes(self._base, exponent)
        if measure == "dis":
            return probabilities_from_dissimilarities(self._base, exponent)
        return self._base

    def per_replicate(self, measure: str, exponent: float):
        """Arrays (p_h1, r_sm, r_pd), one entry per successful replicate."""
        if not self.ok:
            raise ValidationError("no successful replicates")
        p = self.probabilities(measure, exponent)
        reps = np.arange(p.shape[0])
        ph1 = p[reps, self._hyb, self._col1]
        keep = self._gcol[0] >= 0
        idx = np.flatnonzero(keep)
        true_p = np.take_along_axis(p[:, idx, :], self._gcol[:, idx, None], axis=2)[..., 0]
        own_p = np.take_along_axis(p[:, idx, :], self._labels[:, idx, None], axis=2)[..., 0]
        r_sm = np.array([math.fsum(row) / row.size for row in 1.0 - true_p])
        r_pd = np.array([math.fsum(row) / row.size for row in 1.0 - own_p])
        return ph1, r_sm, r_pd

    def metrics(self, measure: str, exponent: float) -> dict:
        ph1, r_sm, r_pd = self.per_replicate(measure, exponent)
        n = ph1.size
        mean = math.fsum(ph1) / n
        sd = math.sqrt(math.fsum((ph1 - mean) ** 2) / (n - 1)) if n > 1 else 0.0
        return {
            "mean_ph1": mean,
            "sd_ph1": sd,
            "r_sm": math.fsum(r_sm) / n,
            "r_pd": math.fsum(r_pd) / n,
        }


def simulate_replicates(scenario: Scenario, replicates: int | None = None, seed: int | None = None,
                        workers: int = 1) -> ReplicationSet:
    changes = {}
    if replicates is not None:
        changes["replicates"] = replicates
    if seed is not None:
        changes["seed"] = seed
    if changes:
        scenario = scenario.replace(**changes)
    n = scenario.replicates
    if n < 1:
        raise ValidationError("need at least one replicate")
    if workers <= 1:
        records = [_replicate(scenario, k) for k in range(n)]
    else:
        chunks = [(scenario, list(range(s, min(n, s + 50)))) for s in range(0, n, 50)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = [r for batch in pool.map(_replicate_batch, chunks) for r in batch]
    return ReplicationSet(scenario, records)


@dataclass
class ReplicationSummary:
    mean_ph1: float
    sd_ph1: float
    r_sm_mean: float
    r_pd_mean: float
    replicates: int
    exponent: float
    measure: str
    failed: list = field(default_factory=list)
    tuning: TuningResult | None = None
    per_replicate: tuple | None = field(default=None, repr=False)

    @property
    def complete(self) -> bool:
        return not self.failed

    def to_dict(self) -> dict:
        out = {
            "mean_ph1": self.mean_ph1,
            "sd_ph1": self.sd_ph1,
            "r_sm_mean": self.r_sm_mean,
            "r_pd_mean": self.r_pd_mean,
            "replicates": self.replicates,
            "exponent": self.exponent,
            "measure": self.measure,
            "complete": self.complete,
            "failed": [{"replicate": i, "error": e} for i, e in self.failed],
        }
        if self.tuning is not None:
            out["tuning"] = asdict(self.tuning)
        return out

    def write_dump(self, path) -> None:
        ph1, r_sm, r_pd, ids = self.per_replicate
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("replicate,p_h1,r_sm,r_pd\n")
            for k, a, b, c in zip(ids, ph1, r_sm, r_pd):
                fh.write(f"{k},{a:.10f},{b:.10f},{c:.10f}\n")


def summarize(rset: ReplicationSet, exponent: float | None = None,
              tuning: TuningResult | None = None) -> ReplicationSummary:
    s = rset.scenario
    if exponent is None:
        exponent = s.fanny_r if s.measure == "fanny" else s.exponent
    if not rset.ok:
        raise ValidationError(f"all {len(rset)} replicates failed; first error: {rset.failed[0][1]}")
    met = rset.metrics(s.measure, exponent)
    ph1, r_sm, r_pd = rset.per_replicate(s.measure, exponent)
    ids = [r.index for r in rset.ok]
    return ReplicationSummary(
        mean_ph1=met["mean_ph1"],
        sd_ph1=met["sd_ph1"],
        r_sm_mean=met["r_sm"],
        r_pd_mean=met["r_pd"],
        replicates=len(rset.ok),
        exponent=float(exponent),
        measure=s.measure,
        failed=rset.failed,
        tuning=tuning,
        per_replicate=(ph1, r_sm, r_pd, ids),
    )


def run_replications(scenario: Scenario, replicates: int | None = None, seed: int | None = None,
                     workers: int = 1) -> ReplicationSummary:
    """Generate, cluster and score ``replicates`` datasets; tune if requested."""
    rset = simulate_replicates(scenario, replicates, seed, workers)
    s = rset.scenario
    if not rset.ok:
        raise ValidationError(f"all {len(rset)} replicates failed; first error: {rset.failed[0][1]}")
    tuning = None
    if s.tune_sd is not None:
        tuning = tune_exponent("target_sd_of_hybrid", s.tune_sd, s.measure, rset)
    elif s.tune_rsm is not None:
        tuning = tune_exponent("target_r_sm", s.tune_rsm, s.measure, rset)
    return summarize(rset, tuning.exponent if tuning else None, tuning)
