"""Command-line front end: ``clustcert <subcommand> ...``.

Every subcommand that writes an output directory also writes
``manifest.json``; ``clustcert rerun <manifest> --out <dir>`` replays it.
Exit codes: 0 success, 1 other library error, 2 usage, 3 ingestion,
4 validation, 5 solver, 6 tuning.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import dissimilarity as dissim
from .certainty import CertaintyMatrix, certainty
from .errors import ClustcertError, IngestionError, ValidationError
from .evaluation import DatasetContext, contingency, evaluate, tune_exponent
from .fanny import fanny
from .partition import hierarchical, kmeans, pam, save_partition
from .reproduce import TABLES, report_csv, reproduce_table
from .simulate import DESIGNS, Scenario, load_scenario, run_replications, save_scenario

HIST_BINS = 20
LINKAGES = ("average", "complete", "single", "ward")


def _u64(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _add_input(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", type=Path, help="feature CSV (optional 'group' and 'hybrid' columns)")
    src.add_argument("--matrix", type=Path, help="dissimilarity matrix file ('n=N' header)")
    src.add_argument("--iris", action="store_true", help="use the bundled iris data")
    p.add_argument("--dissimilarity", choices=sorted(dissim.METRICS),
                   help="default: chord for --iris, smd for binary data, else euclidean")
    p.add_argument("--clusters", type=int, help="number of clusters (default: number of true groups)")
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--out", type=Path, required=True)


def _add_exponent(p, tune_sd=True):
    ex = p.add_mutually_exclusive_group()
    ex.add_argument("--exponent", type=float, default=None, help="l or v (default 1)")
    if tune_sd:
        ex.add_argument("--tune-sd", type=float, help="tune to this sd of the hybrid's certainty")
    ex.add_argument("--tune-rsm", type=float, help="tune to this soft-misclassification rate (fraction)")
    if not tune_sd:
        ex.add_argument("--tune-rpd", type=float, help="tune to this partition-disagreement rate (fraction)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clustcert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"clustcert {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certainty", help="cluster one dataset and score membership certainty")
    _add_input(p)
    p.add_argument("--cluster", choices=("pam", "hier", "kmeans"), default="hier")
    p.add_argument("--linkage", choices=LINKAGES, default="ward")
    p.add_argument("--measure", choices=("sil", "dis", "fanny"), default="sil")
    _add_exponent(p, tune_sd=False)
    p.add_argument("--r", type=float, default=2.0, help="FANNY membership exponent")
    p.add_argument("--restarts", type=int, default=10, help="k-means restarts")
    p.add_argument("--quantile", type=float, default=0.05, help="ambiguity threshold quantile")

    p = sub.add_parser("fanny", help="fuzzy clustering of one dataset")
    _add_input(p)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=500)

    p = sub.add_parser("simulate", help="run a replicated simulation scenario")
    p.add_argument("--config", type=Path, help="scenario file of 'key = value' lines")
    p.add_argument("--design", choices=sorted(DESIGNS))
    p.add_argument("--dissimilarity", choices=sorted(dissim.METRICS))
    p.add_argument("--cluster", choices=("pam", "hier", "kmeans", "fanny"))
    p.add_argument("--linkage", choices=LINKAGES)
    p.add_argument("--measure", choices=("sil", "dis", "fanny"))
    _add_exponent(p)
    p.add_argument("--r", type=float, help="FANNY membership exponent")
    p.add_argument("--replicates", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=_u64)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("reproduce", help="re-derive a published simulation table")
    p.add_argument("table", help=f"one of {', '.join(TABLES)}")
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--seed", type=_u64, default=1)
    p.add_argument("--linkage", choices=LINKAGES, default="average")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("hist", help="20-bin histogram over [0, 1] of a CSV column")
    p.add_argument("input", type=Path)
    p.add_argument("--column", default=None, help="default: p_h1, else assigned certainty")
    p.add_argument("--out", type=Path, help="output CSV (default: stdout)")

    p = sub.add_parser("rerun", help="replay a manifest into a new output directory")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, required=True)
    return parser


# --- helpers ------------------------------------------------------------------


def _load_input(args):
    """Return (dataset or None, matrix)."""
    if args.matrix is not None:
        if args.dissimilarity is not None:
            raise ValidationError("--dissimilarity does not apply to a matrix input")
        return None, dissim.load_matrix(args.matrix)
    data = dissim.iris() if args.iris else dissim.load_dataset(args.data)
    metric = args.dissimilarity
    if metric is None:
        metric = "chord" if args.iris else ("smd" if data.kind == "binary" else "euclidean")
    args.dissimilarity = metric
    return data, dissim.compute(data, metric)


def _cluster_count(args, data, n):
    c = args.clusters
    if c is None:
        if data is None or data.groups is None:
            raise ValidationError("--clusters is required when the input has no group column")
        c = data.n_groups
    if not 1 <= c <= n:
        raise ValidationError(f"--clusters must lie in 1..{n}, got {c}")
    return c


def _groups(data):
    return None if data is None else data.groups


def _exclude(data):
    if data is None or data.hybrid_index is None:
        return None
    return [data.hybrid_index]


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_confusion(path, z, g):
    table = contingency(z, g)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster"] + [f"group_{k}" for k in range(1, table.shape[1] + 1)])
        for k, row in enumerate(table, start=1):
            w.writerow([k] + row.tolist())


def _write_pca(path, data, z, misclassified):
    scores = dissim.pca_scores(data, 2)
    bad = set(misclassified)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["individual", "pc1", "pc2", "assigned"]
        if data.groups is not None:
            header += ["group", "misclassified"]
        w.writerow(header)
        for i, (a, b) in enumerate(scores):
            row = [i + 1, f"{a:.10f}", f"{b:.10f}", int(z[i])]
            if data.groups is not None:
                row += [int(data.groups[i]), int(i in bad)]
            w.writerow(row)


def _write_ambiguous(path, cm, z, q):
    assigned = cm.assigned(z)
    labels = np.asarray(getattr(z, "z", z))
    threshold = float(np.quantile(assigned, q))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["individual", "assigned", "certainty", "threshold"])
        for i in np.flatnonzero(assigned < threshold):
            w.writerow([i + 1, int(labels[i]), f"{assigned[i]:.10f}", f"{threshold:.10f}"])
    return threshold


def _partition(args, data, m, c):
    if args.cluster == "pam":
        return pam(m, c)
    if args.cluster == "hier":
        return hierarchical(m, c, args.linkage)
    if data is None:
        raise ValidationError("k-means needs feature data, not a dissimilarity matrix")
    return kmeans(data, c, seed=args.seed, restarts=args.restarts)


# --- subcommands ----------------------------------------------------------------


def cmd_certainty(args) -> dict:
    if not 0 < args.quantile < 0.5:
        raise ValidationError(f"--quantile must lie in (0, 0.5), got {args.quantile}")
    data, m = _load_input(args)
    c = _cluster_count(args, data, m.n)
    g, exclude = _groups(data), _exclude(data)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    tuning = None
    if args.measure == "fanny":
        if args.tune_rsm is not None or args.tune_rpd is not None:
            raise ValidationError("FANNY's exponent is not tuned")
        res = fanny(m, c, args.r, seed=args.seed)
        # raw argmax labels keep the membership column order
        z = res.hard_labels()
        cm = res.certainty()
    else:
        z = _partition(args, data, m, c)
        exponent = 1.0 if args.exponent is None else args.exponent
        if args.tune_rsm is not None or args.tune_rpd is not None:
            if args.tune_rsm is not None and g is None:
                raise ValidationError("--tune-rsm needs true groups in the input")
            ctx = DatasetContext(m, z, g if args.tune_rsm is not None else None, exclude)
            objective = "target_r_sm" if args.tune_rsm is not None else "target_r_pd"
            target = args.tune_rsm if args.tune_rsm is not None else args.tune_rpd
            tuning = tune_exponent(objective, target, args.measure, ctx)
            exponent = tuning.exponent
        cm = certainty(m, z, args.measure, exponent)

    save_partition(z, out / "partition.csv")
    cm.to_csv(out / "certainty.csv", z)
    labels = np.asarray(getattr(z, "z", z))
    scorable = g is not None and c == data.n_groups and np.unique(labels).size == c
    report = evaluate(cm, labels, g if scorable else None, exclude)
    threshold = _write_ambiguous(out / "ambiguous.csv", cm, z, args.quantile)
    doc = report.to_dict()
    doc.update(n=int(m.n), clusters=int(c), dissimilarity=args.dissimilarity,
               quantile=args.quantile, ambiguity_threshold=threshold)
    if tuning is not None:
        doc["tuning"] = asdict(tuning)
    _write_json(out / "report.json", doc)
    if g is not None:
        _write_confusion(out / "confusion.csv", labels, g)
    if data is not None:
        _write_pca(out / "pca.csv", data, labels, report.misclassified)
    return doc


def cmd_fanny(args) -> dict:
    data, m = _load_input(args)
    c = _cluster_count(args, data, m.n)
    res = fanny(m, c, args.r, seed=args.seed, tol=args.tol, max_iter=args.max_iter)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    labels = res.hard_labels()
    cm: CertaintyMatrix = res.certainty()
    cm.to_csv(out / "memberships.csv", labels)
    save_partition(labels, out / "partition.csv")
    g = _groups(data)
    doc = {
        "objective": res.objective,
        "iterations": res.iterations,
        "converged": res.converged,
        "r": res.r,
        "clusters": int(c),
        "nonempty_clusters": int(np.unique(labels).size),
    }
    report = evaluate(cm, labels, None, _exclude(data))
    doc["r_pd"] = report.r_pd
    if g is not None and np.unique(labels).size == c:
        doc.update({k: v for k, v in evaluate(cm, labels, g, _exclude(data)).to_dict().items()
                    if k in ("r_sm", "mapping", "misclassified")})
    _write_json(out / "report.json", doc)
    return doc


def _scenario(args) -> Scenario:
    base = load_scenario(args.config) if args.config else Scenario()
    changes = {}
    for flag, key in [("design", "design"), ("dissimilarity", "dissimilarity"), ("cluster", "clustering"),
                      ("linkage", "linkage"), ("measure", "measure"), ("exponent", "exponent"),
                      ("replicates", "replicates"), ("restarts", "restarts"), ("seed", "seed"),
                      ("r", "fanny_r")]:
        val = getattr(args, flag)
        if val is not None:
            changes[key] = val
    if changes.get("measure") == "fanny" and "clustering" not in changes:
        changes["clustering"] = "fanny"
    if changes.get("clustering") == "fanny" and "measure" not in changes:
        changes["measure"] = "fanny"
    if args.tune_sd is not None:
        changes.update(tune_sd=args.tune_sd, tune_rsm=None)
    if args.tune_rsm is not None:
        changes.update(tune_rsm=args.tune_rsm, tune_sd=None)
    return base.replace(**changes)


def cmd_simulate(args) -> dict:
    scenario = _scenario(args)
    if scenario.replicates < 1:
        raise ValidationError("--replicates must be at least 1")
    summary = run_replications(scenario, workers=max(1, args.workers))
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    save_scenario(scenario, out / "scenario.txt")
    summary.write_dump(out / "replicates.csv")
    doc = summary.to_dict()
    _write_json(out / "summary.json", doc)
    return doc


def cmd_reproduce(args) -> dict:
    if args.table not in TABLES:
        raise ValidationError(f"unknown table id {args.table!r}; choose from {', '.join(TABLES)}")
    lines = reproduce_table(args.table, args.replicates, args.seed, max(1, args.workers), args.linkage)
    args.out.mkdir(parents=True, exist_ok=True)
    text = report_csv(lines)
    (args.out / f"{args.table}.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    checked = [ln for ln in lines if ln.within is not None]
    return {"checked": len(checked), "within": sum(ln.within for ln in checked)}


def read_column(path: Path, column: str | None) -> np.ndarray:
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise IngestionError(str(exc), path) from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError("empty file", path, 1) from None
        if column is None:
            column = "p_h1" if "p_h1" in header else "assigned_certainty"
        if column == "assigned_certainty" and "assigned" in header and "cluster_1" in header:
            pick = None
        elif column in header:
            pick = header.index(column)
        else:
            raise IngestionError(f"no column {column!r} in header {header}", path, 1)
        values = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if pick is None:
                    k = int(row[header.index("assigned")])
                    values.append(float(row[header.index(f"cluster_{k}")]))
                else:
                    values.append(float(row[pick]))
            except (ValueError, IndexError) as exc:
                raise IngestionError(f"bad value: {exc}", path, lineno) from None
    return np.array(values)


def histogram(values) -> np.ndarray:
    """Counts in 20 equal bins over [0, 1]; the last bin includes 1."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValidationError("no values to bin")
    if np.any(~np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
        raise ValidationError("histogram values must lie in [0, 1]")
    counts, _ = np.histogram(v, bins=HIST_BINS, range=(0.0, 1.0))
    return counts


def cmd_hist(args) -> dict:
    counts = histogram(read_column(args.input, args.column))
    lines = ["bin_lo,bin_hi,count"]
    for b, n in enumerate(counts):
        lines.append(f"{b / HIST_BINS:.2f},{(b + 1) / HIST_BINS:.2f},{int(n)}")
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")
    return {"counts": counts.tolist()}


COMMANDS = {
    "certainty": cmd_certainty,
    "fanny": cmd_fanny,
    "simulate": cmd_simulate,
    "reproduce": cmd_reproduce,
    "hist": cmd_hist,
}


def _config(args) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())}


def _replace_out(argv, out):
    argv = list(argv)
    for i, tok in enumerate(argv):
        if tok == "--out" and i + 1 < len(argv):
            argv[i + 1] = str(out)
            return argv
        if tok.startswith("--out="):
            argv[i] = f"--out={out}"
            return argv
    return argv + ["--out", str(out)]


def _load_manifest(path: Path) -> dict:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestionError(str(exc), path) from exc
    except json.JSONDecodeError as exc:
        raise IngestionError(exc.msg, path, exc.lineno) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("argv"), list):
        raise IngestionError("manifest lacks an 'argv' list", path)
    return doc


def run(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "rerun":
        doc = _load_manifest(args.manifest)
        return run(_replace_out(doc["argv"], args.out))
    COMMANDS[args.command](args)
    out_dir = args.out if args.command != "hist" else None
    if out_dir is not None:
        _write_json(out_dir / "manifest.json", {
            "tool": "clustcert",
            "version": __version__,
            "command": args.command,
            "argv": list(argv),
            "config": _config(args),
            "seed": getattr(args, "seed", None),
        })
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return run(argv)
    except ClustcertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
