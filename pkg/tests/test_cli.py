import csv
import json

import numpy as np
import pytest

from clustcert import dissimilarity as D
from clustcert.cli import histogram, main


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def iris_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("iris")
    assert main(["certainty", "--iris", "--linkage", "ward", "--tune-rsm", "0.10", "--out", str(out)]) == 0
    return out


def test_iris_outputs_exist(iris_run):
    for name in ("partition.csv", "certainty.csv", "report.json", "ambiguous.csv",
                 "confusion.csv", "pca.csv", "manifest.json"):
        assert (iris_run / name).is_file()


def test_iris_confusion_table(iris_run):
    rows = read_csv(iris_run / "confusion.csv")
    table = [[int(r[f"group_{k}"]) for k in (1, 2, 3)] for r in rows]
    assert table == [[50, 0, 0], [0, 49, 7], [0, 1, 43]]


def test_iris_report(iris_run):
    doc = json.loads((iris_run / "report.json").read_text())
    assert doc["misclassified"] == [84, 111, 126, 128, 130, 132, 134, 139]
    assert doc["r_sm"] == pytest.approx(0.10, abs=1e-3)
    assert doc["tuning"]["attained"]
    assert doc["ambiguity_threshold"] == pytest.approx(0.48, abs=0.005)


def test_iris_individual_111(iris_run):
    row = read_csv(iris_run / "certainty.csv")[110]
    p = [float(row[f"cluster_{k}"]) for k in (1, 2, 3)]
    assert p == pytest.approx([0.01, 0.33, 0.66], abs=0.01)
    assert row["assigned"] == "2"
    assert row["argmax"] == "3"


def test_iris_ambiguous_list(iris_run):
    flagged = [int(r["individual"]) for r in read_csv(iris_run / "ambiguous.csv")]
    assert flagged == [71, 73, 111, 126, 128, 130, 134, 139]


def test_iris_pca_marks_misclassified(iris_run):
    rows = read_csv(iris_run / "pca.csv")
    assert sum(int(r["misclassified"]) for r in rows) == 8


def test_rerun_is_byte_identical(iris_run, tmp_path):
    assert main(["rerun", str(iris_run / "manifest.json"), "--out", str(tmp_path)]) == 0
    for name in ("partition.csv", "certainty.csv", "ambiguous.csv", "confusion.csv", "pca.csv"):
        assert (tmp_path / name).read_bytes() == (iris_run / name).read_bytes()


def test_manifest_records_config(iris_run):
    doc = json.loads((iris_run / "manifest.json").read_text())
    assert doc["command"] == "certainty"
    assert doc["config"]["linkage"] == "ward"
    assert doc["seed"] == 0
    assert doc["version"]


def test_single_cluster_is_validation_error(tmp_path, capsys):
    assert main(["certainty", "--iris", "--clusters", "1", "--out", str(tmp_path)]) == 4
    assert "error:" in capsys.readouterr().err


def test_malformed_matrix_is_ingestion_error(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("n=2\n0,1\n1,x\n")
    assert main(["certainty", "--matrix", str(bad), "--clusters", "2", "--out", str(tmp_path / "o")]) == 3
    assert ":3:" in capsys.readouterr().err


def test_matrix_input_with_pam(tmp_path):
    m = D.euclidean(np.array([[0.0], [0.2], [5.0], [5.1], [5.3]]))
    path = tmp_path / "m.txt"
    D.save_matrix(m, path)
    out = tmp_path / "o"
    assert main(["certainty", "--matrix", str(path), "--cluster", "pam", "--clusters", "2",
                 "--measure", "dis", "--out", str(out)]) == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["r_sm"] is None
    assert not (out / "confusion.csv").exists()


def test_kmeans_on_matrix_rejected(tmp_path):
    m = D.euclidean(np.eye(4))
    path = tmp_path / "m.txt"
    D.save_matrix(m, path)
    assert main(["certainty", "--matrix", str(path), "--cluster", "kmeans", "--clusters", "2",
                 "--out", str(tmp_path / "o")]) == 4


def test_quantile_range(tmp_path):
    assert main(["certainty", "--iris", "--quantile", "0.6", "--out", str(tmp_path)]) == 4


def test_fanny_subcommand(tmp_path):
    assert main(["fanny", "--iris", "--dissimilarity", "euclidean", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["converged"]
    rows = read_csv(tmp_path / "memberships.csv")
    assert len(rows) == 150


def test_simulate_and_rerun(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--design", "binary2", "--dissimilarity", "smd", "--cluster", "pam",
                 "--replicates", "25", "--seed", "9", "--out", str(a)]) == 0
    assert main(["rerun", str(a / "manifest.json"), "--out", str(b)]) == 0
    assert (a / "replicates.csv").read_bytes() == (b / "replicates.csv").read_bytes()
    summary = json.loads((a / "summary.json").read_text())
    assert summary["replicates"] == 25


def test_simulate_config_file(tmp_path):
    cfg = tmp_path / "s.txt"
    cfg.write_text("design = continuous3\nmeasure = dis\nreplicates = 5\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert "continuous3" in (tmp_path / "o" / "scenario.txt").read_text()


def test_bad_config_line(tmp_path):
    cfg = tmp_path / "s.txt"
    cfg.write_text("design = continuous3\nthis is wrong\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_histogram_all_half():
    counts = histogram(np.full(40, 0.5))
    assert counts.sum() == 40
    assert counts[10] == 40


def test_histogram_edges():
    counts = histogram([0.0, 1.0])
    assert counts[0] == 1 and counts[-1] == 1


def test_hist_out_of_range(tmp_path):
    path = tmp_path / "v.csv"
    path.write_text("p_h1\n0.5\n1.2\n")
    assert main(["hist", str(path)]) == 4


def test_hist_on_certainty_file(iris_run, tmp_path):
    out = tmp_path / "h.csv"
    assert main(["hist", str(iris_run / "certainty.csv"), "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 20
    assert sum(int(r["count"]) for r in rows) == 150


def test_unknown_table(tmp_path):
    assert main(["reproduce", "t9", "--out", str(tmp_path)]) == 4


def test_reproduce_small_run_flags_intervals(tmp_path, capsys):
    assert main(["reproduce", "t3", "--replicates", "10", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "t3.csv")
    assert rows and all("wide Monte-Carlo interval" in r["note"] for r in rows)
    assert "published" in rows[0]
