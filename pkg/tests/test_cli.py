import csv
import subprocess
import sys

import numpy as np
import pytest

from faircrowd import csvio
from faircrowd.cli import main
from faircrowd.dataset import SyntheticConfig, generate_synthetic, save_csv
from faircrowd.postprocess import preprocess_posteriors


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def three_votes(tmp_path):
    v = tmp_path / "votes.csv"
    v.write_text("task_id,annotator_id,label\nt1,r1,1\nt1,r2,1\nt1,r3,0\n")
    g = tmp_path / "groups.csv"
    g.write_text("task_id,a\nt1,1\n")
    return str(v), str(g)


@pytest.fixture
def synthetic(tmp_path):
    m, g, _ = generate_synthetic(SyntheticConfig(300, 20, 5, p_a1=0.6, p_y1_given_a=(0.4, 0.6), seed=7))
    paths = [str(tmp_path / x) for x in ("v.csv", "g.csv", "y.csv")]
    save_csv(m, g, *paths)
    return paths


def test_aggregate_mv_three_votes(tmp_path, three_votes, capsys):
    out = tmp_path / "post.csv"
    assert main(["aggregate", "--votes", three_votes[0], "--groups", three_votes[1], "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0]["task_id"] == "t1" and float(rows[0]["phi1"]) == pytest.approx(2 / 3, abs=1e-15)
    # a single group has no parity gap, so no report
    assert "no fairness report" in capsys.readouterr().err
    assert not (tmp_path / "post.csv.report.csv").exists()


def test_aggregate_writes_report(tmp_path, synthetic):
    out = aggregate(tmp_path, synthetic, "ds")
    report = read_csv(str(out) + ".report.csv")
    assert report[0]["method"] == "ds" and 0 <= float(report[0]["dp_gap"]) <= 1
    assert 0 <= float(report[0]["f1"]) <= 1


def test_bayes_without_truth_is_usage_error(three_votes):
    with pytest.raises(SystemExit) as exc:
        main(["aggregate", "--votes", three_votes[0], "--groups", three_votes[1], "--method", "bayes"])
    assert exc.value.code == 2


def test_console_script_exit_code(three_votes):
    r = subprocess.run(
        [sys.executable, "-m", "faircrowd.cli", "aggregate", "--votes", three_votes[0], "--groups", three_votes[1],
         "--method", "bayes"],
        capture_output=True, text=True,
    )
    assert r.returncode == 2 and "truth" in r.stderr


def test_bad_input_exits_one(tmp_path, three_votes):
    bad = tmp_path / "bad.csv"
    bad.write_text("task_id,annotator_id,label\nt1,r1,7\n")
    assert main(["aggregate", "--votes", str(bad), "--groups", three_votes[1]]) == 1


def test_seed_and_out_before_or_after_subcommand(tmp_path, synthetic):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    v, g, _ = synthetic
    main(["--seed", "3", "--out", str(a), "post-td", "--labels", str(aggregate(tmp_path, synthetic)), "--groups", g, "--epsilon", "0.01"])
    main(["post-td", "--labels", str(tmp_path / "agg.csv"), "--groups", g, "--epsilon", "0.01", "--seed", "3", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def aggregate(tmp_path, synthetic, method="mv"):
    out = tmp_path / "agg.csv"
    v, g, y = synthetic
    assert main(["aggregate", "--votes", v, "--groups", g, "--truth", y, "--method", method, "--out", str(out)]) == 0
    return out


@pytest.mark.parametrize("method", ["mv", "bayes", "ds"])
def test_fairify_round_trip(tmp_path, synthetic, method):
    post = aggregate(tmp_path, synthetic, method)
    out, clf = tmp_path / "fc.csv", tmp_path / "clf.csv"
    _, g, _ = synthetic
    args = ["fairify", "--posteriors", str(post), "--groups", g, "--epsilon", "0.05", "--out", str(out), "--classifier", str(clf)]
    assert main(args) == 0
    rows = read_csv(out)
    q = np.array([float(r["q"]) for r in rows])
    groups = csvio.read_groups(g)
    a = np.array([groups[r["task_id"]] for r in rows])
    assert abs(q[a == 1].mean() - q[a == 0].mean()) <= 0.05 + 2 / min(np.sum(a == 0), np.sum(a == 1))
    rc = csvio.read_classifier(clf)
    _, p = csvio.read_posteriors(post)
    assert np.array_equal(rc.predict_proba(preprocess_posteriors(p, rc.alpha).phi1, a), q)


def test_classifier_csv_round_trip(tmp_path, synthetic):
    post = aggregate(tmp_path, synthetic)
    clf = tmp_path / "clf.csv"
    main(["fairify", "--posteriors", str(post), "--groups", synthetic[1], "--epsilon", "0.01", "--classifier", str(clf),
          "--out", str(tmp_path / "x.csv")])
    rc = csvio.read_classifier(clf)
    clf2 = tmp_path / "clf2.csv"
    csvio.write_classifier(str(clf2), rc)
    assert clf.read_bytes() == clf2.read_bytes()


def test_post_td_output(tmp_path, synthetic):
    post = aggregate(tmp_path, synthetic)
    out = tmp_path / "td.csv"
    assert main(["post-td", "--labels", str(post), "--groups", synthetic[1], "--epsilon", "0.02", "--out", str(out)]) == 0
    rows = read_csv(out)
    groups = csvio.read_groups(synthetic[1])
    lab = np.array([int(r["label"]) for r in rows])
    a = np.array([groups[r["task_id"]] for r in rows])
    assert abs(lab[a == 1].mean() - lab[a == 0].mean()) <= 0.02 + 1 / min(np.sum(a == 0), np.sum(a == 1))


def test_missing_group_is_usage_error(tmp_path, synthetic):
    post = aggregate(tmp_path, synthetic)
    g = tmp_path / "partial.csv"
    g.write_text("task_id,a\nt0,1\n")
    with pytest.raises(SystemExit) as exc:
        main(["post-td", "--labels", str(post), "--groups", str(g), "--epsilon", "0.1"])
    assert exc.value.code == 2


def test_verify_theory(tmp_path):
    out = tmp_path / "theory.csv"
    assert main(["verify-theory", "--n-tasks", "1000", "--n-random", "30", "--out", str(out)]) == 0
    rows = {r["check_name"]: r for r in read_csv(out)}
    assert list(read_csv(out)[0].keys()) == ["check_name", "lhs", "rhs", "holds"]
    assert 0.4687 <= float(rows["baillon_eta_near_0.4688"]["lhs"]) <= 0.4689
    assert float(rows["two_cell_population_gap_0.3"]["lhs"]) == pytest.approx(0.3, abs=1e-12)
    assert all(r["holds"] == "true" for r in rows.values())


def test_convergence_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["convergence", "--scenario", "competent", "--R", "3,5", "--n-tasks", "300", "--mc-reps", "2", "--seed", "4"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = read_csv(a)
    assert {r["aggregator"] for r in rows} == {"mv", "bayes", "ds"}
    assert {r["R"] for r in rows} == {"3", "5"}


def test_tradeoff_synthetic(tmp_path):
    out = tmp_path / "t.csv"
    args = ["tradeoff", "--synthetic-tasks", "400", "--epsilons", "0.05,0.2", "--methods", "mv", "--resamples", "2",
            "--seed", "1", "--out", str(out)]
    assert main(args) == 0
    rows = read_csv(out)
    assert {(r["fairifier"], r["epsilon"]) for r in rows} == {(f, e) for f in ("fc", "post_td") for e in ("0.05", "0.2")}
    out2 = tmp_path / "t2.csv"
    main(args[:-1] + [str(out2)])
    assert out.read_bytes() == out2.read_bytes()


def test_tradeoff_partial_files_rejected(synthetic):
    with pytest.raises(SystemExit) as exc:
        main(["tradeoff", "--votes", synthetic[0]])
    assert exc.value.code == 2


def test_bad_method_list():
    with pytest.raises(SystemExit) as exc:
        main(["tradeoff", "--methods", "mv,svm"])
    assert exc.value.code == 2
