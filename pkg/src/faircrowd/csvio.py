"""CSV exports for posteriors, predictions, classifiers and result tables."""

import csv
import sys
from contextlib import contextmanager

import numpy as np

from .aggregate import PosteriorTable, harden
from .postprocess import RandomizedClassifier


def fmt(x):
    """Shortest round-tripping text for numbers; empty for None."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


@contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def write_rows(path, rows, columns=None):
    """Write dict rows with a header; ``path`` of ``-`` means stdout."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in columns])


def read_rows(path, required):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        return [{k: (v.strip() if isinstance(v, str) else v) for k, v in row.items()} for row in reader]


def write_posteriors(path, p: PosteriorTable, task_ids):
    labels = harden(p)
    write_rows(
        path,
        ({"task_id": t, "phi1": float(x), "label": int(y), "source": p.source} for t, x, y in zip(task_ids, p.phi1, labels)),
        ["task_id", "phi1", "label", "source"],
    )


def read_posteriors(path):
    """Returns ``(task_ids, PosteriorTable)`` in file order."""
    rows = read_rows(path, ["task_id", "phi1"])
    ids = [r["task_id"] for r in rows]
    source = (rows[0].get("source") or "MV") if rows else "MV"
    return ids, PosteriorTable(np.array([float(r["phi1"]) for r in rows]), source)


def write_predictions(path, task_ids, q, labels):
    write_rows(
        path,
        ({"task_id": t, "q": float(a), "label": int(b)} for t, a, b in zip(task_ids, q, labels)),
        ["task_id", "q", "label"],
    )


def read_labels(path):
    """``(task_ids, labels)`` from any CSV with ``task_id`` and ``label`` columns."""
    rows = read_rows(path, ["task_id", "label"])
    return [r["task_id"] for r in rows], np.array([int(r["label"]) for r in rows], dtype=np.int8)


def read_groups(path):
    """Mapping task_id -> a from a ``task_id,a`` file."""
    rows = read_rows(path, ["task_id", "a"])
    out = {}
    for r in rows:
        if r["a"] not in ("0", "1"):
            raise ValueError(f"{path}: group value {r['a']!r} for task {r['task_id']} is not 0 or 1")
        out[r["task_id"]] = int(r["a"])
    return out


CLASSIFIER_COLUMNS = ["a", "tau", "omega", "pi_hat", "beta_star", "delta", "alpha"]


def write_classifier(path, rc: RandomizedClassifier):
    write_rows(
        path,
        (
            {
                "a": a,
                "tau": rc.tau[a],
                "omega": rc.omega[a],
                "pi_hat": rc.pi_hat[a],
                "beta_star": rc.beta_star,
                "delta": rc.delta,
                "alpha": rc.alpha,
            }
            for a in (0, 1)
        ),
        CLASSIFIER_COLUMNS,
    )


def read_classifier(path) -> RandomizedClassifier:
    rows = sorted(read_rows(path, CLASSIFIER_COLUMNS), key=lambda r: int(r["a"]))
    if [int(r["a"]) for r in rows] != [0, 1]:
        raise ValueError(f"{path}: expected one row per group 0 and 1")
    alpha = rows[0]["alpha"]
    return RandomizedClassifier(
        beta_star=float(rows[0]["beta_star"]),
        tau=[float(r["tau"]) for r in rows],
        omega=[float(r["omega"]) for r in rows],
        delta=float(rows[0]["delta"]),
        pi_hat=[float(r["pi_hat"]) for r in rows],
        alpha=float(alpha) if alpha not in ("", None) else None,
    )


REPORT_COLUMNS = ["method", "epsilon", "dp_gap", "f1", "accuracy", "seed"]


def report_row(method, epsilon, report, seed):
    return {
        "method": method,
        "epsilon": epsilon,
        "dp_gap": report.dp_gap,
        "f1": report.f1,
        "accuracy": report.accuracy,
        "seed": seed,
    }
