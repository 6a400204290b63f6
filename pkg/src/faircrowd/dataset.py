"""In-memory crowd data, CSV loaders and the synthetic crowd generator."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


def _frozen(arr, dtype) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class LabelMatrix:
    """Sparse task x annotator matrix of binary votes.

    Votes are stored in coordinate form: ``task[i]`` received label
    ``label[i]`` from ``annotator[i]``.
    """

    n_tasks: int
    n_annotators: int
    task: np.ndarray
    annotator: np.ndarray
    label: np.ndarray
    task_ids: Optional[tuple] = None
    annotator_ids: Optional[tuple] = None

    def __post_init__(self):
        task = _frozen(self.task, np.int64)
        annotator = _frozen(self.annotator, np.int64)
        label = _frozen(self.label, np.int8)
        object.__setattr__(self, "task", task)
        object.__setattr__(self, "annotator", annotator)
        object.__setattr__(self, "label", label)
        if not (task.shape == annotator.shape == label.shape) or task.ndim != 1:
            raise ValueError("task, annotator and label must be 1-d arrays of equal length")
        if task.size and (task.min() < 0 or task.max() >= self.n_tasks):
            raise ValueError("task index out of bounds")
        if annotator.size and (annotator.min() < 0 or annotator.max() >= self.n_annotators):
            raise ValueError("annotator index out of bounds")
        if np.any((label != 0) & (label != 1)):
            raise ValueError("labels must be 0 or 1")
        key = task * self.n_annotators + annotator
        uniq, counts = np.unique(key, return_counts=True)
        if np.any(counts > 1):
            k = uniq[np.argmax(counts > 1)]
            t, r = divmod(int(k), self.n_annotators)
            raise ValueError(f"duplicate vote for task {self._task_name(t)}, annotator {self._ann_name(r)}")
        if np.any(self.votes_per_task() == 0):
            t = int(np.argmin(self.votes_per_task()))
            raise ValueError(f"task {self._task_name(t)} has no votes")

    def _task_name(self, t):
        return self.task_ids[t] if self.task_ids is not None else t

    def _ann_name(self, r):
        return self.annotator_ids[r] if self.annotator_ids is not None else r

    @property
    def n_votes(self) -> int:
        return int(self.label.size)

    def votes_per_task(self) -> np.ndarray:
        return np.bincount(self.task, minlength=self.n_tasks)

    def ones_per_task(self) -> np.ndarray:
        return np.bincount(self.task, weights=self.label, minlength=self.n_tasks)

    def dense(self) -> np.ndarray:
        """Return an ``(n_tasks, n_annotators)`` int8 array, -1 where missing."""
        out = np.full((self.n_tasks, self.n_annotators), -1, dtype=np.int8)
        out[self.task, self.annotator] = self.label
        return out

    @classmethod
    def from_dense(cls, votes, **kwargs) -> "LabelMatrix":
        """Build from a dense array where negative entries mean "no vote"."""
        votes = np.asarray(votes)
        t, r = np.nonzero(votes >= 0)
        return cls(votes.shape[0], votes.shape[1], t, r, votes[t, r], **kwargs)


@dataclass(frozen=True)
class GroupAssignment:
    """Per-task sensitive attribute and, optionally, ground truth."""

    group: np.ndarray
    truth: Optional[np.ndarray] = None
    task_ids: Optional[tuple] = None

    def __post_init__(self):
        group = _frozen(self.group, np.int8)
        object.__setattr__(self, "group", group)
        if np.any((group != 0) & (group != 1)):
            raise ValueError("group values must be 0 or 1")
        if self.truth is not None:
            truth = _frozen(self.truth, np.int8)
            if truth.shape != group.shape:
                raise ValueError("truth and group lengths differ")
            if np.any((truth != 0) & (truth != 1)):
                raise ValueError("truth values must be 0 or 1")
            object.__setattr__(self, "truth", truth)

    @property
    def n_tasks(self) -> int:
        return int(self.group.size)

    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.group, minlength=2)

    def require_both_groups(self):
        sizes = self.group_sizes()
        if sizes[0] == 0 or sizes[1] == 0:
            raise ValueError(f"both groups must be non-empty (sizes {sizes[0]}, {sizes[1]})")

    def require_truth(self):
        if self.truth is None:
            raise ValueError("ground truth is required")


@dataclass(frozen=True)
class SkillProfile:
    """Per-annotator, per-group one-coin skills, shape ``(n_annotators, 2)``."""

    skills: np.ndarray

    def __post_init__(self):
        skills = _frozen(self.skills, np.float64)
        if skills.ndim != 2 or skills.shape[1] != 2:
            raise ValueError("skills must have shape (n_annotators, 2)")
        if np.any((skills < 0) | (skills > 1)):
            raise ValueError("skills must lie in [0, 1]")
        object.__setattr__(self, "skills", skills)


@dataclass(frozen=True)
class SyntheticConfig:
    n_tasks: int
    pool_size: int
    votes_per_task: int
    p_a1: float = 0.5
    p_y1_given_a: Sequence[float] = (0.5, 0.5)
    skill_law: Sequence[Sequence[float]] = ((0.5, 1.0), (0.6, 1.0))
    seed: int = 0

    def __post_init__(self):
        if self.n_tasks < 1 or self.pool_size < 1:
            raise ValueError("n_tasks and pool_size must be positive")
        if not 1 <= self.votes_per_task <= self.pool_size:
            raise ValueError(
                f"votes_per_task={self.votes_per_task} must be in [1, pool_size={self.pool_size}]"
            )
        probs = [self.p_a1, *self.p_y1_given_a]
        if len(self.p_y1_given_a) != 2 or any(not 0 <= p <= 1 for p in probs):
            raise ValueError("probabilities must lie in [0, 1]")
        if len(self.skill_law) != 2:
            raise ValueError("skill_law needs one interval per group")
        for lo, hi in self.skill_law:
            if not 0 <= lo <= hi <= 1:
                raise ValueError(f"invalid skill interval [{lo}, {hi}]")


# Stream layout: (0,) draws the skill pool, (1, t) drives task t.
_SKILL_STREAM = 0
_TASK_STREAM = 1


def task_rng(seed: int, t: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_TASK_STREAM, t)))


def generate_synthetic(cfg: SyntheticConfig):
    """Sample a crowd following the one-coin, group-conditional protocol.

    Each annotator gets an independent skill per group drawn from
    ``U(skill_law[a])``. Task ``t`` uses its own substream, so growing
    ``n_tasks`` leaves the draws of earlier tasks untouched.

    Returns ``(LabelMatrix, GroupAssignment, SkillProfile)``.
    """
    R, v, n = cfg.pool_size, cfg.votes_per_task, cfg.n_tasks
    skill_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_SKILL_STREAM,)))
    u = skill_rng.random((R, 2))
    lo = np.array([cfg.skill_law[0][0], cfg.skill_law[1][0]])
    hi = np.array([cfg.skill_law[0][1], cfg.skill_law[1][1]])
    skills = lo + (hi - lo) * u

    group = np.empty(n, dtype=np.int8)
    truth = np.empty(n, dtype=np.int8)
    tasks = np.repeat(np.arange(n), v)
    annotators = np.empty(n * v, dtype=np.int64)
    correct_u = np.empty(n * v)
    everyone = np.arange(R)
    p_y1 = np.asarray(cfg.p_y1_given_a, dtype=float)
    for t in range(n):
        rng = task_rng(cfg.seed, t)
        ua, uy = rng.random(2)
        a = int(ua < cfg.p_a1)
        group[t] = a
        truth[t] = uy < p_y1[a]
        sl = slice(t * v, (t + 1) * v)
        annotators[sl] = everyone if v == R else rng.choice(R, size=v, replace=False)
        correct_u[sl] = rng.random(v)

    a_vote = group[tasks]
    correct = correct_u < skills[annotators, a_vote]
    labels = np.where(correct, truth[tasks], 1 - truth[tasks])
    m = LabelMatrix(n, R, tasks, annotators, labels)
    return m, GroupAssignment(group, truth), SkillProfile(skills)


def train_test_split(data, test_fraction: float, seed: int):
    """Uniform random split of task indices; returns ``(train, test)``.

    ``data`` is a task count or anything with an ``n_tasks`` attribute.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    n = int(getattr(data, "n_tasks", data))
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(round(test_fraction * n))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def _read_rows(path, header):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            got = [c.strip() for c in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if got != list(header):
            raise ValueError(f"{path}: expected header {','.join(header)}, got {','.join(got)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields")
            yield lineno, [c.strip() for c in row]


def _binary(value, path, lineno, name):
    if value not in ("0", "1"):
        raise ValueError(f"{path}:{lineno}: {name} must be 0 or 1, got {value!r}")
    return int(value)


def load_csv(votes_path, groups_path, truth_path=None):
    """Load ``votes``/``groups``/``truth`` CSV files.

    String ids are mapped to contiguous indices in order of first appearance
    in the votes file.
    """
    task_index: dict = {}
    ann_index: dict = {}
    seen = set()
    tasks, anns, labels = [], [], []
    for lineno, (tid, rid, lab) in _read_rows(votes_path, ("task_id", "annotator_id", "label")):
        y = _binary(lab, votes_path, lineno, "label")
        if (tid, rid) in seen:
            raise ValueError(f"{votes_path}:{lineno}: duplicate vote for task {tid}, annotator {rid}")
        seen.add((tid, rid))
        tasks.append(task_index.setdefault(tid, len(task_index)))
        anns.append(ann_index.setdefault(rid, len(ann_index)))
        labels.append(y)

    group = np.full(len(task_index), -1, dtype=np.int8)
    extra = 0
    for lineno, (tid, a) in _read_rows(groups_path, ("task_id", "a")):
        val = _binary(a, groups_path, lineno, "a")
        if tid not in task_index:
            extra += 1
            continue
        group[task_index[tid]] = val
    if extra:
        warnings.warn(f"{groups_path}: {extra} task(s) without votes ignored", stacklevel=2)
    missing = np.flatnonzero(group < 0)
    task_ids = tuple(task_index)
    if missing.size:
        raise ValueError(f"task {task_ids[missing[0]]} has votes but no group in {groups_path}")

    truth = None
    if truth_path is not None:
        truth = np.full(len(task_index), -1, dtype=np.int8)
        for lineno, (tid, y) in _read_rows(truth_path, ("task_id", "y")):
            val = _binary(y, truth_path, lineno, "y")
            if tid in task_index:
                truth[task_index[tid]] = val
        missing = np.flatnonzero(truth < 0)
        if missing.size:
            raise ValueError(f"task {task_ids[missing[0]]} missing from {truth_path}")

    m = LabelMatrix(
        len(task_index), len(ann_index), tasks, anns, labels,
        task_ids=task_ids, annotator_ids=tuple(ann_index),
    )
    return m, GroupAssignment(group, truth, task_ids=task_ids)


def task_names(m: LabelMatrix):
    return m.task_ids if m.task_ids is not None else tuple(f"t{t}" for t in range(m.n_tasks))


def save_csv(m: LabelMatrix, g: GroupAssignment, votes_path, groups_path, truth_path=None):
    """Inverse of :func:`load_csv`.

    Votes are written in stored order, so data that came from
    :func:`load_csv` reloads to identical index arrays.
    """
    tids = task_names(m)
    rids = m.annotator_ids if m.annotator_ids is not None else tuple(f"r{r}" for r in range(m.n_annotators))
    order = range(m.n_votes)
    with open(votes_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["task_id", "annotator_id", "label"])
        for i in order:
            w.writerow([tids[m.task[i]], rids[m.annotator[i]], int(m.label[i])])
    with open(groups_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["task_id", "a"])
        for t in range(m.n_tasks):
            w.writerow([tids[t], int(g.group[t])])
    if truth_path is not None:
        g.require_truth()
        with open(truth_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["task_id", "y"])
            for t in range(m.n_tasks):
                w.writerow([tids[t], int(g.truth[t])])


def subset_tasks(m: LabelMatrix, g: GroupAssignment, tasks):
    """Restrict votes and groups to ``tasks``, re-indexed in the given order.

    Annotator indices are kept so confusion tables stay aligned with the
    full crowd.
    """
    tasks = np.asarray(tasks, dtype=np.int64)
    new_index = np.full(m.n_tasks, -1, dtype=np.int64)
    new_index[tasks] = np.arange(tasks.size)
    keep = new_index[m.task] >= 0
    sub_m = LabelMatrix(
        tasks.size,
        m.n_annotators,
        new_index[m.task[keep]],
        m.annotator[keep],
        m.label[keep],
        task_ids=None if m.task_ids is None else tuple(m.task_ids[t] for t in tasks),
        annotator_ids=m.annotator_ids,
    )
    truth = None if g.truth is None else g.truth[tasks]
    return sub_m, GroupAssignment(g.group[tasks], truth)
