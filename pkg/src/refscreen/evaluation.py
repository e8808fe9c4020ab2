"""Evaluation harness: confusion metrics, recall-weighted F-score, work saved
over sampling, deterministic stratified folds, and ranking comparisons.

Rates with an empty denominator return None (an explicit undefined signal)
rather than raising or inventing a zero.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

from . import ranker, store
from .rng import SplitMix64, shuffle

DEFAULT_BETA = 7.0          # recall weighted ~49x over precision
DEFAULT_WSS_RECALL = 0.95


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @staticmethod
    def _rate(num: int, den: int) -> float | None:
        return num / den if den else None

    @property
    def sensitivity(self) -> float | None:
        return self._rate(self.tp, self.tp + self.fn)

    @property
    def specificity(self) -> float | None:
        return self._rate(self.tn, self.tn + self.fp)

    @property
    def precision(self) -> float | None:
        return self._rate(self.tp, self.tp + self.fp)

    @property
    def prevalence(self) -> float | None:
        return self._rate(self.tp + self.fn, self.total)


def confusion(truth: dict[str, bool], predicted: dict[str, bool]) -> ConfusionCounts:
    """Counts over identical key sets; a mismatch is a caller bug."""
    if set(truth) != set(predicted):
        missing = set(truth) ^ set(predicted)
        raise ValueError(f"truth/predicted key mismatch, e.g. {sorted(missing)[:3]}")
    c = ConfusionCounts(0, 0, 0, 0)
    for key, actual in truth.items():
        pred = predicted[key]
        if actual and pred:
            c.tp += 1
        elif actual:
            c.fn += 1
        elif pred:
            c.fp += 1
        else:
            c.tn += 1
    return c


def fbeta(precision: float, recall: float, beta: float = DEFAULT_BETA) -> float | None:
    """(1 + beta^2) P R / (beta^2 P + R); None when P = R = 0."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if not (0.0 <= precision <= 1.0 and 0.0 <= recall <= 1.0):
        raise ValueError("precision and recall must lie in [0, 1]")
    if precision == 0.0 and recall == 0.0:
        return None
    b2 = beta * beta
    return (1.0 + b2) * precision * recall / (b2 * precision + recall)


def wss_at_recall(scores: dict[str, float], truth: dict[str, bool],
                  recall: float = DEFAULT_WSS_RECALL) -> float | None:
    """Work saved over sampling at the given recall level.

    Records are ordered by descending score (ascending id as tie-break);
    n* is the smallest prefix containing ceil(recall * R) relevant records;
    WSS = (N - n*) / N - (1 - recall). None when no record is relevant.
    """
    if not (0.0 < recall <= 1.0):
        raise ValueError("recall must be in (0, 1]")
    if set(scores) != set(truth):
        raise ValueError("scores/truth key mismatch")
    n = len(truth)
    total_relevant = sum(1 for v in truth.values() if v)
    if total_relevant == 0:
        return None
    # small slack absorbs float representation of recall * R (e.g. 0.95 * 20)
    needed = math.ceil(recall * total_relevant - 1e-9)
    found = 0
    n_star = n
    for rank, key in enumerate(
            sorted(scores, key=lambda k: (-scores[k], k)), start=1):
        if truth[key]:
            found += 1
            if found >= needed:
                n_star = rank
                break
    return (n - n_star) / n - (1.0 - recall)


@dataclass
class MetricsReport:
    counts: ConfusionCounts
    sensitivity: float | None
    specificity: float | None
    precision: float | None
    prevalence: float | None
    fbeta: float | None
    beta: float
    wss: float | None
    wss_recall: float

    def to_dict(self) -> dict:
        return {
            "tp": self.counts.tp, "fp": self.counts.fp,
            "tn": self.counts.tn, "fn": self.counts.fn,
            "sensitivity": self.sensitivity, "specificity": self.specificity,
            "precision": self.precision, "prevalence": self.prevalence,
            "fbeta": self.fbeta, "beta": self.beta,
            "wss": self.wss, "wss_recall": self.wss_recall,
        }


def metrics_report(truth: dict[str, bool], predicted: dict[str, bool],
                   scores: dict[str, float] | None = None,
                   beta: float = DEFAULT_BETA,
                   wss_recall: float = DEFAULT_WSS_RECALL) -> MetricsReport:
    counts = confusion(truth, predicted)
    precision = counts.precision
    recall = counts.sensitivity
    f = None
    if precision is not None and recall is not None:
        f = fbeta(precision, recall, beta)
    wss = wss_at_recall(scores, truth, wss_recall) if scores else None
    return MetricsReport(counts, recall, counts.specificity, precision,
                         counts.prevalence, f, beta, wss, wss_recall)


# ---------------------------------------------------------------------------
# folds


@dataclass
class FoldPlan:
    k: int
    seed: int
    assignment: dict[str, int]   # ref_id -> fold index in [0, k)

    def members(self, fold: int) -> list[str]:
        return sorted(r for r, f in self.assignment.items() if f == fold)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["ref_id", "fold"])
        for ref_id in sorted(self.assignment):
            writer.writerow([ref_id, str(self.assignment[ref_id])])
        return buf.getvalue()


def stratified_folds(truth: dict[str, bool], k: int, seed: int = 42) -> FoldPlan:
    """Deterministic stratified k-fold plan.

    Positives and negatives (each sorted by id) are shuffled independently by
    one splitmix64 stream seeded with ``seed`` (positives consume the stream
    first), then dealt round-robin: the i-th shuffled member of either class
    lands in fold i mod k. Byte-identical across runs and platforms; per-class
    fold sizes differ by at most one.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    positives = sorted(r for r, v in truth.items() if v)
    negatives = sorted(r for r, v in truth.items() if not v)
    if not positives or not negatives:
        raise ValueError("both classes must be present to stratify")
    rng = SplitMix64(seed)
    shuffle(positives, rng)
    shuffle(negatives, rng)
    assignment = {}
    for group in (positives, negatives):
        for i, ref_id in enumerate(group):
            assignment[ref_id] = i % k
    return FoldPlan(k, seed, assignment)


def topk_overlap(ranking_a: list[str], ranking_b: list[str], k: int) -> float:
    """|top-k(a) intersect top-k(b)| / k over two rankings of one universe."""
    if set(ranking_a) != set(ranking_b):
        raise ValueError("rankings cover different universes")
    if not (1 <= k <= len(ranking_a)):
        raise ValueError(f"k must be in [1, {len(ranking_a)}]")
    return len(set(ranking_a[:k]) & set(ranking_b[:k])) / k


# ---------------------------------------------------------------------------
# fold experiment


@dataclass
class FoldResult:
    fold: int
    ranking: list[tuple[str, float]]    # (ref_id, score), rank order
    overlap: float | None = None        # vs reference ranking, when given


@dataclass
class FoldExperimentReport:
    plan: FoldPlan
    results: list[FoldResult]

    @property
    def overlaps(self) -> list[float | None]:
        return [r.overlap for r in self.results]


def ranking_to_csv(ranking: list[tuple[str, float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["ref_id", "score", "rank"])
    for rank, (ref_id, score) in enumerate(ranking, start=1):
        writer.writerow([ref_id, repr(float(score)), str(rank)])
    return buf.getvalue()


def read_ranking_csv(text: str) -> list[tuple[str, float]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:2] != ["ref_id", "score"]:
        raise ValueError("not a ranking CSV (expected ref_id,score,rank)")
    return [(r[0], float(r[1])) for r in rows[1:]]


def run_fold_experiment(records: list[store.Record], truth: dict[str, bool],
                        k: int = 10, seed: int = 42,
                        out_dir: str | Path | None = None,
                        reference_dir: str | Path | None = None,
                        overlap_k: int = 100,
                        rank_fn=None) -> FoldExperimentReport:
    """Stratified k-fold ranking experiment.

    Each fold is ranked by a model trained on all out-of-fold records with
    their true labels. ``overlap_k`` is clamped to the fold size (folds are
    usually smaller than 100 at desk scale). When ``reference_dir`` holds
    fold_<i>.csv rankings, per-fold top-k overlap against them is reported;
    when ``out_dir`` is given the rankings are written there in the same
    layout.
    """
    plan = stratified_folds(truth, k, seed)
    if rank_fn is None:
        rank_fn = lambda snapshot: ranker.rank_unlabeled(snapshot)
    results = []
    out_path = Path(out_dir) if out_dir else None
    if out_path:
        out_path.mkdir(parents=True, exist_ok=True)
        (out_path / "folds.csv").write_text(plan.to_csv(), encoding="utf-8")
    for fold in range(k):
        members = set(plan.members(fold))
        labels = {r: truth[r] for r in truth if r not in members}
        snapshot = ranker.Snapshot(records, labels, sorted(members))
        ranking = rank_fn(snapshot)
        overlap = None
        if reference_dir is not None:
            ref_text = (Path(reference_dir) / f"fold_{fold}.csv").read_text(
                encoding="utf-8")
            reference = [r for r, _ in read_ranking_csv(ref_text)]
            mine = [r for r, _ in ranking]
            overlap = topk_overlap(mine, reference, min(overlap_k, len(mine)))
        if out_path:
            (out_path / f"fold_{fold}.csv").write_text(
                ranking_to_csv(ranking), encoding="utf-8")
        results.append(FoldResult(fold, ranking, overlap))
    return FoldExperimentReport(plan, results)


# ---------------------------------------------------------------------------
# dataset files (ref_id,title,abstract,label)


def write_dataset_csv(path: str | Path, records: list[store.Record],
                      truth: dict[str, bool]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["ref_id", "title", "abstract", "label"])
        for rec in sorted(records, key=lambda r: r.ref_id):
            writer.writerow([rec.ref_id, rec.title, rec.abstract,
                             "1" if truth[rec.ref_id] else "0"])


def load_dataset_csv(path: str | Path) -> tuple[list[store.Record], dict[str, bool]]:
    with open(path, encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != ["ref_id", "title", "abstract", "label"]:
        raise ValueError("expected header ref_id,title,abstract,label")
    records, truth = [], {}
    for row in rows[1:]:
        ref_id, title, abstract, label = row
        records.append(store.Record(ref_id=ref_id, title=title,
                                    abstract=abstract))
        truth[ref_id] = label == "1"
    return records, truth


def load_truth_csv(path: str | Path) -> dict[str, bool]:
    """Truth labels: CSV with ref_id and label columns (header required)."""
    with open(path, encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValueError("empty truth file")
    header = [h.strip().lower() for h in rows[0]]
    try:
        id_col, label_col = header.index("ref_id"), header.index("label")
    except ValueError:
        raise ValueError("truth CSV needs ref_id and label columns") from None
    return {row[id_col]: row[label_col].strip() in ("1", "true", "include")
            for row in rows[1:] if row}
