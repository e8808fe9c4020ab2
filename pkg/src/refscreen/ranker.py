"""Active-learning relevance ranking: TF-IDF features, multinomial naive
Bayes, certainty-ordered queue.

The math is written out here rather than delegated to an ML library so the
test suite can hold it against an independent brute-force oracle:

* tokens: lowercase, split on non-alphanumeric, keep length >= 2, unigrams
* idf(t) = ln((1 + N) / (1 + df(t))) + 1, weights tf * idf, L2-normalized rows
* class prior = class count / total; likelihood_c(t) =
  (sum of t's weight in c + alpha) / (sum of all weights in c + alpha * |V|)
* posterior computed in log space with a log-sum-exp normalization

The vocabulary is fitted on every record in the project (labeled or not);
ranking sorts by descending relevance probability with ascending ref_id as the
tie-break, so identical project state always yields the identical queue.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import store

DEFAULT_ALPHA = 3.822  # smoothing used by the reference screening tool


class RankerError(Exception):
    pass


class EmptyVocabularyError(RankerError):
    pass


class TrainingError(RankerError):
    pass


class ColdStartError(RankerError):
    """Raised when fewer than one labeled example per class exists."""


# tokens are runs of alphanumerics (underscore splits), length >= 2
_TOKEN_RE = re.compile(r"[^\W_]{2,}")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def build_corpus_text(record) -> str:
    """Title and abstract joined by a single space; bare title when the
    abstract is empty. Evidence offsets and keyword highlights both index
    into this exact string."""
    if record.abstract:
        return f"{record.title} {record.abstract}"
    return record.title


@dataclass
class Vocabulary:
    terms: dict[str, tuple[int, int]]   # term -> (column index, document freq)
    total_documents: int

    @property
    def size(self) -> int:
        return len(self.terms)

    @cached_property
    def idf(self) -> np.ndarray:
        arr = np.zeros(self.size)
        n = self.total_documents
        for _, (idx, df) in self.terms.items():
            arr[idx] = math.log((1.0 + n) / (1.0 + df)) + 1.0
        return arr


@dataclass
class DocVector:
    """Sparse L2-normalized TF-IDF row. ``indices`` ascend; a document with no
    in-vocabulary tokens keeps empty arrays and ``empty=True`` (never
    normalized)."""
    indices: np.ndarray
    weights: np.ndarray
    size: int

    @property
    def empty(self) -> bool:
        return len(self.indices) == 0


def fit_vocabulary(texts: list[str]) -> Vocabulary:
    df: dict[str, int] = {}
    for text in texts:
        for term in set(tokenize(text)):
            df[term] = df.get(term, 0) + 1
    if not df:
        raise EmptyVocabularyError("no tokens of length >= 2 in any document")
    terms = {t: (i, df[t]) for i, t in enumerate(sorted(df))}
    return Vocabulary(terms, len(texts))


def tfidf_transform(texts: list[str], vocab: Vocabulary) -> list[DocVector]:
    idf = vocab.idf
    out = []
    for text in texts:
        counts: dict[int, int] = {}
        for term in tokenize(text):
            entry = vocab.terms.get(term)
            if entry is not None:
                counts[entry[0]] = counts.get(entry[0], 0) + 1
        if not counts:
            out.append(DocVector(np.empty(0, dtype=np.int64),
                                 np.empty(0), vocab.size))
            continue
        indices = np.array(sorted(counts), dtype=np.int64)
        weights = np.array([counts[i] for i in indices], dtype=np.float64)
        weights *= idf[indices]
        weights /= math.sqrt(float(weights @ weights))
        out.append(DocVector(indices, weights, vocab.size))
    return out


@dataclass
class NbModel:
    log_prior_relevant: float
    log_prior_irrelevant: float
    log_likelihood_relevant: np.ndarray
    log_likelihood_irrelevant: np.ndarray
    smoothing_alpha: float


def train_nb(vectors: list[DocVector], labels: list[bool],
             alpha: float = DEFAULT_ALPHA) -> NbModel:
    """labels[i] is True for relevant. Both classes must be present."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if len(vectors) != len(labels):
        raise ValueError("vectors and labels differ in length")
    n_rel = sum(1 for x in labels if x)
    n_irr = len(labels) - n_rel
    if n_rel == 0 or n_irr == 0:
        raise TrainingError("training needs at least one example per class")
    size = vectors[0].size
    sums = {True: np.zeros(size), False: np.zeros(size)}
    for vec, label in zip(vectors, labels):
        if vec.size != size:
            raise ValueError("vectors come from different vocabularies")
        if not vec.empty:
            sums[label][vec.indices] += vec.weights
    def log_like(s: np.ndarray) -> np.ndarray:
        return np.log((s + alpha) / (s.sum() + alpha * size))
    return NbModel(
        log_prior_relevant=math.log(n_rel / len(labels)),
        log_prior_irrelevant=math.log(n_irr / len(labels)),
        log_likelihood_relevant=log_like(sums[True]),
        log_likelihood_irrelevant=log_like(sums[False]),
        smoothing_alpha=alpha,
    )


def predict_proba(model: NbModel, vectors: list[DocVector]) -> np.ndarray:
    """Relevance probability per document (empty docs score the prior)."""
    out = np.empty(len(vectors))
    for i, vec in enumerate(vectors):
        lr = model.log_prior_relevant
        li = model.log_prior_irrelevant
        if not vec.empty:
            lr += float(vec.weights @ model.log_likelihood_relevant[vec.indices])
            li += float(vec.weights @ model.log_likelihood_irrelevant[vec.indices])
        m = max(lr, li)
        er, ei = math.exp(lr - m), math.exp(li - m)
        out[i] = er / (er + ei)
    return out


# ---------------------------------------------------------------------------
# queue construction

# ranked queue: list of (ref_id, relevance probability), probability
# non-increasing, ties broken by ascending ref_id
RankedQueue = list[tuple[str, float]]


@dataclass
class Snapshot:
    """Everything ranking needs from a project at one instant."""
    records: list[store.Record]
    labels: dict[str, bool]                 # ref_id -> relevant
    candidates: list[str] | None = None     # default: records absent from labels


def snapshot_from_project(project: store.Project) -> Snapshot:
    """Projection used by the live queue: effective include -> relevant,
    exclude -> irrelevant; only status ``pending`` records are queue
    candidates (maybe/conflict records were reviewed, so they are neither
    queued nor trained on)."""
    statuses = project.effective_statuses()
    labels = {r: s == "include" for r, s in statuses.items()
              if s in ("include", "exclude")}
    candidates = sorted(r for r, s in statuses.items() if s == "pending")
    return Snapshot(project.records(), labels, candidates)


def rank_unlabeled(snapshot: Snapshot, alpha: float = DEFAULT_ALPHA) -> RankedQueue:
    """Train on the snapshot's labels and rank its candidates by certainty."""
    by_id = {r.ref_id: r for r in snapshot.records}
    labeled_ids = sorted(i for i in snapshot.labels if i in by_id)
    n_rel = sum(1 for i in labeled_ids if snapshot.labels[i])
    if n_rel == 0 or n_rel == len(labeled_ids):
        raise ColdStartError(
            "need at least one relevant and one irrelevant label")
    if snapshot.candidates is None:
        candidates = [r.ref_id for r in snapshot.records
                      if r.ref_id not in snapshot.labels]
    else:
        unknown = [c for c in snapshot.candidates if c not in by_id]
        if unknown:
            raise ValueError(f"candidates not in snapshot: {unknown[:3]}")
        # the queue never contains a labeled record
        candidates = [c for c in snapshot.candidates
                      if c not in snapshot.labels]
    # the vocabulary sees every record, labeled or not
    ordered = sorted(by_id)
    vocab = fit_vocabulary([build_corpus_text(by_id[i]) for i in ordered])
    vectors = dict(zip(ordered, tfidf_transform(
        [build_corpus_text(by_id[i]) for i in ordered], vocab)))
    model = train_nb([vectors[i] for i in labeled_ids],
                     [snapshot.labels[i] for i in labeled_ids], alpha)
    probs = predict_proba(model, [vectors[i] for i in candidates])
    queue = sorted(zip(candidates, probs.tolist()),
                   key=lambda item: (-item[1], item[0]))
    return queue


def active_step(project: store.Project, decision_id: str | None = None,
                alpha: float = DEFAULT_ALPHA) -> RankedQueue:
    """Full retrain + re-rank after a persisted decision. ``decision_id``
    (when given) must already be in the log; this function never writes."""
    if decision_id is not None:
        if not any(d.decision_id == decision_id for d in project.decisions()):
            raise ValueError(f"decision {decision_id!r} is not persisted")
    return rank_unlabeled(snapshot_from_project(project), alpha)
