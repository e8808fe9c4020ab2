"""Deterministic synthetic screening corpora.

Used by the simulation scripts and the oracle-equivalence tests. Everything is
driven by splitmix64 so a corpus is byte-identical across runs and platforms.

Relevant records draw heavily from a small topic vocabulary, irrelevant ones
from a broad background pool with a trickle of topic words as noise. A few
irrelevant records are exact duplicates of earlier ones so ranking tie-breaks
get exercised.
"""

from __future__ import annotations

from . import store
from .rng import SplitMix64, shuffle

_SYLLABLES = [
    "ba", "ce", "di", "fo", "gu", "ha", "ki", "lo", "mu", "na",
    "pe", "qi", "ro", "sa", "tu", "ve", "wo", "xa", "yi", "zo",
    "bra", "cle", "dri", "fla", "gre", "pli", "sta", "tro",
]


def _word(rng: SplitMix64) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(2 + rng.below(3)))


def _word_pool(rng: SplitMix64, size: int, taken: set[str]) -> list[str]:
    pool = []
    while len(pool) < size:
        w = _word(rng)
        if w not in taken:
            taken.add(w)
            pool.append(w)
    return pool


def synthetic_corpus(n_records: int, n_relevant: int, seed: int,
                     duplicate_every: int = 37
                     ) -> tuple[list[store.Record], dict[str, bool]]:
    """Build ``n_records`` records of which ``n_relevant`` are relevant.
    Returns (records, truth) with ref_ids 000001..; relevance positions are
    shuffled so relevant records are spread through import order."""
    if not (0 <= n_relevant <= n_records):
        raise ValueError("n_relevant out of range")
    rng = SplitMix64(seed)
    taken: set[str] = set()
    topic = _word_pool(rng, 40, taken)
    background = _word_pool(rng, 240, taken)

    flags = [True] * n_relevant + [False] * (n_records - n_relevant)
    shuffle(flags, rng)

    def compose(relevant: bool, n_words: int) -> str:
        words = []
        for _ in range(n_words):
            if relevant:
                pick_topic = rng.below(100) < 55
            else:
                pick_topic = rng.below(100) < 3
            words.append(rng.choice(topic if pick_topic else background))
        return " ".join(words)

    records: list[store.Record] = []
    truth: dict[str, bool] = {}
    for i, relevant in enumerate(flags):
        ref_id = store.format_ref_id(i + 1)
        if (not relevant and duplicate_every and i > 0
                and i % duplicate_every == 0 and records):
            # exact duplicate text of an earlier irrelevant record
            donors = [r for r in records if not truth[r.ref_id]]
            if donors:
                donor = donors[rng.below(len(donors))]
                records.append(store.Record(
                    ref_id=ref_id, title=donor.title, abstract=donor.abstract,
                    imported_at="2026-01-01T00:00:00.000Z",
                    imported_by="synthetic@local",
                    dedup_key=f"synthetic:{ref_id}"))
                truth[ref_id] = False
                continue
        title = compose(relevant, 6 + rng.below(5))
        abstract = compose(relevant, 30 + rng.below(31))
        records.append(store.Record(
            ref_id=ref_id, title=title, abstract=abstract,
            imported_at="2026-01-01T00:00:00.000Z",
            imported_by="synthetic@local",
            dedup_key=f"synthetic:{ref_id}"))
        truth[ref_id] = relevant
    return records, truth


def seed_labels(truth: dict[str, bool], fraction: float, seed: int
                ) -> dict[str, bool]:
    """Label a deterministic slice of the corpus (both classes guaranteed)."""
    rng = SplitMix64(seed)
    ids = sorted(truth)
    shuffle(ids, rng)
    n = max(2, int(len(ids) * fraction))
    chosen = ids[:n]
    if not any(truth[i] for i in chosen):
        chosen[0] = next(i for i in ids if truth[i])
    if all(truth[i] for i in chosen):
        chosen[0] = next(i for i in ids if not truth[i])
    return {i: truth[i] for i in chosen}
