"""Stopping rules for screening sessions.

Two rules are offered:

* ``consecutive``: stop once the trailing run of irrelevant decisions reaches
  a configured length (default 50).
* ``statistical``: a hypergeometric test. After screening S of N records and
  finding r relevant, with a trailing irrelevant run of length w, posit the
  smallest total number of relevant records that would mean the recall target
  tau is still unmet: R0 = floor(r / tau) + 1, so K = R0 - r of them would
  remain in the unscreened-plus-window pool of size N - (S - w). The p-value
  is the chance of drawing w consecutive irrelevant records from that pool:
  p = hypergeom_cdf(0; pool, K, w). Stop when p < 1 - confidence.

The CDF is computed in log-gamma space; the test suite pins it to an
exact-rational oracle at 1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .rng import SplitMix64, shuffle


@dataclass
class StoppingConfig:
    rule: str = "consecutive"          # "consecutive" | "statistical"
    n_consecutive: int = 50
    target_recall: float = 0.95
    confidence: float = 0.95


@dataclass
class Trajectory:
    """Chronological screening outcomes: labels[i] is True when the i-th
    screened record was relevant; total_records is the corpus size N."""
    labels: list[bool]
    total_records: int


def trailing_irrelevant_run(labels: Sequence[bool]) -> int:
    run = 0
    for value in reversed(labels):
        if value:
            break
        run += 1
    return run


def consecutive_stop(labels: Sequence[bool], n_consecutive: int = 50) -> bool:
    if n_consecutive < 1:
        raise ValueError("n_consecutive must be >= 1")
    return trailing_irrelevant_run(labels) >= n_consecutive


def _log_choose(n: int, k: int) -> float:
    return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1))


def hypergeom_cdf(k: int, population: int, successes: int, draws: int) -> float:
    """P(X <= k) for X ~ Hypergeometric(population, successes, draws)."""
    if population < 0 or not (0 <= successes <= population) \
            or not (0 <= draws <= population):
        raise ValueError(
            f"invalid hypergeometric parameters ({population}, {successes}, {draws})")
    lo = max(0, draws + successes - population)
    hi = min(successes, draws)
    if k < lo:
        return 0.0
    if k >= hi:
        return 1.0
    denom = _log_choose(population, draws)
    terms = [math.exp(_log_choose(successes, i)
                      + _log_choose(population - successes, draws - i)
                      - denom)
             for i in range(lo, k + 1)]
    return min(1.0, max(0.0, math.fsum(terms)))


def statistical_stop(trajectory: Trajectory, target_recall: float = 0.95,
                     confidence: float = 0.95) -> tuple[bool, float]:
    """Returns (stop?, p-value). Never fires before the first relevant record
    or while the trailing window is empty (p = 1.0 in both cases)."""
    if not (0.0 < target_recall <= 1.0):
        raise ValueError("target_recall must be in (0, 1]")
    if not (0.0 < confidence < 1.0):
        raise ValueError("confidence must be in (0, 1)")
    labels = trajectory.labels
    n_total = trajectory.total_records
    if len(labels) > n_total:
        raise ValueError("screened more records than the corpus holds")
    r = sum(1 for x in labels if x)
    if r == 0:
        return (False, 1.0)
    window = trailing_irrelevant_run(labels)
    if window == 0:
        return (False, 1.0)
    screened = len(labels)
    hypothesized_total = math.floor(r / target_recall) + 1
    remaining = hypothesized_total - r
    pool = n_total - (screened - window)
    if remaining > pool - window:
        # the window could not have been all-irrelevant under the null
        p_value = 0.0
    else:
        p_value = hypergeom_cdf(0, pool, remaining, window)
    return (p_value < 1.0 - confidence, p_value)


def trajectory_from_project(project) -> Trajectory:
    """Chronological screening trajectory from a project's decision log.

    Records enter the trajectory at their first decisive decision, in log
    order; the label comes from the record's current effective status. Only
    an exclude counts as irrelevant: maybe and conflict break the trailing
    run, which keeps the rules from firing over unresolved records.
    """
    statuses = project.effective_statuses()
    seen: set[str] = set()
    order: list[str] = []
    for d in project.decisions():
        if d.decision == "pending" or d.ref_id in seen:
            continue
        seen.add(d.ref_id)
        order.append(d.ref_id)
    labels = [statuses[ref] != "exclude" for ref in order
              if statuses.get(ref, "pending") != "pending"]
    return Trajectory(labels=labels, total_records=len(statuses))


def evaluate(trajectory: Trajectory, config: StoppingConfig) -> tuple[bool, float]:
    """Apply the configured rule; the p-value is reported either way."""
    _, p_value = statistical_stop(trajectory, config.target_recall,
                                  config.confidence)
    if config.rule == "consecutive":
        return (consecutive_stop(trajectory.labels, config.n_consecutive), p_value)
    if config.rule == "statistical":
        return (p_value < 1.0 - config.confidence
                and sum(trajectory.labels) > 0
                and trailing_irrelevant_run(trajectory.labels) > 0, p_value)
    raise ValueError(f"unknown stopping rule {config.rule!r}")


# ---------------------------------------------------------------------------
# simulation


def random_order(n: int, seed: int) -> list[int]:
    order = list(range(n))
    shuffle(order, SplitMix64(seed))
    return order


def simulate_until_stop(hidden_labels: Sequence[bool],
                        order: Sequence[int],
                        config: StoppingConfig) -> tuple[float, int]:
    """Replay a screening session over ``hidden_labels`` in ``order``,
    applying the configured rule after every decision. Returns
    (achieved recall, records screened); an exhausted corpus counts as
    recall 1.0 even when no relevant records exist."""
    n = len(hidden_labels)
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of range(len(labels))")
    total_relevant = sum(1 for x in hidden_labels if x)
    found = 0
    run = 0
    screened = 0
    for idx in order:
        screened += 1
        if hidden_labels[idx]:
            found += 1
            run = 0
        else:
            run += 1
        if _fires(found, screened, run, n, config):
            break
    recall = found / total_relevant if total_relevant else 1.0
    return (recall, screened)


def _fires(found: int, screened: int, run: int, n_total: int,
           config: StoppingConfig) -> bool:
    if config.rule == "consecutive":
        return run >= config.n_consecutive
    if config.rule == "statistical":
        if found == 0 or run == 0:
            return False
        hypothesized_total = math.floor(found / config.target_recall) + 1
        remaining = hypothesized_total - found
        pool = n_total - (screened - run)
        if remaining > pool - run:
            return True
        # P(X = 0) in closed form keeps the simulation loop O(1) per step
        log_p = (_log_choose(pool - remaining, run) - _log_choose(pool, run))
        return log_p < math.log(1.0 - config.confidence)
    raise ValueError(f"unknown stopping rule {config.rule!r}")
