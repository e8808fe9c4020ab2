"""Batch LLM screening: prompt construction, tolerant response parsing,
rate-limited retried execution, threshold preview/confirm, and cost estimates.

Privacy contract: a screening request body carries the rendered prompt and the
record's title+abstract text, nothing else. No identifiers, authors, DOIs, or
reviewer information ever leave the machine; the mock provider captures the
exact body the live adapter would send so tests can enforce this.

Failure contract: a record that still fails after retries gets a ``pending``
decision with the failure note (never an exclude), and a rerun of the same
execution retries exactly the unjudged records.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import httpx

from . import store
from .ranker import build_corpus_text

logger = logging.getLogger(__name__)

TEMPLATE_VERSION = "1"

# the sensitivity-first instruction; must survive any template edit
SENSITIVITY_CLAUSE = "when in doubt, include"

PROMPT_TEMPLATE = """You are screening titles and abstracts for a systematic review.

Eligibility criteria:
{criteria}

Evaluate the record below against the criteria and respond in {language} with a single JSON object and no other text:
{{"probability": <number 0..1>, "reasons": [<short strings>], "evidence": [{{"quote": <exact substring of the record>, "start": <offset>, "end": <offset>}}]}}

"probability" is your probability that the record should be included. "reasons" lists the grounds for your judgment. Every "evidence" entry must quote a passage of the record verbatim, with "start" and "end" giving its exact character offsets in the record text.

Screening is sensitivity-first: missing a relevant study costs far more than passing an irrelevant one to full-text review. If you are unsure whether the record meets the criteria, you MUST include it: when in doubt, include.
"""

REFINE_TEMPLATE = """Rewrite the following systematic-review eligibility criteria as a concise, unambiguous checklist for screening titles and abstracts. Keep every criterion; do not invent new ones. Answer with the checklist only.

{criteria}
"""


class LlmError(Exception):
    pass


class JudgmentParseError(LlmError):
    pass


class TransportError(LlmError):
    """Retryable transport/server failure."""


@dataclass
class ScreeningPrompt:
    template_version: str
    criteria: str
    rendered: str
    output_language: str


def build_screening_prompt(protocol_text: str, output_language: str = "en",
                           refiner: "Provider | None" = None,
                           project: store.Project | None = None) -> ScreeningPrompt:
    """Render the screening prompt. With a ``refiner`` provider the criteria
    are first rewritten by the model (logged to the project as a
    prompt_generation execution when a project is given); the surrounding
    skeleton and the sensitivity clause are immutable either way."""
    criteria = protocol_text.strip()
    if not criteria:
        raise ValueError("protocol text must be non-empty")
    if refiner is not None:
        response = refiner.screen(REFINE_TEMPLATE.format(criteria=criteria), "",
                                  ref_hint="prompt-refinement")
        refined = response.text.strip()
        if refined:
            if project is not None:
                cfg = refiner.config
                project.log_execution(store.ExecutionLog(
                    execution_id=project.next_execution_id(),
                    execution_type="prompt_generation",
                    timestamp=store.utc_now(),
                    model_name=cfg.model_name,
                    temperature=cfg.temperature,
                    top_p=cfg.top_p,
                    thinking_level=cfg.thinking_level,
                    criteria_snapshot=criteria,
                    prompt=refined,
                    threshold=0.0,
                ))
            criteria = refined
    rendered = PROMPT_TEMPLATE.format(criteria=criteria, language=output_language)
    return ScreeningPrompt(TEMPLATE_VERSION, criteria, rendered, output_language)


# ---------------------------------------------------------------------------
# judgments


@dataclass
class EvidenceSpan:
    quote: str
    start: int
    end: int
    valid_offsets: bool = True


@dataclass
class LlmJudgment:
    ref_id: str
    probability: float
    reasons: list[str] = field(default_factory=list)
    evidence: list[EvidenceSpan] = field(default_factory=list)
    raw_response: str = ""
    input_tokens: int = 0
    output_tokens: int = 0
    thinking_tokens: int = 0

    def to_json(self) -> str:
        return json.dumps({
            "ref_id": self.ref_id,
            "probability": self.probability,
            "reasons": self.reasons,
            "evidence": [{"quote": e.quote, "start": e.start, "end": e.end,
                          "valid_offsets": e.valid_offsets}
                         for e in self.evidence],
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "thinking_tokens": self.thinking_tokens,
            "raw_response": self.raw_response,
        }, ensure_ascii=False, separators=(",", ":"), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LlmJudgment":
        obj = json.loads(text)
        return cls(
            ref_id=obj.get("ref_id", ""),
            probability=float(obj["probability"]),
            reasons=list(obj.get("reasons", [])),
            evidence=[EvidenceSpan(e["quote"], int(e["start"]), int(e["end"]),
                                   bool(e.get("valid_offsets", True)))
                      for e in obj.get("evidence", [])],
            raw_response=obj.get("raw_response", ""),
            input_tokens=int(obj.get("input_tokens", 0)),
            output_tokens=int(obj.get("output_tokens", 0)),
            thinking_tokens=int(obj.get("thinking_tokens", 0)),
        )


def _first_json_object(raw: str) -> dict | None:
    decoder = json.JSONDecoder()
    idx = raw.find("{")
    while idx != -1:
        try:
            obj, _ = decoder.raw_decode(raw, idx)
            if isinstance(obj, dict):
                return obj
        except json.JSONDecodeError:
            pass
        idx = raw.find("{", idx + 1)
    return None


def parse_judgment(raw: str, document_text: str, ref_id: str = "") -> LlmJudgment:
    """Extract the first valid JSON object from ``raw`` (code fences and chatter
    tolerated), clamp the probability into [0, 1], and validate evidence spans
    against ``document_text`` (offsets are Unicode scalar positions). A span
    whose offsets do not reproduce its quote gets one exact-substring re-search
    before being flagged invalid."""
    obj = _first_json_object(raw)
    if obj is None:
        raise JudgmentParseError("no JSON object found in model response")
    if "probability" not in obj:
        raise JudgmentParseError("model response lacks a probability field")
    try:
        probability = float(obj["probability"])
    except (TypeError, ValueError):
        raise JudgmentParseError(
            f"probability is not a number: {obj['probability']!r}") from None
    if not (0.0 <= probability <= 1.0):
        clamped = min(1.0, max(0.0, probability))
        logger.warning("clamped out-of-range probability %s -> %s for %s",
                       probability, clamped, ref_id or "<unknown>")
        probability = clamped
    reasons_raw = obj.get("reasons", [])
    if not isinstance(reasons_raw, list):
        reasons_raw = [reasons_raw]
    reasons = [str(x) for x in reasons_raw if str(x).strip()]
    evidence = []
    for item in obj.get("evidence", []) or []:
        if not isinstance(item, dict) or "quote" not in item:
            continue
        quote = str(item["quote"])
        try:
            start = int(item.get("start", -1))
            end = int(item.get("end", -1))
        except (TypeError, ValueError):
            start = end = -1
        valid = (0 <= start <= end <= len(document_text)
                 and document_text[start:end] == quote)
        if not valid and quote:
            pos = document_text.find(quote)
            if pos >= 0:
                start, end, valid = pos, pos + len(quote), True
        evidence.append(EvidenceSpan(quote, start, end, valid))
    return LlmJudgment(ref_id=ref_id, probability=probability,
                       reasons=reasons, evidence=evidence, raw_response=raw)


# ---------------------------------------------------------------------------
# providers


@dataclass
class ProviderConfig:
    model_name: str = "gemini-3.0-flash-preview"
    temperature: float = 1.0
    top_p: float = 0.95
    thinking_level: str = "low"
    requests_per_minute: int = 60
    max_retries: int = 2
    endpoint: str = "https://generativelanguage.googleapis.com/v1beta"
    api_key_ref: str = ""


@dataclass
class ProviderResponse:
    text: str
    input_tokens: int = 0
    output_tokens: int = 0
    thinking_tokens: int = 0


def build_request_body(prompt: str, document_text: str,
                       config: ProviderConfig) -> dict:
    """The full request body. Title+abstract plus the prompt; nothing else."""
    return {
        "contents": [{
            "role": "user",
            "parts": [{"text": f"{prompt}\n\nRecord:\n{document_text}"}],
        }],
        "generationConfig": {
            "temperature": config.temperature,
            "topP": config.top_p,
            "thinkingConfig": {"thinkingLevel": config.thinking_level.upper()},
        },
    }


class Provider:
    """Interface: screen() returns the raw model response for one record.
    ``ref_hint`` is routing metadata for mocks and never enters the body."""

    config: ProviderConfig

    def screen(self, prompt: str, document_text: str, *,
               ref_hint: str | None = None) -> ProviderResponse:
        raise NotImplementedError


class MockProvider(Provider):
    """Deterministic scripted provider.

    ``script`` maps ref_id -> either {"raw": "<full response text>"} or a
    judgment spec {"probability": .., "reasons": [..], "quotes": [..]} from
    which a well-formed response is rendered (quote offsets are computed
    against the record text). Optional per-ref {"fail_times": n} injects
    transport errors; ``abort_after`` simulates a process kill after that many
    requests. Every request body the live adapter would send is captured in
    ``self.requests``.
    """

    def __init__(self, script: dict[str, dict],
                 config: ProviderConfig | None = None,
                 abort_after: int | None = None):
        self.script = script
        self.config = config or ProviderConfig()
        self.abort_after = abort_after
        self.requests: list[dict] = []
        self.hints: list[str | None] = []
        self._failures: dict[str, int] = {}
        self._lock = threading.Lock()

    def screen(self, prompt, document_text, *, ref_hint=None):
        body = build_request_body(prompt, document_text, self.config)
        with self._lock:
            if self.abort_after is not None and len(self.requests) >= self.abort_after:
                # the process died between records; nothing was sent
                raise RuntimeError("simulated interruption")
            self.requests.append(body)
            self.hints.append(ref_hint)
            spec = self.script.get(ref_hint)
            if spec is None:
                raise TransportError(f"no scripted response for {ref_hint!r}")
            fail_times = spec.get("fail_times", 0)
            seen = self._failures.get(ref_hint, 0)
            if seen < fail_times:
                self._failures[ref_hint] = seen + 1
                raise TransportError("scripted transport failure")
        if "raw" in spec:
            text = spec["raw"]
        else:
            evidence = list(spec.get("evidence", []))
            for quote in spec.get("quotes", []):
                pos = document_text.find(quote)
                evidence.append({"quote": quote, "start": pos,
                                 "end": pos + len(quote) if pos >= 0 else -1})
            text = json.dumps({
                "probability": spec.get("probability", 0.5),
                "reasons": spec.get("reasons", ["scripted"]),
                "evidence": evidence,
            })
        return ProviderResponse(
            text=text,
            input_tokens=spec.get("input_tokens", len(prompt) // 4),
            output_tokens=spec.get("output_tokens", len(text) // 4),
            thinking_tokens=spec.get("thinking_tokens", 0),
        )


class GeminiProvider(Provider):
    """Thin adapter for a generateContent-style HTTP endpoint."""

    def __init__(self, config: ProviderConfig, api_key: str,
                 client: httpx.Client | None = None):
        self.config = config
        self._api_key = api_key
        self._client = client or httpx.Client(timeout=120.0)

    def screen(self, prompt, document_text, *, ref_hint=None):
        body = build_request_body(prompt, document_text, self.config)
        url = (f"{self.config.endpoint.rstrip('/')}/models/"
               f"{self.config.model_name}:generateContent")
        try:
            resp = self._client.post(
                url, json=body, headers={"x-goog-api-key": self._api_key})
        except httpx.HTTPError as exc:
            raise TransportError(f"request failed: {exc}") from None
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"server returned {resp.status_code}")
        if resp.status_code != 200:
            raise LlmError(f"server returned {resp.status_code}: {resp.text[:200]}")
        payload = resp.json()
        parts = (payload.get("candidates") or [{}])[0].get(
            "content", {}).get("parts", [])
        text = "".join(p.get("text", "") for p in parts)
        usage = payload.get("usageMetadata", {})
        return ProviderResponse(
            text=text,
            input_tokens=int(usage.get("promptTokenCount", 0)),
            output_tokens=int(usage.get("candidatesTokenCount", 0)),
            thinking_tokens=int(usage.get("thoughtsTokenCount", 0)),
        )


class RateLimiter:
    """Sliding-window limiter: at most ``requests_per_minute`` acquisitions in
    any 60-second window. Clock and sleep are injectable for tests."""

    def __init__(self, requests_per_minute: int,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if requests_per_minute < 1:
            raise ValueError("requests_per_minute must be >= 1")
        self.rpm = requests_per_minute
        self.clock = clock
        self.sleep = sleep
        self._sent: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self.clock()
                while self._sent and self._sent[0] <= now - 60.0:
                    self._sent.popleft()
                if len(self._sent) < self.rpm:
                    self._sent.append(now)
                    return
                wait = self._sent[0] + 60.0 - now
            self.sleep(max(wait, 1e-6))


# ---------------------------------------------------------------------------
# batch runner


def llm_reviewer_id(execution_id: str) -> str:
    return f"{store.LLM_REVIEWER_PREFIX}{execution_id}"


def _judged_refs(project: store.Project, execution_id: str) -> dict[str, LlmJudgment]:
    """Latest stored judgment per record for one execution."""
    reviewer = llm_reviewer_id(execution_id)
    out: dict[str, tuple[tuple[str, str], LlmJudgment]] = {}
    for d in project.decisions():
        if d.reviewer_id != reviewer or not d.note:
            continue
        if d.decision not in ("include", "exclude"):
            continue
        try:
            judgment = LlmJudgment.from_json(d.note)
        except (json.JSONDecodeError, KeyError, ValueError):
            continue
        key = (d.timestamp, d.decision_id)
        if d.ref_id not in out or key > out[d.ref_id][0]:
            out[d.ref_id] = (key, judgment)
    return {ref: j for ref, (_, j) in out.items()}


def _batch_scope(project: store.Project, scope: str) -> list[str]:
    if scope == "all":
        return sorted(r.ref_id for r in project.records())
    if scope in store.STATUS_VALUES:
        statuses = project.effective_statuses()
        return sorted(r for r, s in statuses.items() if s == scope)
    raise ValueError(f"unknown scope {scope!r}")


def run_batch(project: store.Project, prompt: ScreeningPrompt,
              provider: Provider, *, scope: str = "pending",
              threshold: float | None = None,
              execution_id: str | None = None,
              clock: Callable[[], float] = time.monotonic,
              sleep: Callable[[float], None] = time.sleep,
              backoff_base: float = 0.5,
              concurrency: int = 1,
              progress_every: int = 10) -> store.ExecutionLog:
    """Screen every record in ``scope`` with one request each.

    Rerunning with the same ``execution_id`` resumes: records that already
    carry a judgment from this execution are skipped, so requests are never
    duplicated. Decisions are appended (and flushed) per record; counts on the
    execution row are refreshed every ``progress_every`` records and at the
    end; the targeted count is fixed when the execution is first logged.
    """
    cfg = provider.config
    if threshold is None:
        threshold = float(project.config_get("llm.threshold"))
    if not (0.0 <= threshold <= 1.0):
        raise ValueError("threshold must lie in [0, 1]")
    if execution_id is None:
        execution_id = project.next_execution_id()
        target = _batch_scope(project, scope)
        project.log_execution(store.ExecutionLog(
            execution_id=execution_id,
            execution_type="batch_screening",
            timestamp=store.utc_now(),
            model_name=cfg.model_name,
            temperature=cfg.temperature,
            top_p=cfg.top_p,
            thinking_level=cfg.thinking_level,
            criteria_snapshot=prompt.criteria,
            prompt=prompt.rendered,
            threshold=threshold,
            targeted_count=len(target),
        ))
    else:
        execution = project.execution(execution_id)
        threshold = execution.threshold
        target = _batch_scope(project, scope)
    reviewer = llm_reviewer_id(execution_id)
    already = _judged_refs(project, execution_id)
    todo = [r for r in target if r not in already]
    records = {r.ref_id: r for r in project.records()}
    limiter = RateLimiter(cfg.requests_per_minute, clock, sleep)
    done_since_update = 0
    write_lock = threading.Lock()

    def attempt(ref_id: str) -> LlmJudgment:
        text = build_corpus_text(records[ref_id])
        last_error: Exception = LlmError("unreachable")
        for i in range(cfg.max_retries + 1):
            limiter.acquire()
            try:
                response = provider.screen(prompt.rendered, text,
                                           ref_hint=ref_id)
                judgment = parse_judgment(response.text, text, ref_id)
                judgment.input_tokens = response.input_tokens
                judgment.output_tokens = response.output_tokens
                judgment.thinking_tokens = response.thinking_tokens
                return judgment
            except (TransportError, JudgmentParseError) as exc:
                last_error = exc
                if i < cfg.max_retries:
                    sleep(backoff_base * (2.0 ** i))
        raise last_error

    def record_outcome(ref_id: str, judgment: LlmJudgment | None,
                       error: Exception | None) -> None:
        nonlocal done_since_update
        with write_lock:
            if judgment is not None:
                verdict = "include" if judgment.probability >= threshold else "exclude"
                project.append_decision(store.Decision(
                    decision_id="", ref_id=ref_id, reviewer_id=reviewer,
                    decision=verdict,
                    reason="; ".join(judgment.reasons)[:500],
                    note=judgment.to_json(),
                    client_version=_client_version(),
                ))
            else:
                project.append_decision(store.Decision(
                    decision_id="", ref_id=ref_id, reviewer_id=reviewer,
                    decision="pending",
                    reason=f"screening failed after retries: {error}",
                    client_version=_client_version(),
                ))
            done_since_update += 1
            if progress_every and done_since_update >= progress_every:
                done_since_update = 0
                _refresh_counts(project, execution_id, threshold)

    if concurrency <= 1:
        for ref_id in todo:
            try:
                judgment = attempt(ref_id)
            except (TransportError, JudgmentParseError) as exc:
                record_outcome(ref_id, None, exc)
            else:
                record_outcome(ref_id, judgment, None)
    else:
        from concurrent.futures import ThreadPoolExecutor
        def one(ref_id: str):
            try:
                judgment = attempt(ref_id)
            except (TransportError, JudgmentParseError) as exc:
                record_outcome(ref_id, None, exc)
            else:
                record_outcome(ref_id, judgment, None)
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            list(pool.map(one, todo))

    _refresh_counts(project, execution_id, threshold)
    if _judged_refs(project, execution_id):
        project.set_active_execution(execution_id)
    return project.execution(execution_id)


def _client_version() -> str:
    from . import __version__
    return __version__


def _refresh_counts(project: store.Project, execution_id: str,
                    threshold: float) -> None:
    judgments = _judged_refs(project, execution_id)
    included = sum(1 for j in judgments.values() if j.probability >= threshold)
    project.update_execution(
        execution_id,
        included_count=included,
        excluded_count=len(judgments) - included,
    )


# ---------------------------------------------------------------------------
# threshold workflow


def threshold_preview(project: store.Project, execution_id: str,
                      threshold: float) -> tuple[int, int]:
    """(would-include, would-exclude) at ``threshold`` over stored judgments."""
    if not (0.0 <= threshold <= 1.0):
        raise ValueError("threshold must lie in [0, 1]")
    project.execution(execution_id)  # raises UnknownExecutionError
    judgments = _judged_refs(project, execution_id)
    included = sum(1 for j in judgments.values()
                   if j.probability >= threshold)
    return included, len(judgments) - included


def confirm_threshold(project: store.Project, execution_id: str,
                      threshold: float) -> store.ExecutionLog:
    """Append superseding decisions for every judged record at ``threshold``,
    mark the execution confirmed, and make it the active one. Existing rows
    are never touched; history stays replayable."""
    if not (0.0 <= threshold <= 1.0):
        raise ValueError("threshold must lie in [0, 1]")
    project.execution(execution_id)
    judgments = _judged_refs(project, execution_id)
    reviewer = llm_reviewer_id(execution_id)
    included = 0
    for ref_id in sorted(judgments):
        judgment = judgments[ref_id]
        verdict = "include" if judgment.probability >= threshold else "exclude"
        included += verdict == "include"
        project.append_decision(store.Decision(
            decision_id="", ref_id=ref_id, reviewer_id=reviewer,
            decision=verdict,
            reason=f"threshold confirmed at {threshold}",
            note=judgment.to_json(),
            client_version=_client_version(),
        ))
    project.update_execution(
        execution_id,
        threshold=threshold,
        included_count=included,
        excluded_count=len(judgments) - included,
        confirmation_status="confirmed",
    )
    project.set_active_execution(execution_id)
    return project.execution(execution_id)


# ---------------------------------------------------------------------------
# cost


@dataclass
class Pricing:
    input_usd_per_million: float = 0.50
    output_usd_per_million: float = 3.00   # thinking tokens bill at this rate


def estimate_cost(input_tokens: int, output_tokens: int,
                  thinking_tokens: int = 0,
                  pricing: Pricing = Pricing()) -> float:
    """USD cost of a run at the configured per-million-token prices."""
    return (input_tokens * pricing.input_usd_per_million
            + (output_tokens + thinking_tokens) * pricing.output_usd_per_million
            ) / 1_000_000.0


def execution_cost(project: store.Project, execution_id: str,
                   pricing: Pricing = Pricing()) -> float:
    """Sum of recorded token counts for one execution, priced."""
    judgments = _judged_refs(project, execution_id)
    return estimate_cost(
        sum(j.input_tokens for j in judgments.values()),
        sum(j.output_tokens for j in judgments.values()),
        sum(j.thinking_tokens for j in judgments.values()),
        pricing,
    )
