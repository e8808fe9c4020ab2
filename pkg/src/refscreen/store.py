"""Auditable local project store.

A project is a directory holding four UTF-8 CSV tables (RFC 4180 framing,
header row first):

* ``references.csv``      one row per imported record, 19 columns
* ``decisions.csv``       append-only screening decision log, 10 columns
* ``config.csv``          key/value settings
* ``llm_executions.csv``  audit rows for LLM runs, 15 columns

Decisions are never rewritten: every screening action appends a row and the
current status of a record is recomputed as the latest decision per reviewer
(timestamp, then decision_id as tie-break). The executions table permits field
updates only through :func:`Project.update_execution` /
:func:`Project.set_active_execution`; references may be rewritten wholesale
(import, assignment) but rows are never silently dropped.

Writers serialize through an exclusive lock file (``.lock``); readers tolerate
a torn trailing row so a decision append is either fully visible or absent
after a process kill.
"""

from __future__ import annotations

import csv
import io
import os
import re
from contextlib import contextmanager
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from filelock import FileLock, Timeout

REF_COLUMNS = [
    "ref_id", "title", "abstract", "year", "authors", "journal", "volume",
    "issue", "pages", "issn", "doi", "pmid", "url", "source", "imported_at",
    "imported_by", "dedup_key", "source_file", "screening_set",
]
DECISION_COLUMNS = [
    "decision_id", "ref_id", "reviewer_id", "decision", "reason", "labels",
    "note", "timestamp", "client_version", "context_url",
]
EXECUTION_COLUMNS = [
    "execution_id", "execution_type", "timestamp", "model_name", "temperature",
    "top_p", "thinking_level", "criteria_snapshot", "prompt", "threshold",
    "targeted_count", "included_count", "excluded_count",
    "confirmation_status", "active",
]
CONFIG_COLUMNS = ["key", "value"]

DECISION_VALUES = ("include", "exclude", "maybe", "pending")
STATUS_VALUES = DECISION_VALUES + ("conflict",)
EXECUTION_TYPES = ("prompt_generation", "batch_screening")
THINKING_LEVELS = ("minimal", "low", "medium", "high")
CONFIRMATION_VALUES = ("pending", "confirmed")

LLM_REVIEWER_PREFIX = "llm:"

_REFERENCES = "references.csv"
_DECISIONS = "decisions.csv"
_CONFIG = "config.csv"
_EXECUTIONS = "llm_executions.csv"
_LOCK = ".lock"


class StoreError(Exception):
    """Base class for store failures."""


class ProjectExistsError(StoreError):
    pass


class ProjectNotFoundError(StoreError):
    pass


class ProjectLockedError(StoreError):
    pass


class TableCorruptError(StoreError):
    pass


class ValidationError(StoreError):
    pass


class UnknownRefError(ValidationError):
    pass


class UnknownExecutionError(ValidationError):
    pass


class ConfigKeyError(ValidationError):
    pass


class ConfigValueError(ValidationError):
    pass


# ---------------------------------------------------------------------------
# row types


@dataclass
class Record:
    ref_id: str
    title: str
    abstract: str = ""
    year: int | None = None
    authors: str = ""
    journal: str = ""
    volume: str = ""
    issue: str = ""
    pages: str = ""
    issn: str = ""
    doi: str = ""
    pmid: str = ""
    url: str = ""
    source: str = ""
    imported_at: str = ""
    imported_by: str = ""
    dedup_key: str = ""
    source_file: str = ""
    screening_set: str = ""

    def to_row(self) -> list[str]:
        return [
            self.ref_id, self.title, self.abstract,
            "" if self.year is None else str(self.year),
            self.authors, self.journal, self.volume, self.issue, self.pages,
            self.issn, self.doi, self.pmid, self.url, self.source,
            self.imported_at, self.imported_by, self.dedup_key,
            self.source_file, self.screening_set,
        ]

    @classmethod
    def from_row(cls, row: list[str]) -> "Record":
        return cls(
            ref_id=row[0], title=row[1], abstract=row[2],
            year=int(row[3]) if row[3] else None,
            authors=row[4], journal=row[5], volume=row[6], issue=row[7],
            pages=row[8], issn=row[9], doi=row[10], pmid=row[11], url=row[12],
            source=row[13], imported_at=row[14], imported_by=row[15],
            dedup_key=row[16], source_file=row[17], screening_set=row[18],
        )


@dataclass
class Decision:
    decision_id: str
    ref_id: str
    reviewer_id: str
    decision: str
    reason: str = ""
    labels: str = ""          # legacy column, written empty
    note: str = ""            # serialized LLM judgment for machine decisions
    timestamp: str = ""
    client_version: str = ""
    context_url: str = ""

    def to_row(self) -> list[str]:
        return [
            self.decision_id, self.ref_id, self.reviewer_id, self.decision,
            self.reason, self.labels, self.note, self.timestamp,
            self.client_version, self.context_url,
        ]

    @classmethod
    def from_row(cls, row: list[str]) -> "Decision":
        return cls(*row)


@dataclass
class ExecutionLog:
    execution_id: str
    execution_type: str
    timestamp: str
    model_name: str
    temperature: float
    top_p: float
    thinking_level: str
    criteria_snapshot: str
    prompt: str
    threshold: float
    targeted_count: int = 0
    included_count: int = 0
    excluded_count: int = 0
    confirmation_status: str = "pending"
    active: bool = False

    def to_row(self) -> list[str]:
        return [
            self.execution_id, self.execution_type, self.timestamp,
            self.model_name, _fmt_float(self.temperature),
            _fmt_float(self.top_p), self.thinking_level,
            self.criteria_snapshot, self.prompt, _fmt_float(self.threshold),
            str(self.targeted_count), str(self.included_count),
            str(self.excluded_count), self.confirmation_status,
            "true" if self.active else "false",
        ]

    @classmethod
    def from_row(cls, row: list[str]) -> "ExecutionLog":
        return cls(
            execution_id=row[0], execution_type=row[1], timestamp=row[2],
            model_name=row[3], temperature=float(row[4]), top_p=float(row[5]),
            thinking_level=row[6], criteria_snapshot=row[7], prompt=row[8],
            threshold=float(row[9]), targeted_count=int(row[10]),
            included_count=int(row[11]), excluded_count=int(row[12]),
            confirmation_status=row[13], active=row[14] == "true",
        )


def _fmt_float(x: float) -> str:
    # repr() keeps round-trip precision while "0.5" stays "0.5"
    return repr(float(x))


# ---------------------------------------------------------------------------
# config schema


def _enum(*allowed):
    def check(value: str):
        if value not in allowed:
            raise ConfigValueError(f"expected one of {allowed}, got {value!r}")
    return check


def _float_range(lo: float, hi: float):
    def check(value: str):
        try:
            x = float(value)
        except ValueError:
            raise ConfigValueError(f"not a number: {value!r}") from None
        if not (lo <= x <= hi):
            raise ConfigValueError(f"value {value!r} outside [{lo}, {hi}]")
    return check


def _int_min(lo: int):
    def check(value: str):
        try:
            x = int(value)
        except ValueError:
            raise ConfigValueError(f"not an integer: {value!r}") from None
        if x < lo:
            raise ConfigValueError(f"value {value!r} below minimum {lo}")
    return check


def _any(value: str):
    return None


# key -> (default, validator)
CONFIG_KEYS: dict[str, tuple[str, object]] = {
    "keywords.include_preset_rct": (
        "randomized, randomised, randomly, placebo, double-blind, trial", _any),
    "keywords.include_preset_sr": (
        "systematic review, meta-analysis, search strategy, PRISMA", _any),
    "keywords.custom_include": ("", _any),
    "keywords.custom_exclude": ("", _any),
    "llm.model": ("gemini-3.0-flash-preview", _any),
    "llm.temperature": ("1.0", _float_range(0.0, 2.0)),
    "llm.top_p": ("0.95", _float_range(0.0, 1.0)),
    "llm.thinking_level": ("low", _enum(*THINKING_LEVELS)),
    "llm.threshold": ("0.5", _float_range(0.0, 1.0)),
    "llm.prompt": ("", _any),
    "llm.output_language": ("en", _any),
    "assign.calibration_size": ("0", _int_min(0)),
    "assign.group_count": ("1", _int_min(1)),
    "stop.rule": ("consecutive", _enum("consecutive", "statistical")),
    "stop.n_consecutive": ("50", _int_min(1)),
    "stop.target_recall": ("0.95", _float_range(0.0, 1.0)),
    "stop.confidence": ("0.95", _float_range(0.0, 1.0)),
}


# ---------------------------------------------------------------------------
# helpers


def utc_now() -> str:
    """RFC 3339 UTC timestamp with millisecond precision."""
    dt = datetime.now(timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


def format_ref_id(n: int) -> str:
    return f"{n:06d}"


_REF_ID_RE = re.compile(r"^\d{6,}$")
_DECISION_ID_RE = re.compile(r"^d\d{7,}$")
_CONTROL_RE = re.compile(r"[\r\n\x00]")


def _flatten(text: str) -> str:
    return re.sub(r"[\r\n]+", " ", text) if text else text


def _encode_rows(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _decision_sort_key(d: Decision) -> tuple[str, str]:
    return (d.timestamp, d.decision_id)


# ---------------------------------------------------------------------------
# project


class Project:
    """Handle on a project directory. Cheap to construct; reads are snapshots."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        for name in (_REFERENCES, _DECISIONS, _CONFIG, _EXECUTIONS):
            if not (self.path / name).is_file():
                raise ProjectNotFoundError(
                    f"{self.path} is not a project (missing {name})")
        self._ref_cache: tuple[tuple[float, int], dict[str, Record]] | None = None

    # -- locking ----------------------------------------------------------

    def _lock(self, timeout: float = 30.0) -> FileLock:
        return FileLock(str(self.path / _LOCK), timeout=timeout)

    @contextmanager
    def locked_write(self, timeout: float = 30.0):
        """Context manager serializing a multi-step write."""
        lock = self._lock(timeout)
        try:
            lock.acquire()
        except Timeout:
            raise ProjectLockedError(
                f"project {self.path} is locked by another writer") from None
        try:
            yield
        finally:
            lock.release()

    # -- low-level table IO ------------------------------------------------

    def _read_rows(self, name: str, ncols: int) -> list[list[str]]:
        path = self.path / name
        try:
            with open(path, encoding="utf-8", newline="") as f:
                text = f.read()
        except FileNotFoundError:
            raise ProjectNotFoundError(f"missing table {name}") from None
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise TableCorruptError(f"{name}: missing header row")
        body = rows[1:]
        # a process killed mid-append may leave a torn final row; drop it
        if body and len(body[-1]) != ncols:
            body = body[:-1]
        for row in body:
            if len(row) != ncols:
                raise TableCorruptError(
                    f"{name}: row with {len(row)} columns, expected {ncols}")
        return body

    def _append_rows(self, name: str, rows: list[list[str]]) -> None:
        payload = _encode_rows(rows)
        with open(self.path / name, "a", encoding="utf-8", newline="") as f:
            f.write(payload)
            f.flush()

    def _rewrite(self, name: str, header: list[str], rows: list[list[str]]) -> None:
        tmp = self.path / (name + ".tmp")
        with open(tmp, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            writer.writerows(rows)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, self.path / name)

    # -- references --------------------------------------------------------

    def records(self) -> list[Record]:
        return list(self._records_by_id().values())

    def _records_by_id(self) -> dict[str, Record]:
        path = self.path / _REFERENCES
        st = path.stat()
        key = (st.st_mtime, st.st_size)
        if self._ref_cache and self._ref_cache[0] == key:
            return self._ref_cache[1]
        recs = {}
        for row in self._read_rows(_REFERENCES, len(REF_COLUMNS)):
            rec = Record.from_row(row)
            recs[rec.ref_id] = rec
        self._ref_cache = (key, recs)
        return recs

    def record(self, ref_id: str) -> Record:
        try:
            return self._records_by_id()[ref_id]
        except KeyError:
            raise UnknownRefError(f"unknown ref_id {ref_id!r}") from None

    def has_record(self, ref_id: str) -> bool:
        return ref_id in self._records_by_id()

    def next_ref_number(self) -> int:
        recs = self._records_by_id()
        if not recs:
            return 1
        return max(int(r) for r in recs) + 1

    def append_records(self, records: list[Record]) -> None:
        """Atomically add ``records``; on failure nothing is visible."""
        if not records:
            return
        with self.locked_write():
            existing = self._records_by_id()
            for rec in records:
                if rec.ref_id in existing:
                    raise ValidationError(f"duplicate ref_id {rec.ref_id}")
                if not _REF_ID_RE.match(rec.ref_id):
                    raise ValidationError(f"malformed ref_id {rec.ref_id!r}")
                if not rec.title.strip():
                    raise ValidationError(f"{rec.ref_id}: empty title")
            rows = [r.to_row() for r in existing.values()]
            rows.extend(r.to_row() for r in records)
            self._rewrite(_REFERENCES, REF_COLUMNS, rows)
        self._ref_cache = None

    def rewrite_records(self, records: list[Record]) -> None:
        """Replace the references table (assignment writer). Row set must be
        identical; only mutable columns may change."""
        with self.locked_write():
            existing = self._records_by_id()
            if {r.ref_id for r in records} != set(existing):
                raise ValidationError("rewrite must preserve the record set")
            self._rewrite(_REFERENCES, REF_COLUMNS, [r.to_row() for r in records])
        self._ref_cache = None

    # -- decisions ----------------------------------------------------------

    def decisions(self) -> list[Decision]:
        return [Decision.from_row(r)
                for r in self._read_rows(_DECISIONS, len(DECISION_COLUMNS))]

    def _last_decision_number(self) -> int:
        """Scan the file tail for the last decision id; O(1) in log size.
        Decision cells are newline-free (append sanitizes them), so every
        physical line past the possibly-torn first one is a complete row."""
        path = self.path / _DECISIONS
        size = path.stat().st_size
        offset = max(0, size - 65536)
        with open(path, "rb") as f:
            f.seek(offset)
            chunk = f.read().decode("utf-8", errors="replace")
        if offset:
            chunk = chunk[chunk.find("\n") + 1:]
        last = 0
        for row in csv.reader(io.StringIO(chunk)):
            if row and _DECISION_ID_RE.match(row[0]):
                last = max(last, int(row[0][1:]))
        return last

    def append_decision(self, d: Decision, timeout: float = 30.0) -> str:
        """Validate, assign a fresh decision_id (and timestamp if empty),
        append with an immediate flush, and return the id."""
        if d.decision not in DECISION_VALUES:
            raise ValidationError(f"bad decision value {d.decision!r}")
        if not d.reviewer_id or _CONTROL_RE.search(d.reviewer_id):
            raise ValidationError("reviewer_id must be non-empty plain text")
        if not self.has_record(d.ref_id):
            raise UnknownRefError(f"unknown ref_id {d.ref_id!r}")
        if d.reviewer_id.startswith(LLM_REVIEWER_PREFIX):
            eid = d.reviewer_id[len(LLM_REVIEWER_PREFIX):]
            if not self._execution_exists(eid):
                raise UnknownExecutionError(
                    f"reviewer {d.reviewer_id!r} names no logged execution")
        with self.locked_write(timeout):
            n = self._last_decision_number() + 1
            row = replace(
                d,
                decision_id=f"d{n:07d}",
                timestamp=d.timestamp or utc_now(),
                # one physical line per row keeps the id tail-scan exact
                reason=_flatten(d.reason),
                labels=_flatten(d.labels),
                note=_flatten(d.note),
                context_url=_flatten(d.context_url),
            )
            self._append_rows(_DECISIONS, [row.to_row()])
        return row.decision_id

    def decisions_for(self, ref_id: str) -> list[Decision]:
        return [d for d in self.decisions() if d.ref_id == ref_id]

    def effective_status(self, ref_id: str, scope: str = "all") -> str:
        """Current status of one record.

        scope="all" reduces over every reviewer's latest decision; a reviewer id
        scopes to that reviewer alone. Reviewers whose latest row is "pending"
        have withdrawn their judgment and are ignored by the reduction.
        """
        if not self.has_record(ref_id):
            raise UnknownRefError(f"unknown ref_id {ref_id!r}")
        return self.effective_statuses(scope).get(ref_id, "pending")

    def effective_statuses(self, scope: str = "all") -> dict[str, str]:
        """Status for every record in one pass over the decision log."""
        latest: dict[tuple[str, str], Decision] = {}
        for d in self.decisions():
            if scope != "all" and d.reviewer_id != scope:
                continue
            key = (d.ref_id, d.reviewer_id)
            cur = latest.get(key)
            if cur is None or _decision_sort_key(d) > _decision_sort_key(cur):
                latest[key] = d
        per_ref: dict[str, set[str]] = {}
        for (ref_id, _), d in latest.items():
            if d.decision != "pending":
                per_ref.setdefault(ref_id, set()).add(d.decision)
        out = {}
        for ref_id in self._records_by_id():
            values = per_ref.get(ref_id)
            if not values:
                out[ref_id] = "pending"
            elif len(values) == 1:
                out[ref_id] = next(iter(values))
            else:
                out[ref_id] = "conflict"
        return out

    def detect_conflicts(self) -> list[str]:
        statuses = self.effective_statuses()
        return sorted(r for r, s in statuses.items() if s == "conflict")

    # -- config -------------------------------------------------------------

    def _config_rows(self) -> dict[str, str]:
        return {row[0]: row[1]
                for row in self._read_rows(_CONFIG, len(CONFIG_COLUMNS))}

    def config_get(self, key: str) -> str | None:
        stored = self._config_rows()
        if key in stored:
            return stored[key]
        if key in CONFIG_KEYS:
            return CONFIG_KEYS[key][0]
        return None

    def config_all(self) -> dict[str, str]:
        merged = {k: default for k, (default, _) in CONFIG_KEYS.items()}
        merged.update(self._config_rows())
        return merged

    def config_set(self, key: str, value: str) -> None:
        if key not in CONFIG_KEYS:
            raise ConfigKeyError(f"unrecognized config key {key!r}")
        CONFIG_KEYS[key][1](value)
        with self.locked_write():
            rows = self._config_rows()
            rows[key] = value
            self._rewrite(_CONFIG, CONFIG_COLUMNS,
                          [[k, v] for k, v in sorted(rows.items())])

    # -- executions ----------------------------------------------------------

    def executions(self) -> list[ExecutionLog]:
        return [ExecutionLog.from_row(r)
                for r in self._read_rows(_EXECUTIONS, len(EXECUTION_COLUMNS))]

    def _execution_exists(self, execution_id: str) -> bool:
        return any(e.execution_id == execution_id for e in self.executions())

    def execution(self, execution_id: str) -> ExecutionLog:
        for e in self.executions():
            if e.execution_id == execution_id:
                return e
        raise UnknownExecutionError(f"unknown execution {execution_id!r}")

    def next_execution_id(self) -> str:
        ids = [int(e.execution_id[1:]) for e in self.executions()
               if re.match(r"^e\d+$", e.execution_id)]
        return f"e{(max(ids) + 1 if ids else 1):04d}"

    def _validate_execution(self, e: ExecutionLog) -> None:
        if e.execution_type not in EXECUTION_TYPES:
            raise ValidationError(f"bad execution_type {e.execution_type!r}")
        if e.thinking_level not in THINKING_LEVELS:
            raise ValidationError(f"bad thinking_level {e.thinking_level!r}")
        if e.confirmation_status not in CONFIRMATION_VALUES:
            raise ValidationError(
                f"bad confirmation_status {e.confirmation_status!r}")
        if not (0.0 <= e.top_p <= 1.0):
            raise ValidationError("top_p outside [0, 1]")
        if not (0.0 <= e.threshold <= 1.0):
            raise ValidationError("threshold outside [0, 1]")
        if min(e.targeted_count, e.included_count, e.excluded_count) < 0:
            raise ValidationError("negative count")
        if e.included_count + e.excluded_count > e.targeted_count:
            raise ValidationError("included + excluded exceeds targeted")

    def log_execution(self, e: ExecutionLog) -> str:
        self._validate_execution(e)
        with self.locked_write():
            if self._execution_exists(e.execution_id):
                raise ValidationError(
                    f"execution id {e.execution_id!r} already logged")
            if e.active:
                # keep the at-most-one-active invariant on the way in
                self._flip_active(e.execution_id, extra=e)
            else:
                self._append_rows(_EXECUTIONS, [e.to_row()])
        return e.execution_id

    _MUTABLE_EXECUTION_FIELDS = {
        "threshold", "targeted_count", "included_count", "excluded_count",
        "confirmation_status", "active",
    }

    def update_execution(self, execution_id: str, **fields) -> ExecutionLog:
        """The only sanctioned row mutation besides the active flag flip."""
        bad = set(fields) - self._MUTABLE_EXECUTION_FIELDS
        if bad:
            raise ValidationError(f"immutable execution fields: {sorted(bad)}")
        with self.locked_write():
            rows = self.executions()
            target = None
            for i, e in enumerate(rows):
                if e.execution_id == execution_id:
                    target = replace(e, **fields)
                    self._validate_execution(target)
                    rows[i] = target
            if target is None:
                raise UnknownExecutionError(f"unknown execution {execution_id!r}")
            if target.active and target.execution_type == "batch_screening":
                rows = [replace(e, active=False)
                        if e.execution_id != execution_id
                        and e.execution_type == "batch_screening" else e
                        for e in rows]
            self._rewrite(_EXECUTIONS, EXECUTION_COLUMNS,
                          [e.to_row() for e in rows])
        return target

    def set_active_execution(self, execution_id: str) -> None:
        """Flip active=true on the target batch run and false on all others."""
        with self.locked_write():
            if not self._execution_exists(execution_id):
                raise UnknownExecutionError(f"unknown execution {execution_id!r}")
            self._flip_active(execution_id)

    def _flip_active(self, execution_id: str, extra: ExecutionLog | None = None) -> None:
        rows = self.executions()
        if extra is not None:
            rows.append(extra)
        out = []
        for e in rows:
            if e.execution_id == execution_id:
                out.append(replace(e, active=True))
            elif e.execution_type == "batch_screening":
                out.append(replace(e, active=False))
            else:
                out.append(e)
        self._rewrite(_EXECUTIONS, EXECUTION_COLUMNS, [e.to_row() for e in out])


# ---------------------------------------------------------------------------
# creation / assignment


def create_project(path: str | Path) -> Project:
    """Initialize a project directory; refuses to touch a non-empty one."""
    p = Path(path)
    if p.exists() and any(p.iterdir()):
        raise ProjectExistsError(f"{p} already exists and is not empty")
    p.mkdir(parents=True, exist_ok=True)
    headers = {
        _REFERENCES: REF_COLUMNS,
        _DECISIONS: DECISION_COLUMNS,
        _EXECUTIONS: EXECUTION_COLUMNS,
    }
    for name, cols in headers.items():
        with open(p / name, "w", encoding="utf-8", newline="") as f:
            csv.writer(f).writerow(cols)
    with open(p / _CONFIG, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CONFIG_COLUMNS)
        for key in sorted(CONFIG_KEYS):
            writer.writerow([key, CONFIG_KEYS[key][0]])
    return Project(p)


def open_project(path: str | Path) -> Project:
    return Project(path)


def assign_screening_sets(project: Project,
                          calibration_size: int | None = None,
                          group_count: int | None = None) -> dict[str, int]:
    """Stamp screening_set on every record: the first ``calibration_size``
    records (ref_id order) go to "calibration" (screened by everyone), the
    remainder round-robin across "group-1".."group-N"."""
    if calibration_size is None:
        calibration_size = int(project.config_get("assign.calibration_size"))
    if group_count is None:
        group_count = int(project.config_get("assign.group_count"))
    if calibration_size < 0:
        raise ValidationError("calibration_size must be >= 0")
    if group_count < 1:
        raise ValidationError("group_count must be >= 1")
    records = sorted(project.records(), key=lambda r: r.ref_id)
    counts: dict[str, int] = {}
    out = []
    for i, rec in enumerate(records):
        if i < calibration_size:
            label = "calibration"
        else:
            label = f"group-{(i - calibration_size) % group_count + 1}"
        counts[label] = counts.get(label, 0) + 1
        out.append(replace(rec, screening_set=label))
    project.rewrite_records(out)
    return counts
