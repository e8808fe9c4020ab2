"""HTTP facade over a project store.

Single-process, local-first: every request opens against one Project held by
the app. Writes go through the store's lock; the service adds no state of its
own beyond background batch bookkeeping, so anything the API reports can be
reproduced from the four tables.

Blind mode scopes every status computation to the requesting reviewer so a
second screener cannot see the first screener's calls.
"""

from __future__ import annotations

import json
import re
import threading
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from . import evaluation, ingest, llm, ranker, stopping, store

DEFAULT_REVIEWER = "reviewer@local"


def _keyword_list(raw: str) -> list[str]:
    return [part.strip() for part in raw.split(",") if part.strip()]


def include_keywords(project: store.Project) -> list[str]:
    """RCT preset + review preset + custom include terms, deduplicated."""
    seen: dict[str, None] = {}
    for key in ("keywords.include_preset_rct", "keywords.include_preset_sr",
                "keywords.custom_include"):
        for kw in _keyword_list(project.config_get(key)):
            seen.setdefault(kw.lower(), None)
    return list(seen)


def exclude_keywords(project: store.Project) -> list[str]:
    seen: dict[str, None] = {}
    for kw in _keyword_list(project.config_get("keywords.custom_exclude")):
        seen.setdefault(kw.lower(), None)
    return list(seen)


def compute_highlights(text: str, include: list[str],
                       exclude: list[str]) -> list[dict]:
    """Case-insensitive spans of every keyword occurrence in ``text``.
    Overlapping occurrences are all reported; offsets are Unicode scalar
    positions into ``text``."""
    spans = []
    for kind, keywords in (("include", include), ("exclude", exclude)):
        for kw in keywords:
            if not kw:
                continue
            # lookahead so back-to-back and overlapping hits both surface
            for m in re.finditer(f"(?=({re.escape(kw)}))", text, re.IGNORECASE):
                spans.append({"start": m.start(1), "end": m.start(1) + len(kw),
                              "kind": kind, "keyword": kw})
    spans.sort(key=lambda s: (s["start"], s["end"], s["kind"]))
    return spans


def _record_payload(record: store.Record, status: str,
                    include: list[str], exclude: list[str]) -> dict:
    text = ranker.build_corpus_text(record)
    return {
        "ref_id": record.ref_id,
        "title": record.title,
        "abstract": record.abstract,
        "year": record.year,
        "authors": ingest.split_authors(record.authors),
        "journal": record.journal,
        "doi": record.doi,
        "pmid": record.pmid,
        "url": record.url,
        "screening_set": record.screening_set,
        "status": status,
        "highlights": compute_highlights(text, include, exclude),
    }


def _statuses(project: store.Project, blind: bool, reviewer: str) -> dict[str, str]:
    return project.effective_statuses(reviewer if blind else "all")


def create_app(project_path: str | Path, *, blind: bool = False,
               default_reviewer: str = DEFAULT_REVIEWER,
               ui_dir: str | Path | None = None) -> FastAPI:
    project = store.open_project(project_path)
    app = FastAPI(title="refscreen", docs_url=None, redoc_url=None)
    app.state.project = project
    app.state.blind = blind
    app.state.batch_thread = None
    app.state.batch_error = None

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(store.ValidationError)
    async def _validation_error(request: Request, exc: store.ValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(store.ConfigKeyError)
    async def _config_key_error(request: Request, exc: store.ConfigKeyError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(store.ConfigValueError)
    async def _config_value_error(request: Request, exc: store.ConfigValueError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(store.UnknownRefError)
    async def _unknown_ref(request: Request, exc: store.UnknownRefError):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(store.UnknownExecutionError)
    async def _unknown_execution(request: Request, exc: store.UnknownExecutionError):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(store.ProjectLockedError)
    async def _locked(request: Request, exc: store.ProjectLockedError):
        return JSONResponse(status_code=423, content={"error": str(exc)})

    @app.exception_handler(llm.JudgmentParseError)
    async def _parse_error(request: Request, exc: llm.JudgmentParseError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    def reviewer_of(request: Request) -> str:
        return request.headers.get("x-reviewer", default_reviewer)

    @app.get("/api/health")
    def health():
        return {"status": "ok", "records": len(project.records())}

    @app.get("/api/records")
    def records(request: Request, status: str | None = None,
                set: str | None = Query(default=None)):
        if status is not None and status not in store.STATUS_VALUES:
            raise ValueError(f"unknown status {status!r}")
        statuses = _statuses(project, blind, reviewer_of(request))
        inc, exc = include_keywords(project), exclude_keywords(project)
        out = []
        for record in project.records():
            st = statuses.get(record.ref_id, "pending")
            if status is not None and st != status:
                continue
            if set is not None and record.screening_set != set:
                continue
            out.append(_record_payload(record, st, inc, exc))
        return {"records": out, "total": len(out)}

    @app.get("/api/records/{ref_id}")
    def one_record(request: Request, ref_id: str):
        record = next((r for r in project.records() if r.ref_id == ref_id), None)
        if record is None:
            raise store.UnknownRefError(f"unknown ref_id {ref_id!r}")
        statuses = _statuses(project, blind, reviewer_of(request))
        return _record_payload(record, statuses.get(ref_id, "pending"),
                               include_keywords(project),
                               exclude_keywords(project))

    @app.get("/api/queue")
    def queue(request: Request, mode: str = "manual",
              set: str | None = Query(default=None),
              limit: int = 50):
        """Pending records in screening order: import order for manual mode,
        model-certainty order for ml mode (import order + a flag while the
        model is still cold)."""
        if mode not in ("manual", "ml"):
            raise ValueError(f"unknown queue mode {mode!r}")
        statuses = _statuses(project, blind, reviewer_of(request))
        pending = [r for r in project.records()
                   if statuses.get(r.ref_id, "pending") == "pending"
                   and (set is None or r.screening_set == set)]
        cold_start = False
        if mode == "ml":
            snapshot = ranker.snapshot_from_project(project)
            snapshot.candidates = [r.ref_id for r in pending]
            try:
                ranked = ranker.rank_unlabeled(snapshot)
                order = {ref: i for i, (ref, _) in enumerate(ranked)}
                scores = dict(ranked)
                pending.sort(key=lambda r: order.get(r.ref_id, len(order)))
            except ranker.ColdStartError:
                cold_start = True
                scores = {}
        else:
            scores = {}
        inc, exc = include_keywords(project), exclude_keywords(project)
        items = []
        for record in pending[:max(limit, 0)]:
            payload = _record_payload(record, "pending", inc, exc)
            if record.ref_id in scores:
                payload["score"] = scores[record.ref_id]
            items.append(payload)
        return {"queue": items, "pending_total": len(pending),
                "mode": mode, "cold_start": cold_start}

    @app.post("/api/decisions")
    async def post_decision(request: Request):
        body = await request.json()
        for key in ("ref_id", "decision"):
            if not body.get(key):
                raise ValueError(f"missing field {key!r}")
        reviewer = body.get("reviewer_id") or reviewer_of(request)
        decision_id = project.append_decision(store.Decision(
            decision_id="",
            ref_id=body["ref_id"],
            reviewer_id=reviewer,
            decision=body["decision"],
            reason=body.get("reason", ""),
            labels=body.get("labels", ""),
            note=body.get("note", ""),
            client_version=llm._client_version(),
            context_url=body.get("context_url", ""),
        ))
        statuses = _statuses(project, blind, reviewer)
        return {"decision_id": decision_id,
                "status": statuses.get(body["ref_id"], "pending")}

    @app.get("/api/decisions")
    def decisions(request: Request, ref_id: str | None = None):
        rows = project.decisions()
        reviewer = reviewer_of(request)
        out = []
        for d in rows:
            if ref_id is not None and d.ref_id != ref_id:
                continue
            if blind and d.reviewer_id != reviewer and not \
                    d.reviewer_id.startswith(store.LLM_REVIEWER_PREFIX):
                continue
            out.append({
                "decision_id": d.decision_id, "ref_id": d.ref_id,
                "reviewer_id": d.reviewer_id, "decision": d.decision,
                "reason": d.reason, "labels": d.labels, "note": d.note,
                "timestamp": d.timestamp,
            })
        return {"decisions": out}

    @app.get("/api/conflicts")
    def conflicts():
        if blind:
            # surfacing disagreement would leak the other reviewer's calls
            return {"conflicts": []}
        conflicted = set(project.detect_conflicts())
        latest: dict[tuple[str, str], store.Decision] = {}
        for d in project.decisions():
            if d.ref_id in conflicted:
                latest[(d.ref_id, d.reviewer_id)] = d
        votes: dict[str, list[dict]] = {r: [] for r in conflicted}
        for (ref_id, reviewer), d in sorted(latest.items()):
            if d.decision != "pending":
                votes[ref_id].append({"reviewer_id": reviewer,
                                      "decision": d.decision,
                                      "reason": d.reason})
        return {"conflicts": [{"ref_id": r, "votes": votes[r]}
                              for r in sorted(conflicted)]}

    @app.get("/api/stopping")
    def stopping_state():
        config = stopping.StoppingConfig(
            rule=project.config_get("stop.rule"),
            n_consecutive=int(project.config_get("stop.n_consecutive")),
            target_recall=float(project.config_get("stop.target_recall")),
            confidence=float(project.config_get("stop.confidence")),
        )
        trajectory = stopping.trajectory_from_project(project)
        stop, p_value = stopping.evaluate(trajectory, config)
        return {
            "rule": config.rule,
            "n_consecutive": config.n_consecutive,
            "target_recall": config.target_recall,
            "confidence": config.confidence,
            "screened": len(trajectory.labels),
            "total_records": trajectory.total_records,
            "relevant_found": sum(trajectory.labels),
            "trailing_run": stopping.trailing_irrelevant_run(trajectory.labels),
            "p_value": p_value,
            "stop_recommended": stop,
        }

    @app.get("/api/config")
    def config_all():
        return {"config": project.config_all()}

    @app.put("/api/config/{key}")
    async def config_set(key: str, request: Request):
        body = await request.json()
        if "value" not in body:
            raise ValueError("missing field 'value'")
        project.config_set(key, str(body["value"]))
        return {"key": key, "value": project.config_get(key)}

    @app.post("/api/llm/batch")
    async def llm_batch(request: Request):
        body = await request.json()
        criteria = body.get("criteria") or project.config_get("llm.prompt")
        if not criteria.strip():
            raise ValueError("no screening criteria: pass 'criteria' or set llm.prompt")
        scope = body.get("scope", "pending")
        threshold = body.get("threshold")
        if threshold is not None:
            threshold = float(threshold)
        provider = getattr(app.state, "provider", None)
        if provider is None:
            raise ValueError("no LLM provider configured on this server")
        prompt = llm.build_screening_prompt(
            criteria, project.config_get("llm.output_language"))
        if body.get("sync"):
            execution = llm.run_batch(project, prompt, provider,
                                      scope=scope, threshold=threshold)
            return {"execution_id": execution.execution_id, "state": "done",
                    "included_count": execution.included_count,
                    "excluded_count": execution.excluded_count}
        if app.state.batch_thread is not None and app.state.batch_thread.is_alive():
            raise ValueError("a batch screening run is already in progress")
        execution_id = project.next_execution_id()
        target = llm._batch_scope(project, scope)
        cfg = provider.config
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
            threshold=threshold if threshold is not None
            else float(project.config_get("llm.threshold")),
            targeted_count=len(target),
        ))

        def worker():
            try:
                llm.run_batch(project, prompt, provider, scope=scope,
                              execution_id=execution_id)
            except Exception as exc:  # surfaced via /api/llm/executions
                app.state.batch_error = f"{execution_id}: {exc}"

        thread = threading.Thread(target=worker, daemon=True)
        app.state.batch_thread = thread
        thread.start()
        return {"execution_id": execution_id, "state": "running"}

    @app.get("/api/llm/executions")
    def llm_executions():
        out = []
        for e in project.executions():
            out.append({
                "execution_id": e.execution_id,
                "execution_type": e.execution_type,
                "timestamp": e.timestamp,
                "model_name": e.model_name,
                "temperature": e.temperature,
                "top_p": e.top_p,
                "thinking_level": e.thinking_level,
                "threshold": e.threshold,
                "targeted_count": e.targeted_count,
                "included_count": e.included_count,
                "excluded_count": e.excluded_count,
                "confirmation_status": e.confirmation_status,
                "active": e.active,
            })
        running = (app.state.batch_thread is not None
                   and app.state.batch_thread.is_alive())
        return {"executions": out, "batch_running": running,
                "batch_error": app.state.batch_error}

    @app.get("/api/llm/threshold-preview")
    def preview(execution: str, t: float):
        included, excluded = llm.threshold_preview(project, execution, t)
        return {"execution_id": execution, "threshold": t,
                "would_include": included, "would_exclude": excluded}

    @app.post("/api/llm/confirm")
    async def confirm(request: Request):
        body = await request.json()
        execution_id = body.get("execution_id")
        if not execution_id:
            raise ValueError("missing field 'execution_id'")
        threshold = float(body["threshold"])
        execution = llm.confirm_threshold(project, execution_id, threshold)
        return {"execution_id": execution.execution_id,
                "threshold": execution.threshold,
                "included_count": execution.included_count,
                "excluded_count": execution.excluded_count,
                "confirmation_status": execution.confirmation_status}

    @app.get("/api/llm/judgments/{ref_id}")
    def judgments_for(ref_id: str):
        if not any(r.ref_id == ref_id for r in project.records()):
            raise store.UnknownRefError(f"unknown ref_id {ref_id!r}")
        out = []
        for e in project.executions():
            if e.execution_type != "batch_screening":
                continue
            judgments = llm._judged_refs(project, e.execution_id)
            if ref_id in judgments:
                j = judgments[ref_id]
                out.append({
                    "execution_id": e.execution_id,
                    "active": e.active,
                    "probability": j.probability,
                    "reasons": j.reasons,
                    "evidence": [{"quote": s.quote, "start": s.start,
                                  "end": s.end,
                                  "valid_offsets": s.valid_offsets}
                                 for s in j.evidence],
                })
        return {"ref_id": ref_id, "judgments": out}

    @app.get("/api/metrics")
    def metrics(truth: str):
        truth_labels = evaluation.load_truth_csv(Path(truth))
        statuses = project.effective_statuses()
        predicted = {r: s == "include" for r, s in statuses.items()
                     if s in ("include", "exclude")}
        common = set(predicted) & set(truth_labels)
        if not common:
            raise ValueError("no decided records overlap the truth file")
        report = evaluation.metrics_report(
            {k: truth_labels[k] for k in common},
            {k: predicted[k] for k in common})
        return report.to_dict()

    @app.get("/api/export")
    def export(format: str = "csv", scope: str = "all"):
        data = ingest.export_records(project, fmt=format, scope=scope)
        media = "text/csv" if format == "csv" else "application/x-research-info-systems"
        return PlainTextResponse(content=data, media_type=media)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(project_path: str | Path, *, host: str = "127.0.0.1",
          port: int = 8377, blind: bool = False,
          ui_dir: str | Path | None = None) -> None:
    import uvicorn
    app = create_app(project_path, blind=blind, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
