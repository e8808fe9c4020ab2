"""Store behavior: creation, append-only decisions, status reduction,
config validation, execution bookkeeping, crash tolerance."""

import csv
import io
import threading
import time

import pytest
from hypothesis import given, settings, strategies as st

from refscreen import store


def _rec(ref_id, title="t"):
    return store.Record(ref_id=ref_id, title=title, dedup_key=f"title:{ref_id}")


# -- creation ---------------------------------------------------------------


def test_create_writes_four_tables_with_headers(tmp_path):
    p = store.create_project(tmp_path / "p")
    for name in ("references.csv", "decisions.csv", "config.csv",
                 "llm_executions.csv"):
        first = (p.path / name).read_text(encoding="utf-8").splitlines()[0]
        assert "," in first

    rows = list(csv.reader(io.StringIO(
        (p.path / "references.csv").read_text(encoding="utf-8"))))
    assert rows[0] == store.REF_COLUMNS
    assert len(store.REF_COLUMNS) == 19
    assert len(store.DECISION_COLUMNS) == 10
    assert len(store.EXECUTION_COLUMNS) == 15


def test_create_refuses_nonempty_dir(tmp_path):
    d = tmp_path / "p"
    d.mkdir()
    (d / "junk.txt").write_text("x")
    with pytest.raises(store.ProjectExistsError):
        store.create_project(d)


def test_open_requires_all_tables(tmp_path):
    p = store.create_project(tmp_path / "p")
    (p.path / "config.csv").unlink()
    with pytest.raises(store.ProjectNotFoundError):
        store.open_project(p.path)


def test_defaults_are_seeded_into_config(project):
    cfg = project.config_all()
    assert cfg["llm.threshold"] == "0.5"
    assert cfg["stop.n_consecutive"] == "50"
    assert cfg["stop.rule"] == "consecutive"
    assert cfg["assign.group_count"] == "1"
    assert "placebo" in cfg["keywords.include_preset_rct"]
    assert "PRISMA" in cfg["keywords.include_preset_sr"]


# -- references ---------------------------------------------------------------


def test_append_records_validates_ids_and_titles(project):
    project.append_records([_rec("000001")])
    with pytest.raises(store.ValidationError):
        project.append_records([_rec("000001")])  # duplicate id
    with pytest.raises(store.ValidationError):
        project.append_records([_rec("1")])       # malformed id
    with pytest.raises(store.ValidationError):
        project.append_records([_rec("000002", title="")])


def test_record_round_trip_preserves_every_column(project):
    rec = store.Record(
        ref_id="000001", title='Quotes "inside", commas, and\nnewlines',
        abstract="multi\nline", year=2021, authors="A, B; C, D",
        journal="J", volume="1", issue="2", pages="3-4", issn="1234-5678",
        doi="10.1/x", pmid="123", url="https://e.g", source="manual",
        imported_at="2026-01-01T00:00:00.000Z", imported_by="t@x",
        dedup_key="pmid:123", source_file="f.ris", screening_set="group-1")
    project.append_records([rec])
    assert store.open_project(project.path).records()[0] == rec


def test_next_ref_number_continues_after_existing(project):
    project.append_records([_rec("000001"), _rec("000007")])
    assert project.next_ref_number() == 8


def test_rewrite_records_must_preserve_set(project):
    project.append_records([_rec("000001"), _rec("000002")])
    recs = project.records()
    with pytest.raises(store.ValidationError):
        project.rewrite_records(recs[:1])


# -- decisions ---------------------------------------------------------------


def test_decisions_append_and_get_sequential_ids(seeded_project):
    p = seeded_project
    before = (p.path / "decisions.csv").read_bytes()
    d1 = p.append_decision(store.Decision("", "000003", "bob@test", "maybe"))
    after = (p.path / "decisions.csv").read_bytes()
    assert after.startswith(before)
    assert d1 == "d0000003"


def test_append_decision_validates(seeded_project):
    p = seeded_project
    with pytest.raises(store.ValidationError):
        p.append_decision(store.Decision("", "000001", "a@b", "yes"))
    with pytest.raises(store.ValidationError):
        p.append_decision(store.Decision("", "000001", "", "include"))
    with pytest.raises(store.UnknownRefError):
        p.append_decision(store.Decision("", "999999", "a@b", "include"))
    with pytest.raises(store.UnknownExecutionError):
        p.append_decision(store.Decision("", "000001", "llm:e0009", "include"))


def test_decision_free_text_is_flattened_to_one_line(seeded_project):
    p = seeded_project
    p.append_decision(store.Decision("", "000003", "bob@test", "maybe",
                                     reason="line one\nline two",
                                     note="a\r\nb"))
    d = p.decisions()[-1]
    assert d.reason == "line one line two"
    assert d.note == "a b"


def test_effective_status_latest_per_reviewer_wins(seeded_project):
    p = seeded_project
    p.append_decision(store.Decision("", "000001", "alice@test", "exclude"))
    assert p.effective_status("000001") == "exclude"


def test_pending_revocation_removes_reviewer_from_reduction(seeded_project):
    p = seeded_project
    p.append_decision(store.Decision("", "000001", "bob@test", "exclude"))
    assert p.effective_status("000001") == "conflict"
    p.append_decision(store.Decision("", "000001", "bob@test", "pending"))
    assert p.effective_status("000001") == "include"


def test_conflict_needs_two_differing_decisive_values(seeded_project):
    p = seeded_project
    p.append_decision(store.Decision("", "000003", "alice@test", "include"))
    p.append_decision(store.Decision("", "000003", "bob@test", "include"))
    assert p.effective_status("000003") == "include"
    p.append_decision(store.Decision("", "000003", "carol@test", "maybe"))
    assert p.effective_status("000003") == "conflict"
    assert p.detect_conflicts() == ["000003"]


def test_scoped_status_sees_single_reviewer(seeded_project):
    p = seeded_project
    p.append_decision(store.Decision("", "000001", "bob@test", "exclude"))
    assert p.effective_status("000001", scope="alice@test") == "include"
    assert p.effective_status("000001", scope="bob@test") == "exclude"
    assert p.effective_status("000001") == "conflict"


def test_timestamp_then_id_breaks_ordering_ties(project):
    project.append_records([_rec("000001")])
    ts = "2026-01-01T00:00:00.000Z"
    project.append_decision(store.Decision("", "000001", "a@x", "include",
                                           timestamp=ts))
    project.append_decision(store.Decision("", "000001", "a@x", "exclude",
                                           timestamp=ts))
    # identical timestamps: the later decision_id is the later action
    assert project.effective_status("000001") == "exclude"


def test_torn_trailing_decision_row_is_ignored(seeded_project):
    p = seeded_project
    with open(p.path / "decisions.csv", "a", encoding="utf-8", newline="") as f:
        f.write("d9999999,000001,killed@test,inc")  # no newline, short row
    assert p.effective_status("000001") == "include"
    # and the next append still gets a fresh, higher id
    new_id = p.append_decision(store.Decision("", "000004", "a@x", "include"))
    assert new_id == "d10000000"


def test_interior_corruption_raises(seeded_project):
    p = seeded_project
    lines = (p.path / "decisions.csv").read_text(encoding="utf-8").splitlines()
    lines.insert(2, "short,row")
    (p.path / "decisions.csv").write_text("\n".join(lines) + "\n",
                                          encoding="utf-8")
    with pytest.raises(store.TableCorruptError):
        p.decisions()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["r1", "r2", "r3"]),
                          st.sampled_from(store.DECISION_VALUES)),
                max_size=12))
def test_status_reduction_matches_brute_force(tmp_path_factory, history):
    """Invariant: status = reduction over each reviewer's last non-pending
    decision; 0 decisive -> pending, 1 distinct -> it, else conflict."""
    p = store.create_project(tmp_path_factory.mktemp("h") / "p")
    p.append_records([_rec("000001")])
    for reviewer, decision in history:
        p.append_decision(store.Decision("", "000001", reviewer, decision))

    last: dict[str, str] = {}
    for reviewer, decision in history:
        last[reviewer] = decision
    decisive = {v for v in last.values() if v != "pending"}
    expect = ("pending" if not decisive
              else decisive.pop() if len(decisive) == 1 else "conflict")
    assert p.effective_status("000001") == expect


# -- config -------------------------------------------------------------------


def test_config_set_and_get(project):
    project.config_set("stop.n_consecutive", "25")
    assert project.config_get("stop.n_consecutive") == "25"
    fresh = store.open_project(project.path)
    assert fresh.config_get("stop.n_consecutive") == "25"


def test_config_rejects_unknown_key(project):
    with pytest.raises(store.ConfigKeyError):
        project.config_set("nope.key", "1")


@pytest.mark.parametrize("key,bad", [
    ("llm.temperature", "2.5"),
    ("llm.temperature", "abc"),
    ("llm.top_p", "1.2"),
    ("llm.thinking_level", "extreme"),
    ("llm.threshold", "-0.1"),
    ("assign.calibration_size", "-1"),
    ("assign.group_count", "0"),
    ("stop.rule", "vibes"),
    ("stop.n_consecutive", "0"),
    ("stop.target_recall", "1.5"),
])
def test_config_validators_reject(project, key, bad):
    with pytest.raises(store.ConfigValueError):
        project.config_set(key, bad)


# -- executions ---------------------------------------------------------------


def _exec(eid, active=False, etype="batch_screening"):
    return store.ExecutionLog(
        execution_id=eid, execution_type=etype,
        timestamp=store.utc_now(), model_name="m", temperature=1.0,
        top_p=0.95, thinking_level="low", criteria_snapshot="c", prompt="p",
        threshold=0.5, targeted_count=10, active=active)


def test_log_and_fetch_execution(project):
    project.log_execution(_exec("e0001"))
    assert project.execution("e0001").model_name == "m"
    with pytest.raises(store.UnknownExecutionError):
        project.execution("e0002")
    with pytest.raises(store.ValidationError):
        project.log_execution(_exec("e0001"))  # duplicate id


def test_at_most_one_active_batch_execution(project):
    project.log_execution(_exec("e0001", active=True))
    project.log_execution(_exec("e0002", active=True))
    active = [e.execution_id for e in project.executions() if e.active]
    assert active == ["e0002"]
    project.set_active_execution("e0001")
    active = [e.execution_id for e in project.executions() if e.active]
    assert active == ["e0001"]


def test_update_execution_rejects_immutable_fields(project):
    project.log_execution(_exec("e0001"))
    with pytest.raises(store.ValidationError):
        project.update_execution("e0001", model_name="other")
    with pytest.raises(store.ValidationError):
        project.update_execution("e0001", prompt="other")
    updated = project.update_execution("e0001", included_count=4,
                                       excluded_count=6)
    assert (updated.included_count, updated.excluded_count) == (4, 6)


def test_update_execution_validates_counts(project):
    project.log_execution(_exec("e0001"))
    with pytest.raises(store.ValidationError):
        project.update_execution("e0001", included_count=8, excluded_count=8)


def test_execution_float_fields_round_trip(project):
    e = _exec("e0001")
    e.temperature = 0.7
    e.threshold = 0.35
    project.log_execution(e)
    got = store.open_project(project.path).execution("e0001")
    assert got.temperature == 0.7
    assert got.threshold == 0.35


def test_next_execution_id_sequences(project):
    assert project.next_execution_id() == "e0001"
    project.log_execution(_exec("e0001"))
    assert project.next_execution_id() == "e0002"


# -- locking -------------------------------------------------------------------


def test_locked_write_blocks_second_writer(project):
    entered = threading.Event()
    release = threading.Event()

    def hold():
        with project.locked_write():
            entered.set()
            release.wait(5)

    t = threading.Thread(target=hold)
    t.start()
    assert entered.wait(5)
    other = store.open_project(project.path)
    t0 = time.monotonic()
    with pytest.raises(store.ProjectLockedError):
        with other.locked_write(timeout=0.2):
            pass
    assert time.monotonic() - t0 < 5
    release.set()
    t.join()
    # lock is free again
    with other.locked_write(timeout=1):
        pass
