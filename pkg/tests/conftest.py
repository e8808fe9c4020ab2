import pytest

from refscreen import store


@pytest.fixture
def project(tmp_path):
    return store.create_project(tmp_path / "proj")


@pytest.fixture
def seeded_project(project):
    """Project with six records and a couple of human decisions."""
    rows = [
        ("000001", "Randomized trial of drug A in sepsis",
         "A double-blind placebo controlled trial of drug A."),
        ("000002", "Cohort study of drug A exposure",
         "Retrospective cohort, no randomization involved."),
        ("000003", "Systematic review of drug A trials",
         "Meta-analysis following PRISMA with a full search strategy."),
        ("000004", "Case report: drug A overdose",
         "Single patient case report."),
        ("000005", "Randomly assigned diet intervention",
         "Participants were randomly assigned to diet or control."),
        ("000006", "Editorial on sepsis care", ""),
    ]
    project.append_records([
        store.Record(ref_id=r, title=t, abstract=a,
                     imported_at=store.utc_now(), imported_by="seed@test",
                     dedup_key=f"title:{r}")
        for r, t, a in rows
    ])
    project.append_decision(store.Decision("", "000001", "alice@test", "include"))
    project.append_decision(store.Decision("", "000002", "alice@test", "exclude"))
    return project
