"""Bibliographic ingestion: RIS, NBIB (MEDLINE), PubMed XML, and CSV.

Tag coverage is deliberately narrow; anything outside the maps below is
ignored rather than guessed at.

RIS (record terminator ``ER  -``; continuation lines join with a space):

    TI/T1 title        AB/N2 abstract     PY/Y1 year (first 4-digit run)
    AU    author (repeatable)             JO/T2/JF journal
    VL volume   IS issue   SP/EP pages ("SP-EP")   SN issn
    DO doi      UR url

NBIB / MEDLINE (blank-line-separated blocks; continuations are indented):

    PMID pmid   TI title    AB abstract    DP year (first 4-digit run)
    FAU/AU authors   JT journal   VI volume   IP issue   PG pages
    IS issn     AID/LID with a ``[doi]`` suffix -> doi

PubMed XML (``PubmedArticle`` elements): ArticleTitle; AbstractText sections
concatenated in document order with Label attributes prefixed as "LABEL: ";
PubDate/Year; AuthorList; Journal/Title; Volume; Issue; MedlinePgn; ISSN;
ArticleId IdType="doi"/"pubmed".

CSV: header matched case-insensitively against the references-table column
names, plus the aliases "ti" -> title and "ab" -> abstract. A missing title
column is a schema error; unknown columns are ignored.
"""

from __future__ import annotations

import csv
import io
import re
import unicodedata
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from . import store

FORMATS = ("ris", "nbib", "pubmed_xml", "csv")

MAX_SERIALIZED_AUTHORS = 10

EXPORT_FORMATS = ("csv", "ris")
EXPORT_SCOPES = ("all",) + store.STATUS_VALUES


class IngestError(Exception):
    """Base class for ingestion failures."""


class EncodingError(IngestError):
    pass


class EmptyInputError(IngestError):
    pass


class CsvSchemaError(IngestError):
    pass


class DedupKeyError(IngestError):
    pass


@dataclass
class RecordDraft:
    """A parsed reference before import assigns identity."""
    title: str = ""
    abstract: str = ""
    year: int | None = None
    authors: list[str] = field(default_factory=list)
    journal: str = ""
    volume: str = ""
    issue: str = ""
    pages: str = ""
    issn: str = ""
    doi: str | None = None
    pmid: str | None = None
    url: str = ""
    source: str = ""


@dataclass
class ImportReport:
    imported_count: int
    duplicate_count: int
    rejected_count: int
    # (incoming draft index, existing ref_id, shared dedup_key)
    duplicates: list[tuple[int, str, str]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# normalization and dedup keys


_BRACKETED_RE = re.compile(r"\[[^\[\]]*\]")


def normalize_title(title: str) -> str:
    """NFKC, strip ``[...]`` annotation segments, lowercase, map every
    non-alphanumeric character to a space, collapse whitespace. Idempotent.
    Parenthesized text is kept (the parentheses themselves become spaces);
    stripping it would merge distinct titles."""
    text = unicodedata.normalize("NFKC", title).lower()
    while True:
        text, n = _BRACKETED_RE.subn(" ", text)
        if not n:
            break
    text = "".join(ch if ch.isalnum() else " " for ch in text)
    return " ".join(text.split())


def make_dedup_key(pmid: str | None, doi: str | None, title: str | None) -> str:
    """Identity key with precedence pmid > doi > normalized title."""
    if pmid:
        return f"pmid:{pmid}"
    if doi:
        return f"doi:{doi.lower()}"
    normalized = normalize_title(title or "")
    if not normalized:
        raise DedupKeyError(
            "cannot derive a dedup key: pmid, doi, and title are all absent")
    return f"title:{normalized}"


def serialize_authors(authors: list[str]) -> str:
    names = [a.strip() for a in authors if a.strip()]
    if len(names) <= MAX_SERIALIZED_AUTHORS:
        return "; ".join(names)
    return "; ".join(names[:MAX_SERIALIZED_AUTHORS]) + "; et al."


def split_authors(serialized: str) -> list[str]:
    return [part.strip() for part in serialized.split(";") if part.strip()]


_YEAR_RE = re.compile(r"\d{4}")


def _extract_year(text: str) -> int | None:
    m = _YEAR_RE.search(text or "")
    return int(m.group(0)) if m else None


def _clean_pmid(value: str | None) -> str | None:
    value = (value or "").strip()
    return value if value.isdigit() else None


# ---------------------------------------------------------------------------
# parsing


def parse_records(data: bytes, fmt: str) -> list[RecordDraft]:
    """Parse ``data`` in the named format into drafts, order preserved."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise EncodingError(f"input is not valid UTF-8: {exc}") from None
    if fmt == "ris":
        drafts = _parse_ris(text)
    elif fmt == "nbib":
        drafts = _parse_nbib(text)
    elif fmt == "pubmed_xml":
        drafts = _parse_pubmed_xml(text)
    else:
        drafts = _parse_csv(text)
    if not drafts:
        raise EmptyInputError(f"no records found in {fmt} input")
    return drafts


_RIS_TAG_RE = re.compile(r"^([A-Z][A-Z0-9])  -\s?(.*)$")


def _parse_ris(text: str) -> list[RecordDraft]:
    drafts: list[RecordDraft] = []
    fields: dict[str, list[str]] = {}
    last_tag: str | None = None

    def flush():
        nonlocal fields, last_tag
        if fields:
            drafts.append(_draft_from_ris(fields))
        fields = {}
        last_tag = None

    for line in text.splitlines():
        m = _RIS_TAG_RE.match(line)
        if m:
            tag, value = m.group(1), m.group(2).strip()
            if tag == "ER":
                flush()
                continue
            fields.setdefault(tag, []).append(value)
            last_tag = tag
        elif line.strip() and last_tag:
            values = fields[last_tag]
            values[-1] = (values[-1] + " " + line.strip()).strip()
    flush()  # tolerate a trailing record missing its terminator
    return drafts


def _first(fields: dict[str, list[str]], *tags: str) -> str:
    for tag in tags:
        for value in fields.get(tag, []):
            if value:
                return value
    return ""


def _draft_from_ris(f: dict[str, list[str]]) -> RecordDraft:
    sp, ep = _first(f, "SP"), _first(f, "EP")
    if sp and ep:
        pages = f"{sp}-{ep}"
    else:
        pages = sp or ep
    return RecordDraft(
        title=_first(f, "TI", "T1").strip(),
        abstract=_first(f, "AB", "N2").strip(),
        year=_extract_year(_first(f, "PY", "Y1")),
        authors=[a.strip() for a in f.get("AU", []) if a.strip()],
        journal=_first(f, "JO", "T2", "JF"),
        volume=_first(f, "VL"),
        issue=_first(f, "IS"),
        pages=pages,
        issn=_first(f, "SN"),
        doi=_first(f, "DO") or None,
        pmid=None,
        url=_first(f, "UR"),
    )


_MEDLINE_TAG_RE = re.compile(r"^([A-Z0-9]{1,4})\s*- (.*)$")


def _parse_nbib(text: str) -> list[RecordDraft]:
    drafts = []
    for block in re.split(r"\n\s*\n", text):
        fields: dict[str, list[str]] = {}
        last_tag = None
        for line in block.splitlines():
            m = _MEDLINE_TAG_RE.match(line)
            if m:
                tag, value = m.group(1), m.group(2).strip()
                fields.setdefault(tag, []).append(value)
                last_tag = tag
            elif line.startswith(" ") and line.strip() and last_tag:
                values = fields[last_tag]
                values[-1] = (values[-1] + " " + line.strip()).strip()
        if fields:
            drafts.append(_draft_from_medline(fields))
    return drafts


def _medline_doi(f: dict[str, list[str]]) -> str | None:
    for tag in ("AID", "LID"):
        for value in f.get(tag, []):
            if value.lower().endswith("[doi]"):
                return value[: -len("[doi]")].strip()
    return None


def _draft_from_medline(f: dict[str, list[str]]) -> RecordDraft:
    authors = [a.strip() for a in f.get("FAU", []) if a.strip()]
    if not authors:
        authors = [a.strip() for a in f.get("AU", []) if a.strip()]
    return RecordDraft(
        title=_first(f, "TI").strip(),
        abstract=_first(f, "AB").strip(),
        year=_extract_year(_first(f, "DP")),
        authors=authors,
        journal=_first(f, "JT"),
        volume=_first(f, "VI"),
        issue=_first(f, "IP"),
        pages=_first(f, "PG"),
        issn=_first(f, "IS"),
        doi=_medline_doi(f),
        pmid=_clean_pmid(_first(f, "PMID")),
        url="",
        source="PubMed",
    )


def _element_text(el) -> str:
    return "".join(el.itertext()).strip() if el is not None else ""


def _parse_pubmed_xml(text: str) -> list[RecordDraft]:
    try:
        # bytes keep ET happy when the document carries an encoding declaration
        root = ET.fromstring(text.encode("utf-8"))
    except ET.ParseError as exc:
        raise IngestError(f"malformed XML: {exc}") from None
    articles = [root] if root.tag == "PubmedArticle" else list(
        root.iter("PubmedArticle"))
    drafts = []
    for art in articles:
        parts = []
        for ab in art.findall(".//Abstract/AbstractText"):
            value = _element_text(ab)
            label = ab.get("Label")
            if label:
                value = f"{label}: {value}"
            if value:
                parts.append(value)
        authors = []
        for author in art.findall(".//AuthorList/Author"):
            collective = author.findtext("CollectiveName")
            last = author.findtext("LastName")
            fore = author.findtext("ForeName")
            if collective:
                authors.append(collective.strip())
            elif last and fore:
                authors.append(f"{last.strip()}, {fore.strip()}")
            elif last:
                authors.append(last.strip())
        doi = pmid = None
        for aid in art.findall(".//ArticleIdList/ArticleId"):
            kind = aid.get("IdType")
            if kind == "doi" and aid.text:
                doi = aid.text.strip()
            elif kind == "pubmed" and aid.text:
                pmid = aid.text.strip()
        if pmid is None:
            pmid = (art.findtext(".//MedlineCitation/PMID")
                    or art.findtext("PMID") or "").strip() or None
        drafts.append(RecordDraft(
            title=_element_text(art.find(".//ArticleTitle")),
            abstract=" ".join(parts),
            year=_extract_year(art.findtext(".//PubDate/Year") or ""),
            authors=authors,
            journal=art.findtext(".//Journal/Title", "").strip(),
            volume=art.findtext(".//JournalIssue/Volume", "").strip(),
            issue=art.findtext(".//JournalIssue/Issue", "").strip(),
            pages=art.findtext(".//Pagination/MedlinePgn", "").strip(),
            issn=art.findtext(".//Journal/ISSN", "").strip(),
            doi=doi,
            pmid=_clean_pmid(pmid),
            url="",
            source="PubMed",
        ))
    return drafts


_CSV_ALIASES = {"ti": "title", "ab": "abstract"}
_CSV_FIELDS = ("title", "abstract", "year", "authors", "journal", "volume",
               "issue", "pages", "issn", "doi", "pmid", "url", "source")


def _parse_csv(text: str) -> list[RecordDraft]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise CsvSchemaError("CSV input has no header row")
    colmap: dict[int, str] = {}
    for i, name in enumerate(rows[0]):
        key = name.strip().lower()
        key = _CSV_ALIASES.get(key, key)
        if key in _CSV_FIELDS and key not in colmap.values():
            colmap[i] = key
    if "title" not in colmap.values():
        raise CsvSchemaError(
            "CSV input lacks a title column (accepted: title or ti)")
    drafts = []
    for row in rows[1:]:
        if not any(cell.strip() for cell in row):
            continue
        cells = {name: row[i].strip() if i < len(row) else ""
                 for i, name in colmap.items()}
        drafts.append(RecordDraft(
            title=cells.get("title", ""),
            abstract=cells.get("abstract", ""),
            year=_extract_year(cells.get("year", "")),
            authors=split_authors(cells.get("authors", "")),
            journal=cells.get("journal", ""),
            volume=cells.get("volume", ""),
            issue=cells.get("issue", ""),
            pages=cells.get("pages", ""),
            issn=cells.get("issn", ""),
            doi=cells.get("doi") or None,
            pmid=_clean_pmid(cells.get("pmid")),
            url=cells.get("url", ""),
            source=cells.get("source", ""),
        ))
    return drafts


# ---------------------------------------------------------------------------
# import / export


def import_batch(drafts: list[RecordDraft], project: store.Project,
                 importer: str, source_file: str) -> ImportReport:
    """Deduplicate against the project and earlier drafts in this batch
    (first occurrence wins), assign sequential ref_ids, and append atomically:
    either the whole batch lands or none of it does."""
    existing = {rec.dedup_key: rec.ref_id for rec in project.records()}
    imported: list[store.Record] = []
    duplicates: list[tuple[int, str, str]] = []
    rejected = 0
    next_number = project.next_ref_number()
    now = store.utc_now()
    for index, draft in enumerate(drafts):
        title = draft.title.strip()
        if not title:
            rejected += 1
            continue
        key = make_dedup_key(draft.pmid, draft.doi, title)
        if key in existing:
            duplicates.append((index, existing[key], key))
            continue
        ref_id = store.format_ref_id(next_number)
        next_number += 1
        existing[key] = ref_id
        imported.append(store.Record(
            ref_id=ref_id,
            title=title,
            abstract=draft.abstract,
            year=draft.year,
            authors=serialize_authors(draft.authors),
            journal=draft.journal,
            volume=draft.volume,
            issue=draft.issue,
            pages=draft.pages,
            issn=draft.issn,
            doi=draft.doi or "",
            pmid=draft.pmid or "",
            url=draft.url,
            source=draft.source,
            imported_at=now,
            imported_by=importer,
            dedup_key=key,
            source_file=source_file,
            screening_set="",
        ))
    project.append_records(imported)
    return ImportReport(len(imported), len(duplicates), rejected, duplicates)


def export_records(project: store.Project, fmt: str, scope: str = "all") -> str:
    """Render the project's records in ``fmt``, filtered by effective status."""
    if fmt not in EXPORT_FORMATS:
        raise ValueError(f"unknown export format {fmt!r}")
    if scope not in EXPORT_SCOPES:
        raise ValueError(f"unknown export scope {scope!r}")
    statuses = project.effective_statuses()
    records = sorted(project.records(), key=lambda r: r.ref_id)
    if scope != "all":
        records = [r for r in records if statuses[r.ref_id] == scope]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(store.REF_COLUMNS + ["final_decision"])
        for rec in records:
            writer.writerow(rec.to_row() + [statuses[rec.ref_id]])
        return buf.getvalue()
    blocks = [_ris_block(rec) for rec in records]
    return "\n".join(blocks)


def _ris_block(rec: store.Record) -> str:
    lines = ["TY  - JOUR"]

    def add(tag: str, value: str):
        if value:
            lines.append(f"{tag}  - {value}")

    add("TI", rec.title)
    add("AB", rec.abstract)
    if rec.year is not None:
        add("PY", str(rec.year))
    for name in split_authors(rec.authors):
        add("AU", name)
    add("JO", rec.journal)
    add("VL", rec.volume)
    add("IS", rec.issue)
    if "-" in rec.pages:
        sp, ep = rec.pages.split("-", 1)
        add("SP", sp)
        add("EP", ep)
    else:
        add("SP", rec.pages)
    add("SN", rec.issn)
    add("DO", rec.doi)
    add("UR", rec.url)
    lines.append("ER  - ")
    return "\n".join(lines) + "\n"
