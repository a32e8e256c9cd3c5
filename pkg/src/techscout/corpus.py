"""Patent corpus ingestion: load, validate, match, and time-bucket records.

Input is flat files rather than a live database. CSV files must carry the
header ``application_id,patent_id,filing_date,patent_date,patent_title,
patent_abstract`` (extra columns are ignored); JSONL files use the same keys,
one object per line. Rows that violate record invariants are rejected with a
reason, never silently dropped.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterator, Mapping, Sequence

LOGGER = logging.getLogger(__name__)

REQUIRED_COLUMNS = (
    "application_id",
    "patent_id",
    "filing_date",
    "patent_date",
    "patent_title",
    "patent_abstract",
)

FORMATS = ("csv", "jsonl")


class CorpusLoadError(Exception):
    """Fatal ingestion problem: missing file, unknown format, or bad header."""


@dataclass(frozen=True)
class PatentRecord:
    """One patent application with its text fields."""

    application_id: str
    patent_id: str
    filing_date: date
    patent_date: date | None
    title: str
    abstract: str

    @property
    def text(self) -> str:
        """Title and abstract joined for embedding; either side may be empty."""
        return " ".join(p for p in (self.title, self.abstract) if p.strip())


@dataclass(frozen=True)
class RejectedRow:
    line_number: int
    reason: str


@dataclass(frozen=True)
class Corpus:
    """Immutable, insertion-ordered collection of validated patent records."""

    records: tuple[PatentRecord, ...]
    source_tag: str = ""

    def __post_init__(self) -> None:
        ids = [r.application_id for r in self.records]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate application_id in corpus")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PatentRecord]:
        return iter(self.records)

    def ids(self) -> "IdList":
        return IdList(tuple(r.application_id for r in self.records))

    def get(self, application_id: str) -> PatentRecord | None:
        return self._index().get(application_id)

    def _index(self) -> dict[str, PatentRecord]:
        return {r.application_id: r for r in self.records}


@dataclass(frozen=True)
class IdList:
    """Duplicate-free ordered collection of opaque string keys."""

    ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.ids) != len(set(self.ids)):
            raise ValueError("duplicate ids in IdList")

    @classmethod
    def from_iterable(cls, values) -> "IdList":
        return cls(tuple(dict.fromkeys(values)))

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self) -> Iterator[str]:
        return iter(self.ids)

    def __contains__(self, value: str) -> bool:
        return value in set(self.ids)


@dataclass(frozen=True)
class LoadResult:
    corpus: Corpus
    rejects: tuple[RejectedRow, ...]


@dataclass(frozen=True)
class ExtractResult:
    corpus: Corpus
    misses: tuple[str, ...]


def _parse_date(value: str, field: str) -> date:
    try:
        return date.fromisoformat(value)
    except ValueError:
        raise ValueError(f"{field} is not an ISO-8601 date: {value!r}")


def _build_record(row: Mapping[str, object]) -> PatentRecord:
    """Validate one raw row; raises ValueError with the rejection reason."""
    application_id = str(row.get("application_id") or "").strip()
    patent_id = str(row.get("patent_id") or "").strip()
    if not application_id:
        raise ValueError("empty application_id")
    if not patent_id:
        raise ValueError("empty patent_id")

    filing_raw = str(row.get("filing_date") or "").strip()
    if not filing_raw:
        raise ValueError("missing filing_date")
    filing = _parse_date(filing_raw, "filing_date")

    patent_raw = str(row.get("patent_date") or "").strip()
    patent_dt = _parse_date(patent_raw, "patent_date") if patent_raw else None

    title = str(row.get("patent_title") or "")
    abstract = str(row.get("patent_abstract") or "")
    if not title.strip() and not abstract.strip():
        raise ValueError("title and abstract are both empty")

    return PatentRecord(application_id, patent_id, filing, patent_dt, title, abstract)


def _iter_csv_rows(path: Path) -> Iterator[tuple[int, Mapping[str, object]]]:
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise CorpusLoadError(f"{path}: missing required columns {missing}")
        for row in reader:
            yield reader.line_num, row


def _iter_jsonl_rows(path: Path) -> Iterator[tuple[int, Mapping[str, object]]]:
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                yield line_number, {"__parse_error__": str(exc)}
                continue
            if not isinstance(row, dict):
                yield line_number, {"__parse_error__": "row is not a JSON object"}
                continue
            yield line_number, row


def load_records(path: str | Path, format: str, source_tag: str = "") -> LoadResult:
    """Load and validate patent records from a CSV or JSONL file.

    Returns all rows passing record invariants plus, separately, the rejected
    rows with line numbers and reasons.
    """
    file_path = Path(path)
    if not file_path.exists():
        raise CorpusLoadError(f"input file not found: {file_path}")
    if format not in FORMATS:
        raise CorpusLoadError(f"unknown format {format!r}; expected one of {FORMATS}")

    rows = _iter_csv_rows(file_path) if format == "csv" else _iter_jsonl_rows(file_path)

    records: list[PatentRecord] = []
    rejects: list[RejectedRow] = []
    seen: set[str] = set()
    for line_number, row in rows:
        parse_error = row.get("__parse_error__")
        if parse_error:
            rejects.append(RejectedRow(line_number, f"invalid JSON: {parse_error}"))
            continue
        try:
            record = _build_record(row)
        except ValueError as exc:
            rejects.append(RejectedRow(line_number, str(exc)))
            continue
        if record.application_id in seen:
            rejects.append(
                RejectedRow(line_number, f"duplicate application_id {record.application_id!r}")
            )
            continue
        seen.add(record.application_id)
        records.append(record)

    if rejects:
        LOGGER.warning("%s: rejected %d of %d rows", file_path, len(rejects), len(records) + len(rejects))
    return LoadResult(Corpus(tuple(records), source_tag or file_path.name), tuple(rejects))


def save_records(corpus: Corpus, path: str | Path, format: str) -> None:
    """Write a corpus back to disk in the same column contract used on load."""
    if format not in FORMATS:
        raise CorpusLoadError(f"unknown format {format!r}; expected one of {FORMATS}")
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    if format == "csv":
        with file_path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(REQUIRED_COLUMNS)
            for r in corpus:
                writer.writerow(
                    [
                        r.application_id,
                        r.patent_id,
                        r.filing_date.isoformat(),
                        r.patent_date.isoformat() if r.patent_date else "",
                        r.title,
                        r.abstract,
                    ]
                )
    else:
        with file_path.open("w", encoding="utf-8", newline="\n") as handle:
            for r in corpus:
                row = {
                    "application_id": r.application_id,
                    "patent_id": r.patent_id,
                    "filing_date": r.filing_date.isoformat(),
                    "patent_date": r.patent_date.isoformat() if r.patent_date else None,
                    "patent_title": r.title,
                    "patent_abstract": r.abstract,
                }
                handle.write(json.dumps(row, ensure_ascii=False) + "\n")


def write_reject_report(rejects: Sequence[RejectedRow], path: str | Path) -> None:
    """Persist rejected rows as JSONL of {line_number, reason}."""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with file_path.open("w", encoding="utf-8", newline="\n") as handle:
        for reject in rejects:
            handle.write(
                json.dumps(
                    {"line_number": reject.line_number, "reason": reject.reason},
                    ensure_ascii=False,
                )
                + "\n"
            )


def match_ids(left: IdList, right: IdList) -> IdList:
    """Set intersection of two ID lists, emitted in sorted order."""
    return IdList(tuple(sorted(set(left.ids) & set(right.ids))))


def extract_fields(matched: IdList, store: Corpus) -> ExtractResult:
    """Sub-corpus of ``store`` restricted to the matched IDs, in store order.

    IDs absent from the store are reported as misses, not errors.
    """
    wanted = set(matched.ids)
    records = tuple(r for r in store if r.application_id in wanted)
    present = {r.application_id for r in records}
    misses = tuple(sorted(wanted - present))
    if misses:
        LOGGER.info("extract_fields: %d matched ids absent from store", len(misses))
    return ExtractResult(Corpus(records, store.source_tag), misses)


def bucket_by_year(corpus: Corpus) -> dict[int, int]:
    """Record counts keyed by the year component of the filing date."""
    counts: dict[int, int] = {}
    for record in corpus:
        year = record.filing_date.year
        counts[year] = counts.get(year, 0) + 1
    return dict(sorted(counts.items()))
