"""Admission/note table parsing and 30-day unplanned readmission cohort.

Input tables follow the MIMIC-III ``ADMISSIONS`` and ``NOTEEVENTS`` column
names. Admissions are labeled per hospital admission: the next
non-ELECTIVE admission of the same patient is the candidate readmission,
and the label is positive when it starts within ``window_days`` of the
index discharge.
"""

from __future__ import annotations

import codecs
import csv
import enum
import json
import logging
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import BinaryIO, Iterable, Iterator, Optional

from .errors import ContractError, DataError, ParseError

logger = logging.getLogger(__name__)

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"
SECONDS_PER_DAY = 86400.0

ADMISSION_COLUMNS = (
    "ROW_ID",
    "SUBJECT_ID",
    "HADM_ID",
    "ADMITTIME",
    "DISCHTIME",
    "DEATHTIME",
    "ADMISSION_TYPE",
    "HOSPITAL_EXPIRE_FLAG",
)
NOTE_COLUMNS = ("ROW_ID", "SUBJECT_ID", "HADM_ID", "CATEGORY", "TEXT")
DISCHARGE_SUMMARY = "Discharge summary"


class AdmissionType(str, enum.Enum):
    EMERGENCY = "EMERGENCY"
    URGENT = "URGENT"
    ELECTIVE = "ELECTIVE"
    NEWBORN = "NEWBORN"


@dataclass(frozen=True)
class AdmissionRecord:
    row_id: int
    subject_id: int
    hadm_id: int
    admit_time: datetime
    discharge_time: datetime
    death_time: Optional[datetime]
    admission_type: AdmissionType
    hospital_expire_flag: bool


@dataclass(frozen=True)
class NoteRecord:
    row_id: int
    subject_id: int
    hadm_id: Optional[int]
    category: str
    text: str


@dataclass(frozen=True)
class Subject:
    hadm_id: int
    subject_id: int
    summary_text: str
    label: bool
    interval_days: Optional[float] = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "hadm_id": self.hadm_id,
                "subject_id": self.subject_id,
                "label": self.label,
                "interval_days": self.interval_days,
                "summary_text": self.summary_text,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "Subject":
        interval = d.get("interval_days")
        return cls(
            hadm_id=int(d["hadm_id"]),
            subject_id=int(d["subject_id"]),
            summary_text=d["summary_text"],
            label=bool(d["label"]),
            interval_days=None if interval is None else float(interval),
        )


@dataclass
class CohortStats:
    input_admissions: int = 0
    newborn: int = 0
    expired: int = 0
    no_summary: int = 0
    multiple_summaries: int = 0
    retained_count: int = 0
    positive_count: int = 0
    window_days: int = 30
    interval_histogram: list = field(default_factory=list)

    @property
    def excluded(self) -> int:
        return self.newborn + self.expired + self.no_summary + self.multiple_summaries

    def to_dict(self) -> dict:
        d = asdict(self)
        d["interval_histogram"] = [
            {"bucket_days": b, "count": c} for b, c in self.interval_histogram
        ]
        return d


# ---------------------------------------------------------------------------
# CSV reading


def _records_with_offsets(stream: BinaryIO, source=None) -> Iterator[tuple[int, int, list[str]]]:
    """Yield ``(line_number, byte_offset, fields)`` for every CSV record.

    ``line_number`` and ``byte_offset`` refer to the first physical line of
    the record, so multi-line quoted fields report where the record began.
    """
    decoder = codecs.getincrementaldecoder("utf-8-sig")()
    position = {"offset": 0, "line": 0}

    def lines():
        for raw in stream:
            position["offset"] += len(raw)
            position["line"] += 1
            yield decoder.decode(raw)

    reader = csv.reader(lines(), strict=True)
    start_offset, start_line = 0, 1
    while True:
        try:
            fields = next(reader)
        except StopIteration:
            return
        except csv.Error as exc:
            raise ParseError(
                f"malformed CSV record starting on line {start_line}: {exc}",
                offset=start_offset,
                source=source,
            ) from None
        except UnicodeDecodeError as exc:
            raise ParseError(f"invalid UTF-8: {exc}", offset=start_offset, source=source) from None
        yield start_line, start_offset, fields
        start_offset, start_line = position["offset"], position["line"] + 1


def _read_table(stream: BinaryIO, required: Iterable[str], source=None):
    records = _records_with_offsets(stream, source)
    try:
        _, _, header = next(records)
    except StopIteration:
        raise ParseError("empty file, header row expected", source=source) from None
    columns = {name.strip().upper(): i for i, name in enumerate(header)}
    for name in required:
        if name not in columns:
            raise ParseError("missing required column", row=0, column=name, source=source)
    return columns, records


def _int(value: str, row: int, column: str, source) -> int:
    try:
        return int(value.strip())
    except ValueError:
        raise ParseError(f"expected integer, got {value!r}", row=row, column=column, source=source) from None


def _timestamp(value: str, row: int, column: str, source) -> datetime:
    try:
        return datetime.strptime(value.strip(), TIMESTAMP_FORMAT)
    except ValueError:
        raise ParseError(
            f"expected timestamp 'YYYY-MM-DD HH:MM:SS', got {value!r}",
            row=row,
            column=column,
            source=source,
        ) from None


def _flag(value: str, row: int, column: str, source) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "t", "y"):
        return True
    if v in ("0", "false", "f", "n", ""):
        return False
    raise ParseError(f"expected 0/1 flag, got {value!r}", row=row, column=column, source=source)


def parse_admissions(stream: BinaryIO, *, strict: bool = True, source=None) -> list[AdmissionRecord]:
    """Parse an ADMISSIONS-style CSV byte stream.

    With ``strict=False`` rows that violate record invariants (discharge
    before admission, expire flag without death time) are dropped with a
    warning instead of raising. Malformed values always raise.
    """
    columns, records = _read_table(stream, ADMISSION_COLUMNS, source)
    out = []
    for row, (_, _, fields) in enumerate(records, start=1):
        if not fields:
            continue

        def get(name):
            i = columns[name]
            return fields[i] if i < len(fields) else ""

        type_text = get("ADMISSION_TYPE").strip().upper()
        try:
            admission_type = AdmissionType(type_text)
        except ValueError:
            raise ParseError(
                f"unknown admission type {type_text!r}", row=row, column="ADMISSION_TYPE", source=source
            ) from None
        death = get("DEATHTIME").strip()
        rec = AdmissionRecord(
            row_id=_int(get("ROW_ID"), row, "ROW_ID", source),
            subject_id=_int(get("SUBJECT_ID"), row, "SUBJECT_ID", source),
            hadm_id=_int(get("HADM_ID"), row, "HADM_ID", source),
            admit_time=_timestamp(get("ADMITTIME"), row, "ADMITTIME", source),
            discharge_time=_timestamp(get("DISCHTIME"), row, "DISCHTIME", source),
            death_time=_timestamp(death, row, "DEATHTIME", source) if death else None,
            admission_type=admission_type,
            hospital_expire_flag=_flag(get("HOSPITAL_EXPIRE_FLAG"), row, "HOSPITAL_EXPIRE_FLAG", source),
        )
        problem = None
        if rec.discharge_time < rec.admit_time:
            problem = ("DISCHTIME", "discharge time precedes admission time")
        elif rec.hospital_expire_flag and rec.death_time is None:
            problem = ("HOSPITAL_EXPIRE_FLAG", "expire flag set but DEATHTIME is empty")
        if problem is not None:
            if strict:
                raise ParseError(problem[1], row=row, column=problem[0], source=source)
            logger.warning("dropping admission row %d (%s)", row, problem[1])
            continue
        out.append(rec)
    return out


def _normalize_category(category: str) -> str:
    return category.strip().casefold()


def parse_notes(
    stream: BinaryIO, category_filter: Optional[str] = DISCHARGE_SUMMARY, *, source=None
) -> list[NoteRecord]:
    """Parse a NOTEEVENTS-style CSV byte stream, keeping one note category.

    Category comparison is case-insensitive and ignores surrounding
    whitespace. ``category_filter=None`` keeps every note. An empty
    ``HADM_ID`` is read as ``None``; such notes never join to an admission.
    """
    columns, records = _read_table(stream, NOTE_COLUMNS, source)
    wanted = None if category_filter is None else _normalize_category(category_filter)
    out = []
    for row, (_, _, fields) in enumerate(records, start=1):
        if not fields:
            continue

        def get(name):
            i = columns[name]
            return fields[i] if i < len(fields) else ""

        category = get("CATEGORY")
        if wanted is not None and _normalize_category(category) != wanted:
            continue
        hadm = get("HADM_ID").strip()
        out.append(
            NoteRecord(
                row_id=_int(get("ROW_ID"), row, "ROW_ID", source),
                subject_id=_int(get("SUBJECT_ID"), row, "SUBJECT_ID", source),
                hadm_id=_int(hadm, row, "HADM_ID", source) if hadm else None,
                category=category.strip(),
                text=get("TEXT"),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Labeling


def readmission_label(
    admissions: list[AdmissionRecord], index: int, window_days: int = 30
) -> tuple[bool, Optional[float]]:
    """Label admission ``index`` of one patient's admit-time-ordered history.

    ELECTIVE admissions are skipped; the first later non-ELECTIVE admission
    is the only candidate. The interval runs from the index discharge to the
    candidate admission, in fractional days, clamped at zero for overlapping
    stays. The window is inclusive.
    """
    if window_days <= 0:
        raise ContractError(f"window_days must be positive, got {window_days}")
    if not 0 <= index < len(admissions):
        raise ContractError(f"index {index} out of range for {len(admissions)} admissions")
    for a, b in zip(admissions, admissions[1:]):
        if b.admit_time < a.admit_time:
            raise ContractError(
                f"admissions not sorted by admit time (hadm_id {a.hadm_id} before {b.hadm_id})"
            )

    current = admissions[index]
    for candidate in admissions[index + 1 :]:
        if candidate.admission_type is AdmissionType.ELECTIVE:
            continue
        delta = (candidate.admit_time - current.discharge_time).total_seconds() / SECONDS_PER_DAY
        delta = max(delta, 0.0)
        if delta <= window_days:
            return True, delta
        return False, None
    return False, None


def interval_histogram(intervals: Iterable[float], window_days: int) -> list[tuple[int, int]]:
    """One-day buckets ``[k, k+1)`` for k in ``0..window_days-1``.

    An interval of exactly ``window_days`` lands in the last bucket.
    """
    counts = [0] * window_days
    for d in intervals:
        k = min(int(math.floor(d)), window_days - 1)
        counts[k] += 1
    return list(enumerate(counts))


def build_cohort(
    admissions: list[AdmissionRecord],
    notes: list[NoteRecord],
    window_days: int = 30,
) -> tuple[list[Subject], CohortStats]:
    """Apply the exclusion cascade and label every retained admission.

    Exclusions are applied in order: NEWBORN, in-hospital death, no
    discharge summary, more than one discharge summary. Excluded admissions
    still count as readmission events for the patient's earlier stays.
    Subjects are returned sorted by ``hadm_id``.
    """
    seen: dict[int, AdmissionRecord] = {}
    duplicates = set()
    for a in admissions:
        if a.hadm_id in seen:
            duplicates.add(a.hadm_id)
        seen[a.hadm_id] = a
    if duplicates:
        raise DataError(f"duplicate HADM_ID in admissions: {sorted(duplicates)}")

    summaries: dict[tuple[int, int], list[NoteRecord]] = defaultdict(list)
    for n in notes:
        if n.hadm_id is not None and n.text.strip():
            summaries[(n.subject_id, n.hadm_id)].append(n)

    by_patient: dict[int, list[AdmissionRecord]] = defaultdict(list)
    for a in admissions:
        by_patient[a.subject_id].append(a)

    stats = CohortStats(input_admissions=len(admissions), window_days=window_days)
    subjects = []
    for history in by_patient.values():
        history.sort(key=lambda a: (a.admit_time, a.hadm_id))
        for i, adm in enumerate(history):
            if adm.admission_type is AdmissionType.NEWBORN:
                stats.newborn += 1
                continue
            if adm.hospital_expire_flag:
                stats.expired += 1
                continue
            matched = summaries.get((adm.subject_id, adm.hadm_id), [])
            if not matched:
                stats.no_summary += 1
                continue
            if len(matched) > 1:
                stats.multiple_summaries += 1
                continue
            label, interval = readmission_label(history, i, window_days)
            subjects.append(
                Subject(
                    hadm_id=adm.hadm_id,
                    subject_id=adm.subject_id,
                    summary_text=matched[0].text,
                    label=label,
                    interval_days=interval,
                )
            )

    subjects.sort(key=lambda s: s.hadm_id)
    stats.retained_count = len(subjects)
    stats.positive_count = sum(s.label for s in subjects)
    stats.interval_histogram = interval_histogram(
        (s.interval_days for s in subjects if s.label), window_days
    )
    return subjects, stats


def write_cohort(subjects: Iterable[Subject], fh) -> None:
    for s in subjects:
        fh.write(s.to_json())
        fh.write("\n")


def read_cohort(fh, *, source=None) -> list[Subject]:
    subjects = []
    for lineno, line in enumerate(fh, start=1):
        if not line.strip():
            continue
        try:
            subjects.append(Subject.from_dict(json.loads(line)))
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"bad cohort record: {exc}", row=lineno, source=source) from None
    return subjects
