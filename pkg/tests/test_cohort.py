import io
import json
import random
from datetime import datetime

import pytest
from hypothesis import given, settings, strategies as st

from icureadmit.cohort import (
    AdmissionType,
    NoteRecord,
    Subject,
    build_cohort,
    interval_histogram,
    parse_admissions,
    parse_notes,
    read_cohort,
    readmission_label,
    write_cohort,
)
from icureadmit.errors import ContractError, DataError, ParseError

from conftest import admission, csv_bytes, fixture_path

HEADER = "ROW_ID,SUBJECT_ID,HADM_ID,ADMITTIME,DISCHTIME,DEATHTIME,ADMISSION_TYPE,HOSPITAL_EXPIRE_FLAG\n"
NOTE_HEADER = "ROW_ID,SUBJECT_ID,HADM_ID,CATEGORY,TEXT\n"


def test_parse_three_row_fixture():
    text = HEADER + (
        "1,7,70,2101-01-01 00:00:00,2101-01-03 12:30:00,,EMERGENCY,0\n"
        "2,7,71,2101-02-01 08:00:00,2101-02-02 08:00:00,2101-02-02 08:00:00,urgent,1\n"
        "3,8,80,2101-03-05 10:00:00,2101-03-08 09:15:00,, Newborn ,0\n"
    )
    recs = parse_admissions(csv_bytes(text))
    assert len(recs) == 3
    a, b, c = recs
    assert (a.row_id, a.subject_id, a.hadm_id) == (1, 7, 70)
    assert a.admit_time == datetime(2101, 1, 1, 0, 0, 0)
    assert a.discharge_time == datetime(2101, 1, 3, 12, 30, 0)
    assert a.death_time is None
    assert a.admission_type is AdmissionType.EMERGENCY and not a.hospital_expire_flag
    assert b.admission_type is AdmissionType.URGENT and b.hospital_expire_flag
    assert b.death_time == datetime(2101, 2, 2, 8, 0, 0)
    assert c.admission_type is AdmissionType.NEWBORN


def test_column_order_is_free():
    text = (
        "HOSPITAL_EXPIRE_FLAG,ADMISSION_TYPE,HADM_ID,EXTRA,SUBJECT_ID,ROW_ID,DISCHTIME,ADMITTIME,DEATHTIME\n"
        "0,ELECTIVE,5,x,9,1,2101-01-02 00:00:00,2101-01-01 00:00:00,\n"
    )
    (rec,) = parse_admissions(csv_bytes(text))
    assert (rec.hadm_id, rec.subject_id, rec.admission_type) == (5, 9, AdmissionType.ELECTIVE)


@pytest.mark.parametrize(
    "row, column",
    [
        ("1,1,1,2101-13-01 00:00:00,2101-01-02 00:00:00,,EMERGENCY,0", "ADMITTIME"),
        ("1,1,1,2101-01-01 00:00:00,2101-01-02 00:00:00,,TRAUMA,0", "ADMISSION_TYPE"),
        ("1,1,x,2101-01-01 00:00:00,2101-01-02 00:00:00,,EMERGENCY,0", "HADM_ID"),
        ("1,1,1,2101-01-03 00:00:00,2101-01-02 00:00:00,,EMERGENCY,0", "DISCHTIME"),
        ("1,1,1,2101-01-01 00:00:00,2101-01-02 00:00:00,,EMERGENCY,1", "HOSPITAL_EXPIRE_FLAG"),
    ],
)
def test_admission_errors_name_row_and_column(row, column):
    with pytest.raises(ParseError) as info:
        parse_admissions(csv_bytes(HEADER + row + "\n"), source="adm.csv")
    assert info.value.row == 1 and info.value.column == column
    assert "adm.csv" in str(info.value) and column in str(info.value)


def test_lenient_mode_drops_invariant_violations():
    text = HEADER + (
        "1,1,1,2101-01-03 00:00:00,2101-01-02 00:00:00,,EMERGENCY,0\n"
        "2,1,2,2101-01-04 00:00:00,2101-01-05 00:00:00,,EMERGENCY,0\n"
    )
    assert [r.hadm_id for r in parse_admissions(csv_bytes(text), strict=False)] == [2]


def test_missing_column():
    with pytest.raises(ParseError) as info:
        parse_admissions(csv_bytes("ROW_ID,SUBJECT_ID\n1,2\n"))
    assert info.value.column == "HADM_ID"


def test_parse_notes_filters_category():
    text = NOTE_HEADER + (
        '1,1,10,Discharge summary,"first"\n'
        '2,1,10,Radiology,"chest film"\n'
        '3,2,20, discharge SUMMARY ,"second"\n'
    )
    notes = parse_notes(csv_bytes(text))
    assert [n.text for n in notes] == ["first", "second"]
    assert len(parse_notes(csv_bytes(text), None)) == 3


def test_parse_notes_keeps_embedded_newlines():
    text = NOTE_HEADER + '1,1,10,Discharge summary,"line one\nline ""two""\r\nline three"\n'
    (note,) = parse_notes(csv_bytes(text))
    assert note.text == 'line one\nline "two"\r\nline three'


def test_parse_notes_header_only():
    assert parse_notes(csv_bytes(NOTE_HEADER)) == []


def test_unbalanced_quote_reports_byte_offset():
    good = '1,1,10,Discharge summary,"ok"\n'
    text = NOTE_HEADER + good + '2,1,11,Discharge summary,"never closed\nmore\n'
    with pytest.raises(ParseError) as info:
        parse_notes(csv_bytes(text))
    assert info.value.offset == len((NOTE_HEADER + good).encode())
    assert "byte offset" in str(info.value)


def test_empty_hadm_id_never_joins():
    (note,) = parse_notes(csv_bytes(NOTE_HEADER + "1,1,,Discharge summary,text\n"))
    assert note.hadm_id is None


# -- labeling ----------------------------------------------------------------


def history(*specs):
    """specs: (admit_day, kind); every stay lasts exactly zero days."""
    return [admission(i + 1, admit_day=d, los_days=0, kind=k) for i, (d, k) in enumerate(specs)]


def test_label_examples():
    assert readmission_label(history((0, "EMERGENCY"), (10, "EMERGENCY")), 0) == (True, 10.0)
    assert readmission_label(history((0, "EMERGENCY"), (5, "ELECTIVE"), (20, "URGENT")), 0) == (True, 20.0)
    assert readmission_label(history((0, "EMERGENCY")), 0) == (False, None)
    assert readmission_label(history((0, "EMERGENCY"), (31, "EMERGENCY")), 0) == (False, None)


def test_window_is_inclusive():
    assert readmission_label(history((0, "EMERGENCY"), (30, "EMERGENCY")), 0) == (True, 30.0)
    assert readmission_label(history((0, "URGENT"), (10, "URGENT")), 0, window_days=9) == (False, None)


def test_first_non_elective_is_the_only_candidate():
    # The day-40 stay is out of window; the day-45 one is never considered.
    h = history((0, "EMERGENCY"), (3, "ELECTIVE"), (40, "EMERGENCY"), (45, "EMERGENCY"))
    assert readmission_label(h, 0) == (False, None)


def test_interval_counts_from_discharge():
    h = [admission(1, admit_day=0, los_days=5.5), admission(2, admit_day=8)]
    assert readmission_label(h, 0) == (True, 2.5)


def test_label_preconditions():
    h = history((5, "EMERGENCY"), (0, "EMERGENCY"))
    with pytest.raises(ContractError):
        readmission_label(h, 0)
    with pytest.raises(ContractError):
        readmission_label(history((0, "EMERGENCY")), 3)
    with pytest.raises(ContractError):
        readmission_label(history((0, "EMERGENCY")), 0, window_days=0)


def test_interval_histogram_buckets():
    h = interval_histogram([0.0, 0.99, 1.0, 29.5, 30.0], 30)
    assert len(h) == 30 and h[0] == (0, 2) and h[1] == (1, 1) and h[29] == (29, 2)
    assert sum(c for _, c in h) == 5


# -- cohort ------------------------------------------------------------------


def note(hadm_id, subject_id=1, text="summary text", row_id=None):
    return NoteRecord(row_id or hadm_id, subject_id, hadm_id, "Discharge summary", text)


def test_expired_patient_and_readmitted_patient():
    adms = [
        admission(1, subject_id=1, admit_day=0, expired=True),
        admission(2, subject_id=2, admit_day=0, los_days=3),
        admission(3, subject_id=2, admit_day=15),
    ]
    notes = [note(1, 1), note(2, 2)]
    subjects, stats = build_cohort(adms, notes)
    assert [(s.hadm_id, s.label, s.interval_days) for s in subjects] == [(2, True, 12.0)]
    assert (stats.expired, stats.no_summary, stats.newborn, stats.multiple_summaries) == (1, 1, 0, 0)


def test_multiple_summaries_excluded():
    subjects, stats = build_cohort([admission(1)], [note(1, row_id=1), note(1, row_id=2)])
    assert subjects == [] and stats.multiple_summaries == 1


def test_blank_summary_does_not_count():
    subjects, stats = build_cohort([admission(1)], [note(1, text="  \n")])
    assert subjects == [] and stats.no_summary == 1


def test_join_needs_subject_and_admission():
    subjects, stats = build_cohort([admission(1, subject_id=1)], [note(1, subject_id=2)])
    assert subjects == [] and stats.no_summary == 1


def test_empty_inputs():
    subjects, stats = build_cohort([], [])
    assert subjects == []
    d = stats.to_dict()
    assert all(d[k] == 0 for k in ("newborn", "expired", "no_summary", "multiple_summaries", "retained_count"))


def test_duplicate_hadm_id():
    with pytest.raises(DataError, match="42"):
        build_cohort([admission(42, subject_id=1), admission(42, subject_id=2)], [])


def test_excluded_admissions_still_count_as_readmissions():
    adms = [admission(1, los_days=1), admission(2, admit_day=6, kind="NEWBORN")]
    subjects, stats = build_cohort(adms, [note(1), note(2)])
    assert [(s.hadm_id, s.label, s.interval_days) for s in subjects] == [(1, True, 5.0)]
    assert stats.newborn == 1


def test_small_bundled_fixture():
    with fixture_path("small_admissions.csv").open("rb") as a, fixture_path("small_notes.csv").open("rb") as n:
        subjects, stats = build_cohort(parse_admissions(a), parse_notes(n))
    assert [(s.hadm_id, s.label, s.interval_days) for s in subjects] == [
        (101, True, 12.0),
        (102, False, None),
        (401, False, None),
    ]
    assert (stats.newborn, stats.expired, stats.no_summary, stats.multiple_summaries) == (1, 1, 1, 0)


def test_cohort_jsonl_round_trip():
    subjects = [Subject(3, 1, "text\nwith newline", True, 2.5), Subject(4, 1, "x", False, None)]
    buf = io.StringIO()
    write_cohort(subjects, buf)
    lines = buf.getvalue().splitlines()
    assert set(json.loads(lines[0])) == {"hadm_id", "subject_id", "label", "interval_days", "summary_text"}
    assert read_cohort(io.StringIO(buf.getvalue())) == subjects


# -- properties ----------------------------------------------------------------

kinds = st.sampled_from(["EMERGENCY", "URGENT", "ELECTIVE", "NEWBORN"])
stay = st.tuples(
    st.integers(0, 3),  # subject
    st.floats(0, 200, allow_nan=False),  # admit day
    st.floats(0, 20, allow_nan=False),  # length of stay
    kinds,
    st.booleans(),  # expired
    st.integers(0, 2),  # number of summaries
)


def make_tables(stays):
    adms, notes = [], []
    for i, (subj, day, los, kind, expired, n_notes) in enumerate(stays):
        adms.append(admission(100 + i, subject_id=subj, admit_day=day, los_days=los, kind=kind, expired=expired))
        for j in range(n_notes):
            notes.append(note(100 + i, subj, row_id=1000 * i + j + 1))
    return adms, notes


@settings(max_examples=200)
@given(st.lists(stay, max_size=25), st.randoms())
def test_cohort_invariants(stays, rnd):
    adms, notes = make_tables(stays)
    subjects, stats = build_cohort(adms, notes)
    assert stats.retained_count + stats.excluded == len(adms)
    by_id = {a.hadm_id: a for a in adms}
    for s in subjects:
        a = by_id[s.hadm_id]
        assert a.admission_type is not AdmissionType.NEWBORN and not a.hospital_expire_flag
        assert (s.interval_days is not None) == s.label
        if s.label:
            assert 0 <= s.interval_days <= 30
    assert sum(c for _, c in stats.interval_histogram) == stats.positive_count

    shuffled = list(adms)
    rnd.shuffle(shuffled)
    assert build_cohort(shuffled, notes) == (subjects, stats)


@settings(max_examples=200)
@given(st.floats(0, 40, allow_nan=False), st.lists(st.floats(0, 1, allow_nan=False), max_size=4), st.floats(0, 10))
def test_elective_insertion_never_changes_label(gap, fractions, los):
    index = admission(1, admit_day=0, los_days=los)
    target = admission(2, admit_day=los + gap, kind="URGENT")
    base = readmission_label([index, target], 0)
    electives = [
        admission(10 + i, admit_day=los + f * gap, los_days=0, kind="ELECTIVE") for i, f in enumerate(sorted(fractions))
    ]
    # On admit-time ties: index first, then the ELECTIVE stays, then the target.
    rank = {1: 0, 2: 2}
    hist = sorted([index, target] + electives, key=lambda a: (a.admit_time, rank.get(a.hadm_id, 1)))
    assert readmission_label(hist, hist.index(index)) == base
