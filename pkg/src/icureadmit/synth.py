"""Synthetic ADMISSIONS / NOTEEVENTS tables with a planted readmission signal.

Every patient gets a short admission history built so that the exclusion
cascade and the ELECTIVE-skip rule all fire. Labels are computed with the
same labeling rule the cohort builder uses, and only then is each
discharge summary written: background text drawn from a Zipf-weighted
vocabulary, label-independent clinical phrases, and ``n_signal_terms``
planted words that appear with probability ``signal_strength`` in
positive summaries and ``signal_strength / 5`` in negative ones.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from datetime import datetime, timedelta

import numpy as np

from .cohort import ADMISSION_COLUMNS, AdmissionRecord, AdmissionType, TIMESTAMP_FORMAT, readmission_label
from .concepts import default_lexicon
from .errors import ContractError
from .porter import porter_stem
from .text import load_stopwords

NEGATIVE_SIGNAL_FACTOR = 5.0

# Single words with their own lexicon entry, so planted words also show up
# as planted concepts.
SIGNAL_POOL = (
    "tracheostomy", "fistula", "bipap", "hemodialysis", "cirrhosis",
    "ascites", "encephalopathy", "sepsis", "coagulopathy", "endocarditis",
    "osteomyelitis", "pancreatitis", "thrombocytopenia", "hyperkalemia",
    "hyponatremia", "delirium", "seizure", "pneumonia", "anemia",
    "hypotension", "cellulitis", "intubation", "stroke", "copd",
)

FILLER = (
    "patient", "admitted", "presented", "history", "hospital", "course",
    "medications", "noted", "given", "started", "continued", "daily", "home",
    "follow", "stable", "normal", "pain", "chest", "blood", "pressure",
    "heart", "rate", "exam", "labs", "imaging", "transferred", "unit", "team",
    "plan", "instructions", "outpatient", "clinic", "family", "diet",
    "activity", "condition", "improved", "treated", "received", "admission",
)

_CONSONANTS = "bcdfghklmnprtvz"
_VOWELS = "aeiou"

# Per-patient history probabilities.
P_LATE_READMISSION = 0.3
P_ELECTIVE_BEFORE_READMISSION = 0.3
P_ELECTIVE_ONLY = 0.2
P_ELECTIVE_INDEX = 0.1
# Stand-alone patients that exercise each exclusion, per regular patient.
P_NEWBORN = 0.02
P_EXPIRED = 0.02
P_NO_SUMMARY = 0.01
P_MULTI_SUMMARY = 0.01
P_BACKGROUND_CONCEPT = 0.08
P_RADIOLOGY_NOTE = 0.1


@dataclass(frozen=True)
class SynthSpec:
    n_subjects: int = 2000
    positive_rate: float = 0.06
    n_signal_terms: int = 10
    signal_strength: float = 0.8
    vocabulary_size: int = 3000
    seed: int = 0

    def validate(self) -> None:
        if self.n_subjects < 1:
            raise ContractError("n_subjects must be >= 1")
        if not 0 < self.positive_rate < 1:
            raise ContractError("positive_rate must be in (0, 1)")
        if not 0 <= self.signal_strength <= 1:
            raise ContractError("signal_strength must be in [0, 1]")
        if self.n_signal_terms < 0:
            raise ContractError("n_signal_terms must be >= 0")
        if self.n_signal_terms >= self.vocabulary_size:
            raise ContractError("n_signal_terms must be smaller than vocabulary_size")


@dataclass
class SynthCorpus:
    admissions: list[AdmissionRecord]
    notes: list[dict]
    signal_terms: list[str]
    spec: SynthSpec

    def truth(self) -> dict:
        lex = default_lexicon()
        cuis = sorted({c for t in self.signal_terms for c in lex.lookup((porter_stem(t),))})
        return {
            "spec": asdict(self.spec),
            "signal_terms": self.signal_terms,
            "signal_stems": [porter_stem(t) for t in self.signal_terms],
            "signal_cuis": cuis,
        }


def _pseudo_words(rng, count: int, taken: set) -> list[str]:
    words = []
    stems = set(taken)
    while len(words) < count:
        n_syl = int(rng.integers(2, 4))
        w = "".join(
            _CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWELS[rng.integers(len(_VOWELS))]
            for _ in range(n_syl)
        )
        w += _CONSONANTS[rng.integers(len(_CONSONANTS))]
        s = porter_stem(w)
        if s in stems or w in stems:
            continue
        stems.add(s)
        stems.add(w)
        words.append(w)
    return words


def _vocabularies(spec: SynthSpec, rng):
    stop = load_stopwords()
    lexicon = default_lexicon()
    signal = list(SIGNAL_POOL[: spec.n_signal_terms])
    taken = set(stop) | {porter_stem(w) for w in FILLER} | {porter_stem(w) for w in SIGNAL_POOL}
    for e in lexicon.entries:
        taken.update(e.phrase)
    if len(signal) < spec.n_signal_terms:
        signal += _pseudo_words(rng, spec.n_signal_terms - len(signal), taken)
        taken |= {porter_stem(w) for w in signal}

    signal_stems = {porter_stem(w) for w in signal}
    signal_cuis = {c for s in signal_stems for c in lexicon.lookup((s,))}
    background_phrases = []
    seen = set()
    for e in lexicon.entries:
        if e.phrase in seen:
            continue
        seen.add(e.phrase)
        if signal_stems & set(e.phrase) or signal_cuis & set(lexicon.lookup(e.phrase)):
            continue
        background_phrases.append(e.surface)

    n_background = spec.vocabulary_size - len(signal)
    filler = list(FILLER[: max(0, n_background)])
    pseudo = _pseudo_words(rng, max(0, n_background - len(filler)), taken)
    background = filler + pseudo
    rng.shuffle(background)
    return signal, background, background_phrases


def _timestamp(t: datetime) -> str:
    return t.strftime(TIMESTAMP_FORMAT)


class _History:
    """Builds admission records with monotone ids and plausible times."""

    def __init__(self, rng):
        self.rng = rng
        self.records: list[AdmissionRecord] = []
        self.summary_plan: dict[int, int] = {}
        self.next_row = 1
        self.next_subject = 10000

    def new_patient(self) -> tuple[int, datetime]:
        sid = self.next_subject
        self.next_subject += 1
        start = datetime(2100, 1, 1) + timedelta(seconds=int(self.rng.integers(0, 100 * 365 * 86400)))
        return sid, start

    def add(self, sid, admit, kind, *, los_days=None, expired=False, summaries=1):
        rng = self.rng
        if los_days is None:
            los_days = float(rng.uniform(1.0, 15.0))
        discharge = admit + timedelta(seconds=int(los_days * 86400))
        rec = AdmissionRecord(
            row_id=self.next_row,
            subject_id=sid,
            hadm_id=-1,
            admit_time=admit,
            discharge_time=discharge,
            death_time=discharge if expired else None,
            admission_type=kind,
            hospital_expire_flag=expired,
        )
        self.next_row += 1
        self.records.append(rec)
        self.summary_plan[len(self.records) - 1] = summaries
        return rec


def _after(rec: AdmissionRecord, days: float) -> datetime:
    return rec.discharge_time + timedelta(seconds=int(days * 86400))


def _build_histories(spec: SynthSpec, rng) -> _History:
    # Per regular patient: 1 index subject, plus a readmission subject with
    # probability q (positive) or P_LATE_READMISSION (negative). Solving
    # q / (1 + q + P_LATE (1 - q)) = positive_rate for q:
    r, late = spec.positive_rate, P_LATE_READMISSION
    q = min(r * (1 + late) / (1 - r * (1 - late)), 1.0)
    per_patient = 1 + q + late * (1 - q)
    n_patients = max(1, int(round(spec.n_subjects / per_patient)))

    h = _History(rng)
    for _ in range(n_patients):
        sid, start = h.new_patient()
        index_kind = AdmissionType.ELECTIVE if rng.random() < P_ELECTIVE_INDEX else (
            AdmissionType.URGENT if rng.random() < 0.2 else AdmissionType.EMERGENCY
        )
        index = h.add(sid, start, index_kind)
        readmit_kind = AdmissionType.URGENT if rng.random() < 0.2 else AdmissionType.EMERGENCY
        if rng.random() < q:
            gap = float(rng.uniform(0.5, 30.0))
            if rng.random() < P_ELECTIVE_BEFORE_READMISSION and gap > 2.0:
                h.add(sid, _after(index, gap / 4), AdmissionType.ELECTIVE, los_days=gap / 4, summaries=0)
            h.add(sid, _after(index, gap), readmit_kind)
        else:
            if rng.random() < P_ELECTIVE_ONLY:
                h.add(sid, _after(index, float(rng.uniform(1.0, 25.0))), AdmissionType.ELECTIVE,
                      los_days=1.0, summaries=0)
            if rng.random() < late:
                h.add(sid, _after(index, float(rng.uniform(31.5, 400.0))), readmit_kind)

    extras = (
        (P_NEWBORN, dict(kind=AdmissionType.NEWBORN)),
        (P_EXPIRED, dict(kind=AdmissionType.EMERGENCY, expired=True)),
        (P_NO_SUMMARY, dict(kind=AdmissionType.EMERGENCY, summaries=0)),
        (P_MULTI_SUMMARY, dict(kind=AdmissionType.EMERGENCY, summaries=2)),
    )
    for p, kw in extras:
        count = max(1, int(rng.binomial(n_patients, p)))
        for _ in range(count):
            sid, start = h.new_patient()
            kind = kw["kind"]
            h.add(sid, start, kind, expired=kw.get("expired", False), summaries=kw.get("summaries", 1))

    hadm_ids = rng.permutation(len(h.records)) + 100000
    h.records = [
        AdmissionRecord(**{**asdict(rec), "hadm_id": int(hid)}) for rec, hid in zip(h.records, hadm_ids)
    ]
    return h


def _labels(records: list[AdmissionRecord]) -> dict[int, bool]:
    by_patient: dict[int, list[AdmissionRecord]] = {}
    for rec in records:
        by_patient.setdefault(rec.subject_id, []).append(rec)
    labels = {}
    for history in by_patient.values():
        history.sort(key=lambda a: (a.admit_time, a.hadm_id))
        for i, rec in enumerate(history):
            labels[rec.hadm_id] = readmission_label(history, i)[0]
    return labels


class _Writer:
    def __init__(self, rng, signal, background, phrases, strength):
        self.rng = rng
        self.signal = signal
        self.background = np.array(background)
        weights = 1.0 / (np.arange(len(background)) + 10.0)
        self.cdf = np.cumsum(weights / weights.sum())
        self.phrases = phrases
        self.strength = strength
        self.stop = sorted(load_stopwords())

    def summary(self, label: bool, admit: datetime, discharge: datetime) -> str:
        rng = self.rng
        n_tokens = int(rng.integers(120, 240))
        picks = np.searchsorted(self.cdf, rng.random(n_tokens))
        picks = np.minimum(picks, len(self.background) - 1)
        words = list(self.background[picks])
        n_stop = n_tokens // 4
        for w in rng.choice(self.stop, n_stop):
            words.insert(int(rng.integers(len(words) + 1)), str(w))
        for phrase in self.phrases:
            if rng.random() < P_BACKGROUND_CONCEPT:
                words.insert(int(rng.integers(len(words) + 1)), phrase)
        p = self.strength if label else self.strength / NEGATIVE_SIGNAL_FACTOR
        for term in self.signal:
            if rng.random() < p:
                for _ in range(int(rng.integers(1, 3))):
                    words.insert(int(rng.integers(len(words) + 1)), term)

        lines = [
            f"Admission Date:  [**{admit:%Y-%m-%d}**]     Discharge Date:   [**{discharge:%Y-%m-%d}**]",
            "",
            "History of Present Illness:",
        ]
        body = []
        for i, w in enumerate(words):
            body.append(w)
            if i % 17 == 16:
                body.append(f"bp {int(rng.integers(90, 180))}/{int(rng.integers(50, 100))}.")
            if i % 40 == 39:
                body.append("\n")
        lines.append(" ".join(body).replace(" \n ", "\n"))
        lines.append("")
        lines.append("Discharge Condition: stable.")
        return "\n".join(lines)

    def radiology(self) -> str:
        picks = np.minimum(np.searchsorted(self.cdf, self.rng.random(40)), len(self.background) - 1)
        return "FINAL REPORT\nCHEST (PORTABLE AP): " + " ".join(self.background[picks]) + "."


def generate(spec: SynthSpec) -> SynthCorpus:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    signal, background, phrases = _vocabularies(spec, rng)
    hist = _build_histories(spec, rng)
    labels = _labels(hist.records)
    writer = _Writer(rng, signal, background, phrases, spec.signal_strength)

    notes = []
    row_id = 1
    for i, rec in enumerate(hist.records):
        for _ in range(hist.summary_plan[i]):
            text = writer.summary(labels[rec.hadm_id], rec.admit_time, rec.discharge_time)
            notes.append(
                {"ROW_ID": row_id, "SUBJECT_ID": rec.subject_id, "HADM_ID": rec.hadm_id,
                 "CATEGORY": "Discharge summary", "TEXT": text}
            )
            row_id += 1
        if rng.random() < P_RADIOLOGY_NOTE:
            notes.append(
                {"ROW_ID": row_id, "SUBJECT_ID": rec.subject_id, "HADM_ID": rec.hadm_id,
                 "CATEGORY": "Radiology", "TEXT": writer.radiology()}
            )
            row_id += 1
    return SynthCorpus(hist.records, notes, signal, spec)


def write_admissions(records, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ADMISSION_COLUMNS)
    for r in records:
        w.writerow(
            [
                r.row_id,
                r.subject_id,
                r.hadm_id,
                _timestamp(r.admit_time),
                _timestamp(r.discharge_time),
                _timestamp(r.death_time) if r.death_time else "",
                r.admission_type.value,
                1 if r.hospital_expire_flag else 0,
            ]
        )


def write_notes(notes, fh) -> None:
    w = csv.DictWriter(fh, ["ROW_ID", "SUBJECT_ID", "HADM_ID", "CATEGORY", "TEXT"], lineterminator="\n")
    w.writeheader()
    w.writerows(notes)


def write_truth(corpus: SynthCorpus, fh) -> None:
    json.dump(corpus.truth(), fh, indent=1, sort_keys=True)
    fh.write("\n")
