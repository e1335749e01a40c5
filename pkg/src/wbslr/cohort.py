"""Event ingestion, visit grouping and observation-window cohort rules.

Raw events are ``(patient_id, date, code)`` triples.  They are merged into
dated visits, then each patient is either admitted into the cohort as a
positive or negative labeled sequence, or excluded.
"""
from __future__ import annotations

import csv
import datetime as dt
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

DAYS_PER_MONTH = 30


class IngestionError(ValueError):
    """Malformed input record."""


@dataclass(frozen=True)
class RawEvent:
    patient_id: str
    date: dt.date
    code: str

    def __post_init__(self):
        if not isinstance(self.date, dt.date):
            raise IngestionError(f"date must be a calendar date, got {self.date!r}")
        if not self.code:
            raise IngestionError(f"empty code for patient {self.patient_id!r}")


@dataclass(frozen=True)
class Visit:
    date: dt.date
    codes: frozenset

    def __post_init__(self):
        if not self.codes:
            raise ValueError(f"visit on {self.date} has no codes")
        object.__setattr__(self, "codes", frozenset(self.codes))


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    visits: tuple

    def __post_init__(self):
        if not self.visits:
            raise ValueError(f"patient {self.patient_id!r} has no visits")
        dates = [v.date for v in self.visits]
        if any(a >= b for a, b in zip(dates, dates[1:])):
            raise ValueError(f"visits of {self.patient_id!r} not strictly ordered")


@dataclass(frozen=True)
class CohortSpec:
    index_codes: frozenset
    outcome_codes: frozenset
    observation_months: int = 12
    holdoff_months: int = 6
    monitor_months: int = 12
    min_lead_months: int = 18

    def __post_init__(self):
        object.__setattr__(self, "index_codes", frozenset(self.index_codes))
        object.__setattr__(self, "outcome_codes", frozenset(self.outcome_codes))
        self.validate()

    def validate(self):
        months = (self.observation_months, self.holdoff_months,
                  self.monitor_months, self.min_lead_months)
        if any(int(m) != m or m <= 0 for m in months):
            raise ValueError(f"month counts must be positive integers, got {months}")
        if self.min_lead_months != self.observation_months + self.holdoff_months:
            raise ValueError(
                "min_lead_months must equal observation_months + holdoff_months "
                f"({self.min_lead_months} != {self.observation_months} + {self.holdoff_months})")

    @property
    def observation_days(self) -> int:
        return self.observation_months * DAYS_PER_MONTH

    @property
    def holdoff_days(self) -> int:
        return self.holdoff_months * DAYS_PER_MONTH

    @property
    def min_lead_days(self) -> int:
        return self.min_lead_months * DAYS_PER_MONTH

    @property
    def min_history_days(self) -> int:
        return (self.observation_months + self.holdoff_months
                + self.monitor_months) * DAYS_PER_MONTH


@dataclass(frozen=True)
class LabeledSequence:
    patient_id: str
    visits: tuple
    label: int
    observation_start: dt.date
    observation_end: dt.date

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        for v in self.visits:
            if not (self.observation_start <= v.date < self.observation_end):
                raise ValueError(
                    f"visit {v.date} of {self.patient_id!r} outside "
                    f"[{self.observation_start}, {self.observation_end})")

    @property
    def itemsets(self) -> list:
        return [v.codes for v in self.visits]


@dataclass
class CohortSummary:
    positives: int = 0
    negatives: int = 0
    excluded: Counter = field(default_factory=Counter)

    @property
    def n_excluded(self) -> int:
        return sum(self.excluded.values())

    def to_dict(self) -> dict:
        return {"positives": self.positives, "negatives": self.negatives,
                "excluded": dict(sorted(self.excluded.items()))}


def group_into_visits(events: Iterable[RawEvent]) -> dict:
    """Merge events sharing ``(patient_id, date)`` into visits, per patient."""
    by_patient: dict = {}
    for ev in events:
        by_patient.setdefault(ev.patient_id, {}).setdefault(ev.date, set()).add(ev.code)
    return {
        pid: PatientRecord(pid, tuple(Visit(d, frozenset(codes))
                                      for d, codes in sorted(days.items())))
        for pid, days in sorted(by_patient.items())
    }


def _first_date(record: PatientRecord, codes: frozenset):
    for v in record.visits:
        if v.codes & codes:
            return v.date
    return None


def _window(record, start, end):
    return tuple(v for v in record.visits if start <= v.date < end)


def classify_patient(record: PatientRecord, spec: CohortSpec):
    """Return ``(LabeledSequence | None, reason)`` for a single patient."""
    first_index = _first_date(record, spec.index_codes)
    if first_index is None:
        return None, "no_index"
    first_outcome = _first_date(record, spec.outcome_codes)
    if first_outcome is not None:
        if first_outcome <= first_index:
            return None, "outcome_not_after_index"
        if (first_outcome - first_index).days < spec.min_lead_days:
            return None, "short_lead"
        start = first_outcome - dt.timedelta(days=spec.min_lead_days)
        end = first_outcome - dt.timedelta(days=spec.holdoff_days)
        return LabeledSequence(record.patient_id, _window(record, start, end), 1,
                               start, end), "positive"
    history = (record.visits[-1].date - first_index).days
    if history < spec.min_history_days:
        return None, "short_history"
    start = first_index
    end = first_index + dt.timedelta(days=spec.observation_days)
    return LabeledSequence(record.patient_id, _window(record, start, end), 0,
                           start, end), "negative"


def build_cohort(records: Mapping[str, PatientRecord], spec: CohortSpec,
                 summary: CohortSummary | None = None) -> list:
    """Apply the observation / hold-off / monitor rules to every record.

    Positives need their first outcome at least ``min_lead_months`` after the
    first index visit; features come from
    ``[first_outcome - min_lead, first_outcome - holdoff)``.  Negatives have
    no outcome code at all and at least observation + holdoff + monitor
    months of history after the first index visit; features come from the
    first ``observation_months`` after that visit.

    Output is sorted by patient id.  When ``summary`` is given it receives
    the inclusion and exclusion counts.
    """
    spec.validate()
    out = []
    summary = summary if summary is not None else CohortSummary()
    for pid in sorted(records):
        seq, reason = classify_patient(records[pid], spec)
        if seq is None:
            summary.excluded[reason] += 1
            continue
        if seq.label == 1:
            summary.positives += 1
        else:
            summary.negatives += 1
        out.append(seq)
    return out


# -- file formats -----------------------------------------------------------

def _parse_date(text, where):
    try:
        return dt.date.fromisoformat(str(text).strip())
    except ValueError:
        raise IngestionError(f"{where}: malformed date {text!r}") from None


def _make_event(pid, date, code, where, grouping):
    if pid is None or str(pid).strip() == "":
        raise IngestionError(f"{where}: empty patient_id")
    code = "" if code is None else str(code).strip()
    if not code:
        raise IngestionError(f"{where}: empty code")
    if grouping is not None:
        code = grouping.get(code, code)
    return RawEvent(str(pid).strip(), _parse_date(date, where), code)


def read_events(path, grouping: Mapping[str, str] | None = None) -> list:
    """Read raw events from ``.csv`` (header required) or ``.jsonl``/``.json``.

    Codes absent from ``grouping`` are kept unchanged.
    """
    path = Path(path)
    events = []
    if path.suffix.lower() in (".jsonl", ".json", ".ndjson"):
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                where = f"{path}:{lineno}"
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise IngestionError(f"{where}: invalid JSON ({exc.msg})") from None
                if not isinstance(rec, dict):
                    raise IngestionError(f"{where}: expected a JSON object")
                events.append(_make_event(rec.get("patient_id"), rec.get("date"),
                                          rec.get("code"), where, grouping))
    else:
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"patient_id", "date", "code"} - set(reader.fieldnames or ())
            if missing:
                raise IngestionError(f"{path}: header lacks {sorted(missing)}")
            # header is line 1
            for lineno, row in enumerate(reader, 2):
                events.append(_make_event(row["patient_id"], row["date"], row["code"],
                                          f"{path}:{lineno}", grouping))
    return events


def read_grouping(path) -> dict:
    """Two-column ``raw_code,group_code`` map; a header row is optional."""
    mapping = {}
    with Path(path).open(encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or not "".join(row).strip():
                continue
            if len(row) < 2:
                raise IngestionError(f"{path}:{lineno}: expected raw_code,group_code")
            raw, group = row[0].strip(), row[1].strip()
            if lineno == 1 and (raw, group) == ("raw_code", "group_code"):
                continue
            mapping[raw] = group
    return mapping


def sequence_to_dict(seq: LabeledSequence) -> dict:
    return {
        "patient_id": seq.patient_id,
        "label": seq.label,
        "observation_start": seq.observation_start.isoformat(),
        "observation_end": seq.observation_end.isoformat(),
        "visits": [{"date": v.date.isoformat(), "codes": sorted(v.codes)}
                   for v in seq.visits],
    }


def sequence_from_dict(d: dict) -> LabeledSequence:
    return LabeledSequence(
        patient_id=str(d["patient_id"]),
        visits=tuple(Visit(dt.date.fromisoformat(v["date"]), frozenset(v["codes"]))
                     for v in d["visits"]),
        label=int(d["label"]),
        observation_start=dt.date.fromisoformat(d["observation_start"]),
        observation_end=dt.date.fromisoformat(d["observation_end"]),
    )


def dumps_sequences(seqs: Iterable[LabeledSequence]) -> str:
    return "".join(json.dumps(sequence_to_dict(s), sort_keys=False) + "\n" for s in seqs)


def read_sequences(path) -> list:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(sequence_from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise IngestionError(f"{path}:{lineno}: bad labeled sequence ({exc})") from exc
    return out
