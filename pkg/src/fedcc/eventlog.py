"""Event logs: private, public and collaborative.

A log is an immutable set of events carrying the six columns
``cid, act, time, in, out, oid``. Traces are ordered by timestamp with
ties broken by ``(org_id, event_id)``.
"""
from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable

KINDS = ("private", "public", "collaborative")
HEADER = ["cid", "act", "time", "in", "out", "oid"]
RESERVED_LABELS = frozenset({"__tau__", "__tau_in__", "__tau_out__"})


class LogError(ValueError):
    """Raised for malformed log input or violated log invariants."""


@dataclass(frozen=True, order=False)
class Event:
    event_id: str
    case_id: str
    activity: str
    timestamp: datetime
    msg_in: str | None
    msg_out: str | None
    org_id: str

    def __post_init__(self):
        if self.msg_in is not None and self.msg_out is not None:
            raise LogError(f"event {self.event_id}: both in and out set")
        if self.org_id in (self.msg_in, self.msg_out):
            raise LogError(f"event {self.event_id}: organization {self.org_id} messages itself")
        if self.activity in RESERVED_LABELS:
            raise LogError(f"event {self.event_id}: activity {self.activity!r} is reserved")
        if self.timestamp.tzinfo is None:
            raise LogError(f"event {self.event_id}: timestamp must be timezone-aware")

    @property
    def is_interaction(self) -> bool:
        return self.msg_in is not None or self.msg_out is not None

    def order_key(self):
        return (self.timestamp, self.org_id, self.event_id)


@dataclass(frozen=True)
class EventLog:
    kind: str
    events: frozenset

    def __post_init__(self):
        if self.kind not in KINDS:
            raise LogError(f"unknown log kind {self.kind!r}")
        events = frozenset(self.events)
        object.__setattr__(self, "events", events)
        ids = Counter(e.event_id for e in events)
        dup = sorted(i for i, n in ids.items() if n > 1)
        if dup:
            raise LogError(f"duplicate event ids: {dup[:5]}")
        if self.kind == "private":
            orgs = {e.org_id for e in events}
            if len(orgs) > 1:
                raise LogError(f"private log mixes organizations {sorted(orgs)}")
        else:
            bad = [e.event_id for e in events if not e.is_interaction]
            if bad:
                raise LogError(f"{self.kind} log contains non-interaction events: {sorted(bad)[:5]}")

    def __len__(self):
        return len(self.events)

    @property
    def cases(self) -> list[str]:
        return sorted({e.case_id for e in self.events})

    @property
    def orgs(self) -> list[str]:
        return sorted({e.org_id for e in self.events})

    @property
    def activities(self) -> set[str]:
        return {e.activity for e in self.events}

    def sorted_events(self) -> list[Event]:
        return sorted(self.events, key=lambda e: (e.case_id, e.timestamp, e.org_id, e.event_id))

    def case_events(self, case_id):
        return [e for e in self.events if e.case_id == case_id]

    def org(self, org_id: str) -> EventLog:
        """Restrict a collaborative log to one organization's public log."""
        return EventLog("public", frozenset(e for e in self.events if e.org_id == org_id))


def parse_time(text: str) -> datetime:
    """Parse ISO 8601 or ``dd.mm.yyyy-HH:MM:SS``; naive values are UTC."""
    text = text.strip()
    try:
        if "." in text[:6] and "-" in text:
            ts = datetime.strptime(text, "%d.%m.%Y-%H:%M:%S")
        else:
            ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError as exc:
        raise LogError(f"unparsable timestamp {text!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    ts = ts.astimezone(timezone.utc)
    return ts.replace(microsecond=ts.microsecond // 1000 * 1000)


def format_time(ts: datetime) -> str:
    ts = ts.astimezone(timezone.utc)
    return ts.strftime("%Y-%m-%dT%H:%M:%S.") + f"{ts.microsecond // 1000:03d}Z"


def parse_log(text: str, kind: str = "private") -> EventLog:
    """Read a CSV log with header ``cid,act,time,in,out,oid``.

    Event ids are ``<oid>#<n>`` where ``n`` counts that organization's rows
    in file order.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        return EventLog(kind, frozenset())
    header = [h.strip() for h in header]
    if header != HEADER:
        raise LogError(f"bad header {header}, expected {HEADER}")
    events = []
    per_org = Counter()
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(HEADER):
            raise LogError(f"row {lineno}: expected {len(HEADER)} fields, got {len(row)}")
        cid, act, time, msg_in, msg_out, oid = (c.strip() for c in row)
        if not cid or not act or not oid:
            raise LogError(f"row {lineno}: cid, act and oid are required")
        try:
            ev = Event(
                event_id=f"{oid}#{per_org[oid]:06d}",
                case_id=cid,
                activity=act,
                timestamp=parse_time(time),
                msg_in=msg_in or None,
                msg_out=msg_out or None,
                org_id=oid,
            )
        except LogError as exc:
            raise LogError(f"row {lineno}: {exc}") from None
        per_org[oid] += 1
        events.append(ev)
    try:
        return EventLog(kind, frozenset(events))
    except LogError as exc:
        raise LogError(f"invalid {kind} log: {exc}") from None


def serialize_log(log: EventLog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for e in log.sorted_events():
        w.writerow([e.case_id, e.activity, format_time(e.timestamp), e.msg_in or "", e.msg_out or "", e.org_id])
    return buf.getvalue()


def project_public(log: EventLog) -> EventLog:
    if log.kind != "private":
        raise LogError(f"project_public expects a private log, got {log.kind}")
    return EventLog("public", frozenset(e for e in log.events if e.is_interaction))


def derive_trace(log: EventLog, case_id: str) -> list[Event]:
    events = log.case_events(case_id)
    if not events:
        raise LogError(f"unknown case {case_id!r}")
    return sorted(events, key=Event.order_key)


def variant(log: EventLog, case_id: str) -> tuple[str, ...]:
    return tuple(e.activity for e in derive_trace(log, case_id))


def variants_by_case(log: EventLog) -> dict[str, tuple[str, ...]]:
    by_case: dict[str, list[Event]] = {}
    for e in log.events:
        by_case.setdefault(e.case_id, []).append(e)
    return {c: tuple(e.activity for e in sorted(evs, key=Event.order_key)) for c, evs in sorted(by_case.items())}


def to_simple_log(log: EventLog) -> Counter:
    """Multiset of trace variants, one per case."""
    return Counter(variants_by_case(log).values())


def timestamp_ties(log: EventLog) -> list[str]:
    """Cases whose ordering relied on the (org_id, event_id) tie-break."""
    tied = set()
    seen = set()
    for e in log.events:
        key = (e.case_id, e.timestamp)
        if key in seen:
            tied.add(e.case_id)
        seen.add(key)
    return sorted(tied)


def merge_collaborative(logs: Iterable[EventLog]) -> EventLog:
    events = set()
    for log in logs:
        if log.kind != "public":
            raise LogError(f"collaborative merge expects public logs, got {log.kind}")
        clash = {e.event_id for e in log.events} & {e.event_id for e in events}
        if clash:
            raise LogError(f"duplicate event ids across logs: {sorted(clash)[:5]}")
        events |= log.events
    return EventLog("collaborative", frozenset(events))
