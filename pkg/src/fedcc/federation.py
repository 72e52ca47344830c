"""Federated conformance checking over shared public artifacts.

Public open nets are composed into a collaborative model, the public logs are
merged into a collaborative log, and each collaborative trace is aligned.
Visible non-synchronous moves next to a channel realize the organizations'
potential communication costs at that channel.

The federated cost of a case sums every participating organization's local
alignment cost and realized communication costs (k organizations).
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from fedcc.alignment import DEFAULT_BUDGET, Aligner, Alignment, CostFunction, SearchExhausted, UNIT_COSTS
from fedcc.communication import CommCostMatrix
from fedcc.eventlog import EventLog, merge_collaborative, timestamp_ties, variants_by_case
from fedcc.netio import net_to_dict
from fedcc.petri import LabeledNet, NetError, OpenNet, SystemNet

MIS_TYPES = ("sender_move", "receiver_move", "asynchronous")


class CompositionError(NetError):
    pass


class InvalidCollaboration(ValueError):
    def __init__(self, unmatched):
        self.unmatched = sorted(unmatched)
        super().__init__(f"collaborative model is not closed; unmatched interface places: {self.unmatched}")


class PrivacyError(ValueError):
    pass


def _nodes(on: OpenNet) -> set:
    return set(on.net.places) | set(on.net.transitions)


def compose(a: OpenNet, b: OpenNet) -> OpenNet:
    allowed = (a.inputs & b.outputs) | (b.inputs & a.outputs)
    overlap = _nodes(a) & _nodes(b)
    if overlap != allowed:
        bad = sorted(overlap - allowed)
        multi = sorted((a.outputs & b.outputs) | (a.inputs & b.inputs))
        if multi:
            raise CompositionError(f"channels {multi} would have several senders or receivers (bilateral/directed rule)")
        raise CompositionError(f"nets share nodes outside their matching interfaces: {bad}")
    net = LabeledNet(
        a.net.places | b.net.places,
        a.net.transitions | b.net.transitions,
        a.net.arcs | b.net.arcs,
        {**a.net.labels, **b.net.labels},
    )
    sn = SystemNet(net, a.system.initial + b.system.initial, a.system.final + b.system.final)
    inputs = (a.inputs | b.inputs) - (a.outputs | b.outputs)
    outputs = (a.outputs | b.outputs) - (a.inputs | b.inputs)
    orgs = sorted(set(filter(None, a.org_id.split("+"))) | set(filter(None, b.org_id.split("+"))))
    return OpenNet(sn, inputs, outputs, "+".join(orgs))


def compose_all(nets: list) -> OpenNet:
    if not nets:
        raise CompositionError("nothing to compose")
    result = nets[0]
    for on in nets[1:]:
        result = compose(result, on)
    if len(nets) > 1:
        other = nets[-1]
        for on in reversed(nets[:-1]):
            other = compose(other, on)
        if net_to_dict(other) != net_to_dict(result):
            raise RuntimeError("composition result depends on fold order")
    return result


@dataclass(frozen=True)
class Verdict:
    valid: bool
    unmatched_inputs: tuple = ()
    unmatched_outputs: tuple = ()

    @property
    def unmatched(self) -> list:
        return sorted(self.unmatched_inputs + self.unmatched_outputs)


def validate_collaborative(on: OpenNet) -> Verdict:
    return Verdict(not on.interface, tuple(sorted(on.inputs)), tuple(sorted(on.outputs)))


@dataclass(frozen=True)
class Channel:
    place_id: str
    sender_org: str
    receiver_org: str
    producers: frozenset
    consumers: frozenset

    def to_dict(self, labels) -> dict:
        return {
            "channel": self.place_id,
            "sender": self.sender_org,
            "receiver": self.receiver_org,
            "producers": sorted(labels.get(t) or t for t in self.producers),
            "consumers": sorted(labels.get(t) or t for t in self.consumers),
        }


def channel_registry(nets: list) -> list:
    channels = []
    for s in nets:
        for p in sorted(s.outputs):
            receivers = [r for r in nets if p in r.inputs]
            if len(receivers) > 1:
                raise CompositionError(f"channel {p} has several receivers")
            if receivers:
                r = receivers[0]
                channels.append(Channel(p, s.org_id, r.org_id, s.net.preset(p), r.net.postset(p)))
    return sorted(channels, key=lambda c: c.place_id)


@dataclass
class Finding:
    case_id: str
    channel: str
    mis_type: str
    evidence: tuple

    def to_dict(self) -> dict:
        return {"channel": self.channel, "type": self.mis_type, "evidence": [m.to_dict() for m in self.evidence]}


def classify_miscommunications(case_id: str, alignment: Alignment, channels: list, labels: dict) -> list:
    """One finding per channel with visible non-synchronous moves next to it.

    A model move on a consumer whose label never occurs in the trace is a
    sender move (message produced, never consumed); a model move on a producer
    whose label never occurs is a receiver move; anything else is asynchronous.
    """
    trace = set(alignment.log_projection)
    findings = []
    for ch in channels:
        prod_labels = {labels[t] for t in ch.producers if t in labels}
        cons_labels = {labels[t] for t in ch.consumers if t in labels}
        near = ch.producers | ch.consumers
        evidence = tuple(
            m for m in alignment.moves
            if m.kind != "sync" and m.visible
            and (m.transition in near if m.kind == "model" else m.activity in prod_labels | cons_labels)
        )
        if not evidence:
            continue
        model_on = {m.transition for m in evidence if m.kind == "model"}
        if model_on & ch.consumers and not cons_labels & trace:
            kind = "sender_move"
        elif model_on & ch.producers and not prod_labels & trace:
            kind = "receiver_move"
        else:
            kind = "asynchronous"
        findings.append(Finding(case_id, ch.place_id, kind, evidence))
    return findings


def realize_costs(findings: dict, matrices: dict) -> dict:
    """Realized cost per case, org and point: the potential if the case has a
    finding at that channel, else 0. Orgs without a row for a case are skipped."""
    known = {p for m in matrices.values() for p in m.points}
    cases = set(findings)
    for m in matrices.values():
        cases |= set(m.local)
    out = {}
    for c in sorted(cases):
        hit = {f.channel for f in findings.get(c, ())}
        missing = hit - known
        if missing:
            raise KeyError(f"case {c}: no organization reports potential costs for channels {sorted(missing)}")
        per_org = {}
        for org, m in sorted(matrices.items()):
            if c not in m.potential:
                continue
            per_org[org] = {p: (m.potential[c][p] if p in hit else 0) for p in m.points}
        out[c] = per_org
    return out


def federated_cost(local: dict, realized: dict) -> int:
    return sum(local.values()) + sum(sum(v.values()) for v in realized.values())


@dataclass
class OrgShare:
    """What one organization publishes: its public log, public net and matrix."""
    org_id: str
    log: EventLog
    net: OpenNet
    matrix: CommCostMatrix


@dataclass
class CaseResult:
    case_id: str
    lac: dict
    lcc: dict
    fac: int
    collab_cost: int | None
    findings: list
    error: str | None = None

    def to_dict(self) -> dict:
        doc = {
            "cid": self.case_id,
            "lac": self.lac,
            "lcc": self.lcc,
            "fac": self.fac,
            "collab_cost": self.collab_cost,
            "findings": [f.to_dict() for f in self.findings],
        }
        if self.error:
            doc["error"] = self.error
        return doc


@dataclass
class FederatedReport:
    cases: list
    channels: list
    labels: dict
    crosscheck_checked: bool
    crosscheck_mismatches: list = field(default_factory=list)
    notices: list = field(default_factory=list)

    def by_channel(self) -> dict:
        counts = {c.place_id: dict.fromkeys(MIS_TYPES, 0) for c in self.channels}
        for cr in self.cases:
            for f in cr.findings:
                counts.setdefault(f.channel, dict.fromkeys(MIS_TYPES, 0))[f.mis_type] += 1
        return counts

    def finding_cases(self, channel: str | None = None) -> set:
        return {cr.case_id for cr in self.cases for f in cr.findings if channel is None or f.channel == channel}

    def case(self, case_id) -> CaseResult:
        for cr in self.cases:
            if cr.case_id == case_id:
                return cr
        raise KeyError(case_id)

    def to_dict(self) -> dict:
        return {
            "cases": [cr.to_dict() for cr in self.cases],
            "channels": [c.to_dict(self.labels) for c in self.channels],
            "summary": {
                "by_channel": self.by_channel(),
                "crosscheck": {"checked": self.crosscheck_checked, "mismatches": self.crosscheck_mismatches},
                "notices": self.notices,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def summary_csv(self) -> str:
        return render_summary_csv(self.to_dict())

    def cases_csv(self) -> str:
        return render_cases_csv(self.to_dict())

    def to_text(self) -> str:
        return render_text(self.to_dict())


def render_summary_csv(doc: dict) -> str:
    """Per-channel finding counts from a report document."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["channel", *MIS_TYPES])
    for ch, counts in sorted(doc["summary"]["by_channel"].items()):
        w.writerow([ch, *(counts.get(k, 0) for k in MIS_TYPES)])
    return buf.getvalue()


def _lcc_total(case: dict) -> int:
    return sum(sum(v.values()) for v in case["lcc"].values())


def render_cases_csv(doc: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cid", "fac", "lac_total", "lcc_total", "collab_cost", "findings"])
    for cr in doc["cases"]:
        tags = ";".join(f"{f['channel']}:{f['type']}" for f in cr["findings"])
        cc = cr["collab_cost"]
        w.writerow([cr["cid"], cr["fac"], sum(cr["lac"].values()), _lcc_total(cr), "" if cc is None else cc, tags])
    return buf.getvalue()


def render_text(doc: dict) -> str:
    summary = doc["summary"]
    lines = [f"cases: {len(doc['cases'])}", f"channels: {len(doc['channels'])}"]
    for ch, counts in sorted(summary["by_channel"].items()):
        if any(counts.values()):
            lines.append(f"  {ch}: " + ", ".join(f"{k}={counts.get(k, 0)}" for k in MIS_TYPES))
    bad = [cr for cr in doc["cases"] if cr["fac"]]
    lines.append(f"cases with non-zero federated cost: {len(bad)}")
    for cr in bad:
        tags = ", ".join(f"{f['channel']}/{f['type']}" for f in cr["findings"]) or "-"
        lines.append(f"  {cr['cid']}: FaC={cr['fac']} ({tags})")
    failed = [cr["cid"] for cr in doc["cases"] if cr.get("error")]
    if failed:
        lines.append(f"cases without a collaborative alignment: {failed}")
    if summary["crosscheck"]["checked"]:
        lines.append(f"cross-check mismatches: {len(summary['crosscheck']['mismatches'])}")
    lines += [f"notice: {n}" for n in summary["notices"]]
    return "\n".join(lines) + "\n"


def _check_public(share: OrgShare) -> None:
    leaked = sorted(t for t in share.net.t_int if share.net.net.label(t) is not None)
    if leaked:
        raise PrivacyError(f"{share.org_id}: shared net labels internal transitions {leaked}")
    if share.log.kind != "public":
        raise PrivacyError(f"{share.org_id}: shared log is {share.log.kind}, expected public")


def federate(shares: list, cost: CostFunction | None = None, budget: int = DEFAULT_BUDGET,
             uniform_costs: bool = True) -> FederatedReport:
    """Run the federation pipeline on public artifacts only.

    ``uniform_costs`` states that no organization customized its costs; the
    cross-check against the collaborative alignment cost runs only then.
    """
    cost = cost or UNIT_COSTS
    shares = sorted(shares, key=lambda s: s.org_id)
    for s in shares:
        _check_public(s)
    collab_log = merge_collaborative([s.log for s in shares])
    nets = [s.net for s in shares]
    model = compose_all(nets)
    verdict = validate_collaborative(model)
    if not verdict.valid:
        raise InvalidCollaboration(verdict.unmatched)
    channels = channel_registry(nets)
    labels = dict(model.net.labels)
    matrices = {s.org_id: s.matrix for s in shares}
    aligner = Aligner(model.system, cost, budget)
    traces = variants_by_case(collab_log)
    cases = set(traces)
    for m in matrices.values():
        cases |= set(m.local)
    notices = []
    ties = timestamp_ties(collab_log)
    if ties:
        notices.append(f"timestamp ties broken by (org_id, event_id) in cases {ties}")
    checked = uniform_costs and cost.is_uniform
    if not checked:
        notices.append("costs are customized; uniform-cost cross-check skipped")
    alignments, errors, findings = {}, {}, {}
    for c in sorted(cases):
        trace = traces.get(c, ())
        try:
            alignments[c] = aligner.align(trace)
        except SearchExhausted as exc:
            errors[c] = str(exc)
            continue
        findings[c] = classify_miscommunications(c, alignments[c], channels, labels)
    realized = realize_costs(findings, matrices)
    case_orgs: dict = {}
    for e in collab_log.events:
        case_orgs.setdefault(e.case_id, set()).add(e.org_id)
    results, mismatches = [], []
    for c in sorted(cases):
        lac = {org: m.local[c] for org, m in sorted(matrices.items()) if c in m.local}
        missing = sorted(org for org in case_orgs.get(c, ()) if org not in matrices or c not in matrices[org].local)
        if missing:
            notices.append(f"case {c}: no local costs shared by {missing}")
        lcc = realized.get(c, {})
        fac = federated_cost(lac, lcc)
        al = alignments.get(c)
        results.append(CaseResult(c, lac, lcc, fac, al.total_cost if al else None, findings.get(c, []), errors.get(c)))
        if checked and al is not None and fac != sum(lac.values()) + al.total_cost:
            mismatches.append({"cid": c, "fac": fac, "expected": sum(lac.values()) + al.total_cost})
    return FederatedReport(results, channels, labels, checked, mismatches, notices)
