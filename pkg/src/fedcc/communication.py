"""Potential (local) communication costs per communication point.

A communication point is an interface place of an organization's open net.
Masking a point relabels its adjacent transitions with ``TAU_IN``/``TAU_OUT``
so they can no longer synchronize with the log.

Two strategies turn a mask into a cost:

``transport`` (default)
    Take the optimal local alignment, rewrite it onto the masked net (each
    synchronous move on a masked transition splits into a log move plus a
    masked model move; model moves on masked transitions become masked model
    moves) and report the cost difference.
``realign``
    Re-run the optimal search on the masked net and subtract the local cost.

Negative differences are clamped to zero and flagged.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

from fedcc.alignment import DEFAULT_BUDGET, Aligner, Alignment, CostFunction, Move, UNIT_COSTS
from fedcc.eventlog import EventLog, variants_by_case
from fedcc.petri import TAU_IN, TAU_OUT, NetError, OpenNet, inner

log = logging.getLogger(__name__)

STRATEGIES = ("transport", "realign")


@dataclass(frozen=True)
class CommPoint:
    place_id: str
    direction: str
    adjacent_transitions: frozenset

    @property
    def mask_label(self) -> str:
        return TAU_IN if self.direction == "input" else TAU_OUT


def comm_points(on: OpenNet) -> list[CommPoint]:
    points = []
    for p in sorted(on.interface):
        if p in on.inputs:
            points.append(CommPoint(p, "input", on.net.postset(p)))
        else:
            points.append(CommPoint(p, "output", on.net.preset(p)))
    return points


def comm_point(on: OpenNet, place_id: str) -> CommPoint:
    for cp in comm_points(on):
        if cp.place_id == place_id:
            return cp
    raise NetError(f"{place_id!r} is not a communication point of {on.org_id or 'the net'}")


def mask_channel(on: OpenNet, point) -> OpenNet:
    cp = comm_point(on, point.place_id if isinstance(point, CommPoint) else point)
    return on.with_labels({t: cp.mask_label for t in cp.adjacent_transitions})


def transport(alignment: Alignment, masked: dict, cost: CostFunction) -> Alignment:
    """Rewrite ``alignment`` for a net whose transitions in ``masked`` got new labels."""
    moves = []
    for m in alignment.moves:
        if m.kind == "log" or m.transition not in masked:
            moves.append(m)
            continue
        lab = masked[m.transition]
        if m.kind == "sync":
            moves.append(Move("log", activity=m.activity, cost=cost.log(m.activity)))
        moves.append(Move("model", transition=m.transition, label=lab, cost=cost.model(lab)))
    return Alignment(tuple(moves), sum(m.cost for m in moves))


@dataclass
class CommCost:
    value: int
    raw: int

    @property
    def clamped(self) -> bool:
        return self.raw < 0


def local_comm_cost(variant, on: OpenNet, point, cost: CostFunction | None = None, local: Alignment | None = None,
                    strategy: str = "transport", budget: int = DEFAULT_BUDGET) -> CommCost:
    cost = cost or UNIT_COSTS
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if local is None:
        local = Aligner(inner(on), cost, budget).align(variant)
    cp = comm_point(on, point.place_id if isinstance(point, CommPoint) else point)
    if strategy == "transport":
        moved = transport(local, {t: cp.mask_label for t in cp.adjacent_transitions}, cost)
        raw = moved.total_cost - local.total_cost
    else:
        raw = Aligner(inner(mask_channel(on, cp)), cost, budget).align(variant).total_cost - local.total_cost
    if raw < 0:
        log.warning("negative communication cost %d clamped to 0 for %s", raw, cp.place_id)
    return CommCost(max(raw, 0), raw)


@dataclass
class CommCostMatrix:
    org_id: str
    points: list
    local: dict = field(default_factory=dict)
    potential: dict = field(default_factory=dict)
    clamped: list = field(default_factory=list)

    @property
    def cases(self) -> list:
        return sorted(self.local)

    def row(self, case_id) -> tuple:
        return (self.local[case_id],) + tuple(self.potential[case_id][p] for p in self.points)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cid", "local_align_cost"] + [f"{p}:potential" for p in self.points])
        for c in self.cases:
            w.writerow([c, *self.row(c)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, org_id: str = "") -> CommCostMatrix:
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0][:2] != ["cid", "local_align_cost"]:
            raise ValueError("communication matrix must start with cid,local_align_cost")
        points = []
        for col in rows[0][2:]:
            if not col.endswith(":potential"):
                raise ValueError(f"bad matrix column {col!r}")
            points.append(col[: -len(":potential")])
        mat = cls(org_id, points)
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != len(points) + 2:
                raise ValueError(f"matrix row {lineno}: expected {len(points) + 2} fields")
            try:
                vals = [int(x) for x in row[1:]]
            except ValueError:
                raise ValueError(f"matrix row {lineno}: costs must be integers") from None
            mat.local[row[0]] = vals[0]
            mat.potential[row[0]] = dict(zip(points, vals[1:]))
        return mat


def local_comm_matrix(log_: EventLog, on: OpenNet, cost: CostFunction | None = None,
                      strategy: str = "transport", budget: int = DEFAULT_BUDGET) -> CommCostMatrix:
    """Local alignment cost and potential cost per point for every case."""
    cost = cost or UNIT_COSTS
    orgs = log_.orgs
    if orgs and orgs != [on.org_id]:
        raise ValueError(f"log of {orgs} does not belong to net of {on.org_id!r}")
    points = comm_points(on)
    aligner = Aligner(inner(on), cost, budget)
    maskers = {}
    if strategy == "realign":
        maskers = {cp.place_id: Aligner(inner(mask_channel(on, cp)), cost, budget) for cp in points}
    mat = CommCostMatrix(on.org_id, [cp.place_id for cp in points])
    per_variant: dict = {}
    for case_id, var in variants_by_case(log_).items():
        if var not in per_variant:
            local = aligner.align(var)
            row = {}
            for cp in points:
                if strategy == "realign":
                    raw = maskers[cp.place_id].align(var).total_cost - local.total_cost
                else:
                    masked = {t: cp.mask_label for t in cp.adjacent_transitions}
                    raw = transport(local, masked, cost).total_cost - local.total_cost
                row[cp.place_id] = CommCost(max(raw, 0), raw)
            per_variant[var] = (local.total_cost, row)
        lac, row = per_variant[var]
        mat.local[case_id] = lac
        mat.potential[case_id] = {p: cc.value for p, cc in row.items()}
        mat.clamped.extend((case_id, p) for p, cc in row.items() if cc.clamped)
    if mat.clamped:
        log.warning("%s: %d negative potential costs clamped to 0", on.org_id, len(mat.clamped))
    return mat
