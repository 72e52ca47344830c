"""Optimal alignments by uniform-cost search over the synchronous product.

Search states are ``(marking, trace position)``. Among equal-cost alignments
the one with fewer moves wins, then the lexicographically smallest move
sequence under the key ``(kind, transition id, activity)`` with
``sync < model < log``. Because these keys only grow when a path is
extended, the first time the final state is popped its path is the unique
minimum, so results do not depend on heap insertion order.
"""
from __future__ import annotations

import heapq
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from fedcc import _kernels
from fedcc.petri import MASK_LABELS, TAU_IN, TAU_OUT, SystemNet

DEFAULT_BUDGET = 1_000_000
_RANK = {"sync": 0, "model": 1, "log": 2}


class SearchExhausted(RuntimeError):
    def __init__(self, expanded: int, budget: int, variant):
        super().__init__(f"state budget exhausted after {expanded} expansions (budget {budget}) for {list(variant)}")
        self.expanded = expanded
        self.budget = budget
        self.variant = tuple(variant)


@dataclass(frozen=True)
class CostFunction:
    log_costs: Mapping = field(default_factory=dict)
    model_costs: Mapping = field(default_factory=dict)
    log_default: int = 1
    model_default: int = 1
    input_label_cost: int = 0
    output_label_cost: int = 0

    def __post_init__(self):
        values = [self.log_default, self.model_default, self.input_label_cost, self.output_label_cost]
        values += list(self.log_costs.values()) + list(self.model_costs.values())
        for v in values:
            if not isinstance(v, int) or v < 0:
                raise ValueError(f"costs must be non-negative integers, got {v!r}")

    __hash__ = None

    def log(self, activity) -> int:
        return self.log_costs.get(activity, self.log_default)

    def model(self, label) -> int:
        if label is None:
            return 0
        if label == TAU_IN:
            return self.input_label_cost
        if label == TAU_OUT:
            return self.output_label_cost
        return self.model_costs.get(label, self.model_default)

    def scaled(self, k: int) -> CostFunction:
        return CostFunction(
            {a: c * k for a, c in self.log_costs.items()},
            {a: c * k for a, c in self.model_costs.items()},
            self.log_default * k,
            self.model_default * k,
            self.input_label_cost * k,
            self.output_label_cost * k,
        )

    @property
    def is_uniform(self) -> bool:
        return (
            not self.log_costs and not self.model_costs
            and self.log_default == 1 and self.model_default == 1
            and self.input_label_cost == 0 and self.output_label_cost == 0
        )


UNIT_COSTS = CostFunction()


@dataclass(frozen=True)
class Move:
    kind: str
    activity: str | None = None
    transition: str | None = None
    label: str | None = None
    cost: int = 0

    @property
    def visible(self) -> bool:
        return self.kind == "log" or self.label is not None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "activity": self.activity,
            "transition": self.transition,
            "label": self.label,
            "cost": self.cost,
        }

    def __str__(self):
        if self.kind == "log":
            return f"({self.activity},>>)"
        lab = self.label if self.label is not None else "tau"
        if self.kind == "sync":
            return f"({self.activity},({lab},{self.transition}))"
        return f"(>>,({lab},{self.transition}))"


@dataclass(frozen=True)
class Alignment:
    moves: tuple
    total_cost: int

    @property
    def log_projection(self) -> tuple:
        return tuple(m.activity for m in self.moves if m.kind != "model")

    @property
    def model_projection(self) -> tuple:
        return tuple(m.transition for m in self.moves if m.kind != "log")

    def non_sync_visible(self) -> list:
        return [m for m in self.moves if m.kind != "sync" and m.visible]

    def to_dict(self, fitness: Fraction | None = None) -> dict:
        doc = {"moves": [m.to_dict() for m in self.moves], "total_cost": self.total_cost}
        if fitness is not None:
            doc["fitness"] = format_fitness(fitness)
        return doc


def format_fitness(value: Fraction) -> str:
    return f"{float(value):.6f}"


class Aligner:
    """Aligns variants against one system net, sharing a successor cache.

    Results are memoized per variant.
    """

    def __init__(self, sn: SystemNet, cost: CostFunction | None = None, budget: int = DEFAULT_BUDGET):
        if budget <= 0:
            raise ValueError("budget must be positive")
        self.sn = sn
        self.cost = cost or UNIT_COSTS
        self.budget = budget
        cn = sn.net.compiled
        self._cn = cn
        self._pre, self._post = cn.pre, cn.post
        # masked transitions never synchronize
        self._labels = [None if l in MASK_LABELS else l for l in cn.labels]
        self._tids = cn.transitions
        self._model_cost = [self.cost.model(l) for l in cn.labels]
        self._start = cn.vector(sn.initial)
        self._final = cn.vector(sn.final).tobytes()
        self._succ: dict = {}
        self._memo: dict = {}
        self.expanded = 0

    def _successors(self, key: bytes, vec: np.ndarray):
        hit = self._succ.get(key)
        if hit is None:
            idx, nxt = _kernels.successors(vec, self._pre, self._post)
            hit = [(int(t), m, m.tobytes()) for t, m in zip(idx, nxt)]
            self._succ[key] = hit
        return hit

    def align(self, variant) -> Alignment:
        variant = tuple(variant)
        hit = self._memo.get(variant)
        if hit is None:
            hit = self._search(variant)
            self._memo[variant] = hit
        return hit

    def _search(self, trace: tuple) -> Alignment:
        n = len(trace)
        log_cost = [self.cost.log(a) for a in trace]
        labels, tids, model_cost = self._labels, self._tids, self._model_cost
        start = self._start
        skey = (start.tobytes(), 0)
        # entries: (g, n_moves, path, state_key, marking)
        heap = [(0, 0, (), skey, start)]
        best = {skey: (0, 0, ())}
        closed = set()
        expanded = 0
        while heap:
            g, nm, path, key, vec = heapq.heappop(heap)
            if key in closed:
                continue
            closed.add(key)
            expanded += 1
            if expanded > self.budget:
                self.expanded += expanded
                raise SearchExhausted(expanded, self.budget, trace)
            mkey, pos = key
            if pos == n and mkey == self._final:
                self.expanded += expanded
                return self._build(trace, path, g)
            a = trace[pos] if pos < n else None
            pushes = []
            if a is not None:
                pushes.append((g + log_cost[pos], (2, "", a), (mkey, pos + 1), vec))
            for t, vec2, mkey2 in self._successors(mkey, vec):
                pushes.append((g + model_cost[t], (1, tids[t], ""), (mkey2, pos), vec2))
                if a is not None and labels[t] == a:
                    pushes.append((g, (0, tids[t], a), (mkey2, pos + 1), vec2))
            for g2, mk, key2, vec2 in pushes:
                if key2 in closed:
                    continue
                path2 = (path, mk)
                cand = (g2, nm + 1, path2)
                old = best.get(key2)
                if old is not None and old <= cand:
                    continue
                best[key2] = cand
                heapq.heappush(heap, (g2, nm + 1, path2, key2, vec2))
        self.expanded += expanded
        raise SearchExhausted(expanded, self.budget, trace)

    def _build(self, trace, path, total) -> Alignment:
        keys = []
        while path:
            path, mk = path
            keys.append(mk)
        keys.reverse()
        net = self.sn.net
        moves = []
        for rank, tid, act in keys:
            if rank == 2:
                moves.append(Move("log", activity=act, cost=self.cost.log(act)))
            elif rank == 1:
                lab = net.label(tid)
                moves.append(Move("model", transition=tid, label=lab, cost=self.cost.model(lab)))
            else:
                moves.append(Move("sync", activity=act, transition=tid, label=act, cost=0))
        assert sum(m.cost for m in moves) == total
        return Alignment(tuple(moves), total)


def optimal_alignment(variant, sn: SystemNet, cost: CostFunction | None = None, budget: int = DEFAULT_BUDGET) -> Alignment:
    return Aligner(sn, cost, budget).align(variant)


@dataclass
class BatchEntry:
    count: int
    alignment: Alignment | None = None
    error: str | None = None


def align_log(simple_log: Counter, sn: SystemNet, cost: CostFunction | None = None, budget: int = DEFAULT_BUDGET, aligner: Aligner | None = None) -> dict:
    """Align every distinct variant once; failures are recorded per variant."""
    aligner = aligner or Aligner(sn, cost, budget)
    out = {}
    for var in sorted(simple_log):
        entry = BatchEntry(simple_log[var])
        try:
            entry.alignment = aligner.align(var)
        except SearchExhausted as exc:
            entry.error = str(exc)
        out[var] = entry
    return out


def worst_cost(variant, sn: SystemNet, cost: CostFunction | None = None, budget: int = DEFAULT_BUDGET, aligner: Aligner | None = None) -> int:
    """Cost of moving every event on the log alone plus the cheapest model run."""
    aligner = aligner or Aligner(sn, cost, budget)
    return sum(aligner.cost.log(a) for a in variant) + aligner.align(()).total_cost


def fitness(variant, sn: SystemNet, cost: CostFunction | None = None, budget: int = DEFAULT_BUDGET, aligner: Aligner | None = None) -> Fraction:
    aligner = aligner or Aligner(sn, cost, budget)
    opt = aligner.align(variant).total_cost
    worst = worst_cost(variant, sn, aligner=aligner)
    if worst == 0:
        return Fraction(1)
    return 1 - Fraction(opt, worst)
