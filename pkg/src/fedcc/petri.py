"""Labeled Petri nets, system nets and open nets.

Arc weights are 1. Silent transitions are those absent from the labeling;
masked communication transitions carry the reserved labels ``TAU_IN`` and
``TAU_OUT``, which never synchronize with log activities.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from fedcc import _kernels

TAU_IN = "__tau_in__"
TAU_OUT = "__tau_out__"
MASK_LABELS = frozenset({TAU_IN, TAU_OUT})


class NetError(ValueError):
    pass


class NotEnabled(NetError):
    pass


class Marking(Mapping):
    """Immutable multiset over place ids; hashable."""

    __slots__ = ("_items", "_hash")

    def __init__(self, counts=None, **kw):
        if counts is None:
            counts = {}
        elif isinstance(counts, Marking):
            counts = dict(counts._items)
        elif not isinstance(counts, Mapping):
            acc: dict = {}
            for p in counts:
                acc[p] = acc.get(p, 0) + 1
            counts = acc
        merged = dict(counts)
        merged.update(kw)
        for p, n in merged.items():
            if not isinstance(n, (int, np.integer)) or n < 0:
                raise NetError(f"invalid token count {n!r} for place {p!r}")
        self._items = tuple(sorted((p, int(n)) for p, n in merged.items() if n))
        self._hash = hash(self._items)

    def __getitem__(self, p):
        for q, n in self._items:
            if q == p:
                return n
        return 0

    def __contains__(self, p):
        return any(q == p for q, _ in self._items)

    def __iter__(self):
        return (p for p, _ in self._items)

    def __len__(self):
        return len(self._items)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Marking):
            return self._items == other._items
        if isinstance(other, Mapping):
            return self == Marking(other)
        return NotImplemented

    def __add__(self, other):
        acc = dict(self._items)
        for p, n in Marking(other)._items:
            acc[p] = acc.get(p, 0) + n
        return Marking(acc)

    def __sub__(self, other):
        acc = dict(self._items)
        for p, n in Marking(other)._items:
            acc[p] = max(acc.get(p, 0) - n, 0)
        return Marking(acc)

    def items(self):
        return self._items

    def size(self) -> int:
        return sum(n for _, n in self._items)

    def __repr__(self):
        inner = ",".join(p if n == 1 else f"{p}^{n}" for p, n in self._items)
        return f"[{inner}]"


@dataclass(frozen=True, eq=True)
class LabeledNet:
    places: frozenset
    transitions: frozenset
    arcs: frozenset
    labels: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "places", frozenset(self.places))
        object.__setattr__(self, "transitions", frozenset(self.transitions))
        object.__setattr__(self, "arcs", frozenset(tuple(a) for a in self.arcs))
        object.__setattr__(self, "labels", {t: l for t, l in dict(self.labels).items() if l is not None})
        both = self.places & self.transitions
        if both:
            raise NetError(f"ids used as both place and transition: {sorted(both)}")
        for src, dst in self.arcs:
            if src in self.places and dst in self.transitions:
                continue
            if src in self.transitions and dst in self.places:
                continue
            raise NetError(f"arc ({src}, {dst}) does not connect a place and a transition of the net")
        unknown = set(self.labels) - self.transitions
        if unknown:
            raise NetError(f"labels for unknown transitions: {sorted(unknown)}")

    __hash__ = None

    def label(self, t):
        """Activity label of ``t`` or ``None`` when silent."""
        return self.labels.get(t)

    def preset(self, x) -> frozenset:
        return self._presets.get(x, frozenset())

    def postset(self, x) -> frozenset:
        return self._postsets.get(x, frozenset())

    @cached_property
    def _presets(self):
        acc: dict = {}
        for src, dst in self.arcs:
            acc.setdefault(dst, set()).add(src)
        return {k: frozenset(v) for k, v in acc.items()}

    @cached_property
    def _postsets(self):
        acc: dict = {}
        for src, dst in self.arcs:
            acc.setdefault(src, set()).add(dst)
        return {k: frozenset(v) for k, v in acc.items()}

    @cached_property
    def compiled(self) -> CompiledNet:
        return CompiledNet(self)

    def relabel(self, mapping: Mapping) -> LabeledNet:
        """Copy with labels overridden by ``mapping`` (``None`` makes silent)."""
        labels = dict(self.labels)
        for t, l in mapping.items():
            if t not in self.transitions:
                raise NetError(f"unknown transition {t!r}")
            if l is None:
                labels.pop(t, None)
            else:
                labels[t] = l
        return LabeledNet(self.places, self.transitions, self.arcs, labels)


class CompiledNet:
    """Dense incidence arrays with a stable (sorted) node order."""

    def __init__(self, net: LabeledNet):
        self.places = sorted(net.places)
        self.transitions = sorted(net.transitions)
        self.place_index = {p: i for i, p in enumerate(self.places)}
        self.trans_index = {t: i for i, t in enumerate(self.transitions)}
        n_t, n_p = len(self.transitions), len(self.places)
        self.pre = np.zeros((n_t, n_p), dtype=np.int32)
        self.post = np.zeros((n_t, n_p), dtype=np.int32)
        for src, dst in net.arcs:
            if src in self.place_index:
                self.pre[self.trans_index[dst], self.place_index[src]] = 1
            else:
                self.post[self.trans_index[src], self.place_index[dst]] = 1
        self.labels = [net.label(t) for t in self.transitions]

    def vector(self, m: Marking) -> np.ndarray:
        v = np.zeros(len(self.places), dtype=np.int32)
        for p, n in m.items():
            try:
                v[self.place_index[p]] = n
            except KeyError:
                raise NetError(f"marking refers to unknown place {p!r}") from None
        return v

    def marking(self, v: np.ndarray) -> Marking:
        return Marking({self.places[i]: int(n) for i, n in enumerate(v) if n})


@dataclass(frozen=True)
class SystemNet:
    net: LabeledNet
    initial: Marking
    final: Marking

    def __post_init__(self):
        object.__setattr__(self, "initial", Marking(self.initial))
        object.__setattr__(self, "final", Marking(self.final))
        for m in (self.initial, self.final):
            stray = set(m) - self.net.places
            if stray:
                raise NetError(f"marking refers to unknown places {sorted(stray)}")

    __hash__ = None


@dataclass(frozen=True)
class OpenNet:
    system: SystemNet
    inputs: frozenset
    outputs: frozenset
    org_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "inputs", frozenset(self.inputs))
        object.__setattr__(self, "outputs", frozenset(self.outputs))
        stray = (self.inputs | self.outputs) - self.net.places
        if stray:
            raise NetError(f"interface places missing from net: {sorted(stray)}")

    __hash__ = None

    @property
    def net(self) -> LabeledNet:
        return self.system.net

    @property
    def interface(self) -> frozenset:
        return self.inputs | self.outputs

    @property
    def internal_places(self) -> frozenset:
        return self.net.places - self.interface

    @property
    def t_com(self) -> frozenset:
        iface = self.interface
        return frozenset(
            t for t in self.net.transitions if (self.net.preset(t) | self.net.postset(t)) & iface
        )

    @property
    def t_int(self) -> frozenset:
        return self.net.transitions - self.t_com

    def with_labels(self, mapping: Mapping) -> OpenNet:
        sn = SystemNet(self.net.relabel(mapping), self.system.initial, self.system.final)
        return OpenNet(sn, self.inputs, self.outputs, self.org_id)


def enabled_transitions(net: LabeledNet, m: Marking) -> set:
    return {t for t in net.transitions if all(m[p] >= 1 for p in net.preset(t))}


def fire(net: LabeledNet, m: Marking, t) -> Marking:
    if t not in net.transitions:
        raise NetError(f"unknown transition {t!r}")
    if any(m[p] < 1 for p in net.preset(t)):
        raise NotEnabled(f"transition {t!r} not enabled in {m!r}")
    return (m - Marking(net.preset(t))) + Marking(net.postset(t))


def fire_sequence(sn: SystemNet, seq: Iterable) -> Marking:
    m = sn.initial
    for k, t in enumerate(seq, start=1):
        try:
            m = fire(sn.net, m, t)
        except NotEnabled:
            raise NotEnabled(f"step {k}: transition {t!r} not enabled in {m!r}") from None
    return m


def apply_labeling(labels: Mapping, seq: Iterable) -> tuple:
    return tuple(labels[x] for x in seq if x in labels)


def inner(on: OpenNet) -> SystemNet:
    """System net with the interface places and their arcs removed."""
    iface = on.interface
    net = on.net
    arcs = frozenset(a for a in net.arcs if a[0] not in iface and a[1] not in iface)
    stripped = LabeledNet(net.places - iface, net.transitions, arcs, net.labels)
    return SystemNet(stripped, on.system.initial, on.system.final)


def to_public(on: OpenNet) -> OpenNet:
    """Hide every internal transition's label."""
    return on.with_labels({t: None for t in on.t_int})


@dataclass
class VisibleTraces:
    traces: set
    truncated: bool
    states: int


def enumerate_visible_traces(sn: SystemNet, max_len: int = 50, max_states: int = 100_000) -> VisibleTraces:
    """Breadth-first collection of visible traces of complete firing sequences.

    ``max_len`` bounds the firing-sequence length and ``max_states`` the number
    of distinct ``(marking, visible prefix)`` states; hitting either sets
    ``truncated``.
    """
    if max_len <= 0 or max_states <= 0:
        raise ValueError("bounds must be positive")
    cn = sn.net.compiled
    final = cn.vector(sn.final).tobytes()
    start = cn.vector(sn.initial)
    seen = {(start.tobytes(), ())}
    frontier = deque([(start, (), 0)])
    traces = set()
    truncated = False
    while frontier:
        vec, vis, depth = frontier.popleft()
        if vec.tobytes() == final:
            traces.add(vis)
        idx, nxt = _kernels.successors(vec, cn.pre, cn.post)
        if len(idx) and depth >= max_len:
            truncated = True
            continue
        for t, m2 in zip(idx, nxt):
            lab = cn.labels[t]
            vis2 = vis + (lab,) if lab is not None else vis
            key = (m2.tobytes(), vis2)
            if key in seen:
                continue
            if len(seen) >= max_states:
                truncated = True
                continue
            seen.add(key)
            frontier.append((m2, vis2, depth + 1))
    return VisibleTraces(traces, truncated, len(seen))


@dataclass
class OpenNetReport:
    violations: list
    t_int: frozenset
    t_com: frozenset

    @property
    def valid(self) -> bool:
        return not self.violations


def validate_open_net(on: OpenNet) -> OpenNetReport:
    """Check the open-net clauses. Internal places are the complement of the
    interface, so only the I/O part of disjointness can fail here; overlaps in
    a declared place list are rejected when the net is parsed."""
    net = on.net
    violations = []
    common = on.inputs & on.outputs
    if common:
        violations.append(f"disjointness I/O: {sorted(common)}")
    for p in sorted(on.interface):
        if on.system.initial[p] or on.system.final[p]:
            violations.append(f"marking-zero: interface place {p} is marked initially or finally")
    for p in sorted(on.inputs):
        if net.preset(p):
            violations.append(f"input-preset: input place {p} has producers {sorted(net.preset(p))}")
    for p in sorted(on.outputs):
        if net.postset(p):
            violations.append(f"output-postset: output place {p} has consumers {sorted(net.postset(p))}")
    t_int, t_com = on.t_int, on.t_com
    if not any(net.label(t) is not None and net.label(t) not in MASK_LABELS for t in t_int):
        violations.append("visible-internal: no internal transition carries a visible label")
    return OpenNetReport(violations, t_int, t_com)
