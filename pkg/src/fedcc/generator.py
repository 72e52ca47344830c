"""Supply-chain reference models, a seeded log simulator and fault injection.

Three organizations cooperate: a manufacturer orders goods from a supplier,
which hands them to a shipper for delivery. The nets ship as JSON data files.

The simulator plays the composed private model one case at a time. At every
step it draws one enabled transition with probability proportional to its
weight, restricted to transitions after which the final marking stays
reachable. Weight 0 marks a fallback that only fires when nothing else can.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from fedcc import _kernels
from fedcc.eventlog import Event, EventLog, LogError, serialize_log
from fedcc.federation import channel_registry, compose_all
from fedcc.netio import net_from_dict, serialize_net

ORGS = ("manufacturer", "supplier", "shipper")
SCENARIOS = ("sender_move", "receiver_move", "asynchronous")

# rejection is rare; the shipper only skips when the order was rejected
DEFAULT_WEIGHTS = {"s_t04": 0.1, "sh_skip": 0.0}
BASE_TIME = datetime(2024, 1, 1, 8, 0, tzinfo=timezone.utc)
DEFAULT_SHIFT = timedelta(days=30)


class GeneratorError(ValueError):
    pass


def build_reference_models() -> dict:
    """The three open nets keyed by organization id."""
    nets = {}
    for org in ORGS:
        text = resources.files("fedcc.data").joinpath(f"{org}.json").read_text(encoding="utf-8")
        nets[org] = net_from_dict(json.loads(text))
    return nets


def _state_space(cn, start: np.ndarray, final: bytes):
    """Reachable markings and the subset that can still reach ``final``."""
    seen = {start.tobytes(): start}
    edges: dict = {}
    stack = [start]
    while stack:
        vec = stack.pop()
        key = vec.tobytes()
        idx, nxt = _kernels.successors(vec, cn.pre, cn.post)
        out = []
        for t, m2 in zip(idx, nxt):
            k2 = m2.tobytes()
            out.append((int(t), k2))
            if k2 not in seen:
                seen[k2] = m2
                stack.append(m2)
        edges[key] = out
    preds: dict = {}
    for k, out in edges.items():
        for _, k2 in out:
            preds.setdefault(k2, []).append(k)
    good = set()
    if final in seen:
        good.add(final)
        stack = [final]
        while stack:
            k = stack.pop()
            for p in preds.get(k, ()):
                if p not in good:
                    good.add(p)
                    stack.append(p)
    return seen, edges, good


class Simulator:
    def __init__(self, nets: dict | None = None, weights: dict | None = None):
        self.nets = nets or build_reference_models()
        self.weights = dict(DEFAULT_WEIGHTS if weights is None else weights)
        self.joint = compose_all([self.nets[o] for o in sorted(self.nets)])
        cn = self.joint.net.compiled
        self._cn = cn
        self._start = cn.vector(self.joint.system.initial)
        self._final = cn.vector(self.joint.system.final).tobytes()
        self._states, self._edges, self._good = _state_space(cn, self._start, self._final)
        if self._start.tobytes() not in self._good:
            raise GeneratorError("final marking is unreachable from the initial marking")
        self._owner = {}
        for org, on in self.nets.items():
            for t in on.net.transitions:
                self._owner[t] = org
        # message partner per transition: (in_org, out_org)
        self._partners = {}
        for ch in channel_registry(list(self.nets.values())):
            for t in ch.producers:
                self._partners[t] = (None, ch.receiver_org)
            for t in ch.consumers:
                self._partners[t] = (ch.sender_org, None)

    @property
    def n_states(self) -> int:
        return len(self._states)

    def run(self, rng: np.random.Generator) -> list:
        """One complete firing sequence of the joint model (transition ids)."""
        key = self._start.tobytes()
        seq = []
        tids = self._cn.transitions
        while key != self._final:
            options = [(t, k2) for t, k2 in self._edges[key] if k2 in self._good]
            w = np.array([self.weights.get(tids[t], 1.0) for t, _ in options], dtype=float)
            if w.sum() <= 0:
                w = np.ones(len(options))
            pick = rng.choice(len(options), p=w / w.sum())
            t, key = options[pick]
            seq.append(tids[t])
        return seq

    def simulate(self, n_cases: int, seed: int) -> dict:
        """Private logs keyed by organization id."""
        if n_cases <= 0:
            raise GeneratorError("n_cases must be positive")
        rng = np.random.default_rng(seed)
        events = {org: [] for org in self.nets}
        counters = {org: 0 for org in self.nets}
        width = max(4, len(str(n_cases)))
        labels = self.joint.net.labels
        for i in range(n_cases):
            cid = f"c{i + 1:0{width}d}"
            clock = BASE_TIME + timedelta(hours=i)
            for t in self.run(rng):
                lab = labels.get(t)
                if lab is None:
                    continue
                clock += timedelta(minutes=int(rng.integers(1, 121)))
                org = self._owner[t]
                counters[org] += 1
                m_in, m_out = self._partners.get(t, (None, None))
                events[org].append(Event(f"{org}#{counters[org]:06d}", cid, lab, clock, m_in, m_out, org))
        return {org: EventLog("private", frozenset(evs)) for org, evs in events.items()}


def simulate(n_cases: int, seed: int) -> dict:
    return Simulator().simulate(n_cases, seed)


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: str
    target_activity: str
    channel: str
    case_count: int
    time_shift: timedelta = timedelta(0)
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise GeneratorError(f"unknown scenario {self.scenario!r}")
        if self.case_count <= 0:
            raise GeneratorError("case_count must be positive")
        if self.scenario == "asynchronous" and not self.time_shift:
            raise GeneratorError("asynchronous injection needs a non-zero time shift")
        if not 0 <= self.seed < 2**64:
            raise GeneratorError("seed must fit in 64 unsigned bits")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["time_shift_seconds"] = int(doc.pop("time_shift").total_seconds())
        return doc


def inject(log: EventLog, spec: ScenarioSpec, exclude=()) -> tuple:
    """Apply ``spec`` to a private log; returns the new log and the altered case ids."""
    if log.kind != "private":
        raise LogError("inject expects a private log")
    skip = set(exclude)
    eligible = sorted({e.case_id for e in log.events if e.activity == spec.target_activity} - skip)
    if len(eligible) < spec.case_count:
        raise GeneratorError(
            f"only {len(eligible)} eligible cases contain {spec.target_activity!r}, {spec.case_count} requested"
        )
    rng = np.random.default_rng(spec.seed)
    picked = sorted(eligible[i] for i in rng.choice(len(eligible), size=spec.case_count, replace=False))
    chosen = set(picked)
    out = []
    for e in log.events:
        if e.case_id not in chosen or e.activity != spec.target_activity:
            out.append(e)
        elif spec.scenario == "asynchronous":
            out.append(Event(e.event_id, e.case_id, e.activity, e.timestamp + spec.time_shift,
                             e.msg_in, e.msg_out, e.org_id))
    return EventLog("private", frozenset(out)), picked


@dataclass(frozen=True)
class Injection:
    org: str
    spec: ScenarioSpec


def evaluation_scenarios(seed: int = 0) -> list:
    """The three miscommunications of the supply-chain evaluation (10/19/5 cases)."""
    return [
        Injection("manufacturer", ScenarioSpec("sender_move", "dispatched", "order_dispatch", 10, seed=seed)),
        Injection("shipper", ScenarioSpec("receiver_move", "preparation", "shipment_started", 19, seed=seed + 1)),
        Injection("shipper", ScenarioSpec("asynchronous", "delivery", "delivery_notice", 5, DEFAULT_SHIFT, seed + 2)),
    ]


@dataclass
class Dataset:
    nets: dict
    logs: dict
    seed: int
    n_cases: int
    injections: list = field(default_factory=list)

    def manifest(self) -> dict:
        orgs = {}
        for org, on in sorted(self.nets.items()):
            lg = self.logs[org]
            orgs[org] = {
                "cases": len(lg.cases),
                "events": len(lg),
                "activities": len({l for l in on.net.labels.values() if l is not None}),
                "communication_points": len(on.interface),
            }
        return {
            "seed": self.seed,
            "n_cases": self.n_cases,
            "channels": [c.place_id for c in channel_registry(list(self.nets.values()))],
            "organizations": orgs,
            "injections": self.injections,
        }

    def apply(self, injections: list, disjoint: bool = True) -> Dataset:
        """Inject scenarios in order; with ``disjoint`` no case is hit twice."""
        logs = dict(self.logs)
        done = list(self.injections)
        used = {c for inj in done for c in inj["cases"]} if disjoint else set()
        for inj in injections:
            if inj.org not in logs:
                raise GeneratorError(f"unknown organization {inj.org!r}")
            logs[inj.org], cases = inject(logs[inj.org], inj.spec, exclude=used)
            if disjoint:
                used |= set(cases)
            done.append({"org": inj.org, **inj.spec.to_dict(), "cases": cases})
        return Dataset(self.nets, logs, self.seed, self.n_cases, done)

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        for org in sorted(self.nets):
            d = out / org
            d.mkdir(parents=True, exist_ok=True)
            (d / "net.json").write_text(serialize_net(self.nets[org]), encoding="utf-8")
            (d / "log.csv").write_text(serialize_log(self.logs[org]), encoding="utf-8")
        (out / "manifest.json").write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return out


def generate(n_cases: int, seed: int) -> Dataset:
    sim = Simulator()
    return Dataset(sim.nets, sim.simulate(n_cases, seed), seed, n_cases)
