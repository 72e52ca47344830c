import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import _oracle
from fedcc.federation import compose
from fedcc.petri import (
    LabeledNet, Marking, NetError, NotEnabled, OpenNet, SystemNet, apply_labeling, enabled_transitions,
    enumerate_visible_traces, fire, fire_sequence, inner, to_public, validate_open_net,
)


def test_enabled_order_net(order_net):
    net = order_net.net
    assert enabled_transitions(net, Marking({"start": 1})) == {"t1"}
    assert enabled_transitions(net, Marking({"p2": 1, "p3": 1})) == {"t3", "t4"}
    assert enabled_transitions(net, Marking()) == set()


def test_fire_order_net(order_net):
    net = order_net.net
    assert fire(net, Marking({"start": 1}), "t1") == Marking({"p1": 1})
    assert fire(net, Marking({"p1": 1}), "t2") == Marking({"p2": 1, "p3": 1})
    with pytest.raises(NotEnabled):
        fire(net, Marking({"start": 1}), "t3")
    with pytest.raises(NetError, match="unknown transition"):
        fire(net, Marking({"start": 1}), "t9")


def test_fire_sequence_order_net(order_net):
    sn = order_net.system
    assert fire_sequence(sn, ["t1", "t2", "t3", "t4", "t5"]) == Marking({"end": 1})
    assert fire_sequence(sn, ["t1", "t2", "t4", "t3", "t5"]) == Marking({"end": 1})
    assert fire_sequence(sn, []) == sn.initial
    with pytest.raises(NotEnabled, match="step 2"):
        fire_sequence(sn, ["t1", "t3"])


def test_apply_labeling(order_net):
    labels = order_net.net.labels
    assert apply_labeling(labels, ["t1", "t2", "t3", "t4", "t5"]) == ("po", "so", "gr", "ir", "pa")
    assert apply_labeling(labels, []) == ()
    assert apply_labeling({}, ["t1", "t2"]) == ()


def test_marking_multiset():
    m = Marking(["a", "a", "b"])
    assert m["a"] == 2 and m["c"] == 0 and m.size() == 3
    assert m + {"c": 1} == Marking(a=2, b=1, c=1)
    assert m - {"a": 1} == Marking(a=1, b=1)
    assert hash(Marking(a=1)) == hash(Marking({"a": 1, "z": 0}))
    assert Marking(a=1) == {"a": 1}
    with pytest.raises(NetError):
        Marking(a=-1)


def test_net_invariants():
    with pytest.raises(NetError, match="both"):
        LabeledNet({"x"}, {"x"}, set())
    with pytest.raises(NetError, match="does not connect"):
        LabeledNet({"p", "q"}, {"t"}, {("p", "q")})
    with pytest.raises(NetError, match="unknown"):
        SystemNet(LabeledNet({"p"}, set(), set()), {"q": 1}, {})


def test_inner_drops_interface(m1_net):
    sn = inner(m1_net)
    assert not ({"io1", "io2", "io3"} & sn.net.places)
    assert all(not ({a, b} & {"io1", "io2", "io3"}) for a, b in sn.net.arcs)
    assert sn.net.transitions == m1_net.net.transitions
    assert sn.net.places == m1_net.internal_places
    kept = {a for a in m1_net.net.arcs if not ({*a} & m1_net.interface)}
    assert sn.net.arcs == kept
    assert sn.net.labels == m1_net.net.labels


def test_inner_closed_net_is_identity(order_net):
    sn = inner(order_net)
    assert sn.net == order_net.net and sn.initial == order_net.system.initial


def test_visible_traces_order_net(order_net):
    vt = enumerate_visible_traces(order_net.system, 10, 10_000)
    assert vt.traces == {("po", "so", "gr", "ir", "pa"), ("po", "so", "ir", "gr", "pa")}
    assert not vt.truncated


def test_visible_traces_trivial_and_bounds():
    sn = SystemNet(LabeledNet({"p"}, set(), set()), {"p": 1}, {"p": 1})
    assert enumerate_visible_traces(sn).traces == {()}
    with pytest.raises(ValueError):
        enumerate_visible_traces(sn, 0)


def test_visible_traces_truncation(order_net):
    vt = enumerate_visible_traces(order_net.system, 3, 100)
    assert vt.truncated and vt.traces == set()


def test_visible_traces_collaborative_replay(m1_net, s1_net):
    col = compose(to_public(m1_net), to_public(s1_net))
    vt = enumerate_visible_traces(col.system, 30, 10**6)
    assert vt.traces and not vt.truncated
    plain = _oracle.from_package_net(col.system)
    oracle = _oracle.visible_traces(plain, 30)
    assert vt.traces == oracle


def test_validate_manufacturer_net(m1_net):
    rep = validate_open_net(m1_net)
    assert rep.valid
    assert rep.t_int == {"m1_t1", "m1_t3"}
    assert rep.t_com == {"m1_t2", "m1_t4", "m1_t5"}


def _mutate(on: OpenNet, *, arcs=None, initial=None, final=None, inputs=None, outputs=None, labels=None):
    net = on.net
    ln = LabeledNet(net.places, net.transitions, net.arcs if arcs is None else arcs,
                    net.labels if labels is None else labels)
    sn = SystemNet(ln, on.system.initial if initial is None else initial, on.system.final if final is None else final)
    return OpenNet(sn, on.inputs if inputs is None else inputs, on.outputs if outputs is None else outputs, on.org_id)


MUTATIONS = {
    "disjointness": lambda on: _mutate(on, inputs=on.inputs | {"io1"}),
    "marking-zero": lambda on: _mutate(on, initial=on.system.initial + {"io2": 1}),
    "marking-zero-final": lambda on: _mutate(on, final=on.system.final + {"io3": 1}),
    "input-preset": lambda on: _mutate(on, arcs=on.net.arcs | {("m1_t1", "io2")}),
    "output-postset": lambda on: _mutate(on, arcs=on.net.arcs | {("io1", "m1_t3")}),
    "visible-internal": lambda on: to_public(on),
}


@pytest.mark.parametrize("clause", sorted(MUTATIONS))
def test_validate_mutations(m1_net, clause):
    rep = validate_open_net(MUTATIONS[clause](m1_net))
    assert not rep.valid
    kinds = [v.split(":")[0].split(" ")[0] for v in rep.violations]
    assert kinds[0] == clause.removesuffix("-final")
    # an output place turned input also keeps its producer
    assert len(kinds) == (2 if clause == "disjointness" else 1)


def test_validate_all_silent_internal(m1_net):
    silent = m1_net.with_labels({"m1_t1": None, "m1_t3": None})
    assert any(v.startswith("visible-internal") for v in validate_open_net(silent).violations)


@st.composite
def oracle_nets(draw):
    seed = draw(st.integers(0, 10**6))
    return _oracle.random_net(random.Random(seed))


@settings(max_examples=80, deadline=None)
@given(oracle_nets(), st.integers(0, 10**6))
def test_firing_matches_oracle(plain, seed):
    sn = _oracle.to_package_net(plain)
    rng = random.Random(seed)
    m, pm = sn.initial, dict(plain.initial)
    for _ in range(8):
        en = enabled_transitions(sn.net, m)
        assert en == set(_oracle.enabled(plain, pm))
        if not en:
            break
        t = rng.choice(sorted(en))
        m2 = fire(sn.net, m, t)
        assert m2.size() == m.size() - len(sn.net.preset(t)) + len(sn.net.postset(t))
        m, pm = m2, _oracle.fire(plain, pm, t)
        assert m == Marking(pm)


@settings(max_examples=60, deadline=None)
@given(oracle_nets())
def test_visible_traces_match_oracle(plain):
    sn = _oracle.to_package_net(plain)
    vt = enumerate_visible_traces(sn, max_len=6, max_states=10**5)
    expected = _oracle.visible_traces(plain, 6)
    # the package bounds firing length, the oracle visible length
    assert vt.traces <= expected
    if not vt.truncated:
        assert vt.traces == expected


def test_compiled_arrays(order_net):
    cn = order_net.net.compiled
    assert cn.pre.dtype == np.int32 and cn.pre.shape == (5, 7)
    v = cn.vector(Marking({"p2": 1, "p3": 1}))
    assert cn.marking(v) == Marking({"p2": 1, "p3": 1})
    with pytest.raises(NetError):
        cn.vector(Marking({"nowhere": 1}))
