"""JSON (de)serialization of open nets.

Schema::

    {"org": str, "places": [str], "transitions": [{"id": str, "label": str|null}],
     "arcs": [[str, str]], "initial_marking": {place: int},
     "final_marking": {place: int}, "input_places": [str], "output_places": [str]}

``places`` lists the internal places only; interface places appear in
``input_places``/``output_places``.
"""
from __future__ import annotations

import json

import jsonschema

from fedcc.eventlog import RESERVED_LABELS
from fedcc.petri import MASK_LABELS, LabeledNet, NetError, OpenNet, SystemNet

NET_SCHEMA = {
    "type": "object",
    "required": [
        "org", "places", "transitions", "arcs",
        "initial_marking", "final_marking", "input_places", "output_places",
    ],
    "additionalProperties": False,
    "properties": {
        "org": {"type": "string"},
        "places": {"type": "array", "items": {"type": "string"}, "uniqueItems": True},
        "transitions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "label"],
                "additionalProperties": False,
                "properties": {"id": {"type": "string"}, "label": {"type": ["string", "null"]}},
            },
        },
        "arcs": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
        },
        "initial_marking": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 0}},
        "final_marking": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 0}},
        "input_places": {"type": "array", "items": {"type": "string"}, "uniqueItems": True},
        "output_places": {"type": "array", "items": {"type": "string"}, "uniqueItems": True},
    },
}


class NetFormatError(NetError):
    pass


def net_from_dict(doc: dict, allow_masked: bool = False) -> OpenNet:
    try:
        jsonschema.validate(doc, NET_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "$" + "".join(f"[{p!r}]" if isinstance(p, str) else f"[{p}]" for p in exc.absolute_path)
        raise NetFormatError(f"{path}: {exc.message}") from None
    iface = set(doc["input_places"]) | set(doc["output_places"])
    overlap = sorted(set(doc["places"]) & iface)
    if overlap:
        raise NetFormatError(f"$['places']: interface places listed as internal: {overlap}")
    places = set(doc["places"]) | iface
    tids = [t["id"] for t in doc["transitions"]]
    if len(set(tids)) != len(tids):
        raise NetFormatError("$['transitions']: duplicate transition ids")
    labels = {}
    reserved = RESERVED_LABELS - (MASK_LABELS if allow_masked else set())
    for i, t in enumerate(doc["transitions"]):
        if t["label"] in reserved:
            raise NetFormatError(f"$['transitions'][{i}]['label']: reserved label {t['label']!r}")
        labels[t["id"]] = t["label"]
    for i, (src, dst) in enumerate(doc["arcs"]):
        for j, node in enumerate((src, dst)):
            if node not in places and node not in labels:
                raise NetFormatError(f"$['arcs'][{i}][{j}]: unknown node {node!r}")
    for key in ("initial_marking", "final_marking"):
        for p in doc[key]:
            if p not in places:
                raise NetFormatError(f"$[{key!r}][{p!r}]: unknown place")
    try:
        net = LabeledNet(places, set(tids), {tuple(a) for a in doc["arcs"]}, labels)
        sn = SystemNet(net, doc["initial_marking"], doc["final_marking"])
        return OpenNet(sn, doc["input_places"], doc["output_places"], doc["org"])
    except NetError as exc:
        raise NetFormatError(f"$: {exc}") from None


def net_to_dict(on: OpenNet) -> dict:
    net = on.net
    return {
        "org": on.org_id,
        "places": sorted(on.internal_places),
        "transitions": [{"id": t, "label": net.label(t)} for t in sorted(net.transitions)],
        "arcs": [list(a) for a in sorted(net.arcs)],
        "initial_marking": dict(on.system.initial.items()),
        "final_marking": dict(on.system.final.items()),
        "input_places": sorted(on.inputs),
        "output_places": sorted(on.outputs),
    }


def parse_net(text: str, allow_masked: bool = False) -> OpenNet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetFormatError(f"$: invalid JSON ({exc})") from None
    return net_from_dict(doc, allow_masked=allow_masked)


def serialize_net(on: OpenNet) -> str:
    return json.dumps(net_to_dict(on), indent=2, sort_keys=True) + "\n"


def load_net(path) -> OpenNet:
    with open(path, encoding="utf-8") as fh:
        return parse_net(fh.read())


def save_net(on: OpenNet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_net(on))
