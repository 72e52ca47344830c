"""On-disk layout of organizations and datasets.

Each organization owns a directory::

    <org>/log.csv          private log
    <org>/net.json         private open net
    <org>/shared/          what leaves the organization
        log.csv            public log
        net.json           public net
        commcost.csv       local alignment and potential communication costs

A dataset is a directory of organization directories plus ``manifest.json``.
"""
from __future__ import annotations

import json
from pathlib import Path

from fedcc.alignment import DEFAULT_BUDGET, CostFunction
from fedcc.communication import CommCostMatrix, local_comm_matrix
from fedcc.eventlog import parse_log, project_public, serialize_log
from fedcc.federation import OrgShare
from fedcc.generator import GeneratorError, inject, ScenarioSpec
from fedcc.netio import load_net, save_net
from fedcc.petri import to_public

SHARED = "shared"
MANIFEST = "manifest.json"


def read_text(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def share_org(org_dir, cost: CostFunction | None = None, strategy: str = "transport",
              budget: int = DEFAULT_BUDGET) -> Path:
    """Compute and write the public artifacts of one organization."""
    org_dir = Path(org_dir)
    on = load_net(org_dir / "net.json")
    log = parse_log(read_text(org_dir / "log.csv"), "private")
    matrix = local_comm_matrix(log, on, cost, strategy, budget)
    out = org_dir / SHARED
    out.mkdir(exist_ok=True)
    write_text(out / "log.csv", serialize_log(project_public(log)))
    save_net(to_public(on), out / "net.json")
    write_text(out / "commcost.csv", matrix.to_csv())
    return out


def load_share(org_dir) -> OrgShare:
    """Read only the shared artifacts of an organization."""
    shared = Path(org_dir) / SHARED
    if not shared.is_dir():
        raise FileNotFoundError(f"{shared} does not exist; run share first")
    on = load_net(shared / "net.json")
    log = parse_log(read_text(shared / "log.csv"), "public")
    matrix = CommCostMatrix.from_csv(read_text(shared / "commcost.csv"), on.org_id)
    return OrgShare(on.org_id, log, on, matrix)


def org_dirs(paths) -> list:
    """Expand dataset directories (those holding a manifest) into their organizations."""
    out = []
    for p in map(Path, paths):
        if (p / MANIFEST).is_file():
            out.extend(sorted(d for d in p.iterdir() if (d / "net.json").is_file()))
        else:
            out.append(p)
    return out


def load_manifest(dataset) -> dict:
    return json.loads(read_text(Path(dataset) / MANIFEST))


def save_manifest(dataset, doc: dict) -> None:
    write_text(Path(dataset) / MANIFEST, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def find_target(dataset, activity: str) -> tuple:
    """Organization and adjacent channel of the transition labeled ``activity``."""
    hits = []
    for d in org_dirs([dataset]):
        on = load_net(d / "net.json")
        for t in sorted(on.net.transitions):
            if on.net.label(t) == activity:
                places = (on.net.preset(t) | on.net.postset(t)) & on.interface
                hits.append((d.name, sorted(places)))
    if len(hits) != 1:
        raise GeneratorError(f"activity {activity!r} labels {len(hits)} transitions across the dataset, expected 1")
    org, places = hits[0]
    if len(places) != 1:
        raise GeneratorError(f"activity {activity!r} touches {len(places)} channels, expected 1")
    return org, places[0]


def inject_dataset(dataset, spec: ScenarioSpec, org: str, disjoint: bool = True) -> list:
    """Rewrite ``<dataset>/<org>/log.csv`` and record the injection in the manifest."""
    manifest = load_manifest(dataset)
    used = {c for inj in manifest.get("injections", []) for c in inj["cases"]} if disjoint else set()
    path = Path(dataset) / org / "log.csv"
    log = parse_log(read_text(path), "private")
    new, cases = inject(log, spec, exclude=used)
    write_text(path, serialize_log(new))
    manifest.setdefault("injections", []).append({"org": org, **spec.to_dict(), "cases": cases})
    stats = manifest.setdefault("organizations", {}).setdefault(org, {})
    stats.update(cases=len(new.cases), events=len(new))
    save_manifest(dataset, manifest)
    return cases
