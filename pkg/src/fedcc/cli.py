"""Command-line entry point.

Exit codes: 0 success, 2 invalid input or collaboration, 3 search budget
exhausted. Diagnostics go to stderr as JSON lines.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from datetime import timedelta

from fedcc import __version__
from fedcc.alignment import DEFAULT_BUDGET, Aligner, CostFunction, SearchExhausted, fitness
from fedcc.communication import STRATEGIES, local_comm_matrix
from fedcc.eventlog import LogError, merge_collaborative, parse_log, project_public, serialize_log, variants_by_case
from fedcc.federation import (
    InvalidCollaboration, PrivacyError, compose_all, federate, render_cases_csv, render_summary_csv,
    render_text, validate_collaborative,
)
from fedcc.generator import DEFAULT_SHIFT, SCENARIOS, GeneratorError, ScenarioSpec, evaluation_scenarios, generate
from fedcc.netio import load_net, serialize_net
from fedcc.petri import NetError, inner, to_public, validate_open_net
from fedcc import workspace as ws

EXIT_OK, EXIT_INVALID, EXIT_BUDGET = 0, 2, 3
# a chosen normalization, stated in every alignment report
FITNESS_DEFINITION = "1 - cost / (cost of log moves for the whole trace + cheapest complete model run)"
log = logging.getLogger(__name__)


class JsonLineFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps({"level": record.levelname.lower(), "logger": record.name, "message": record.getMessage()})


def diag(level: str, message: str, **extra) -> None:
    print(json.dumps({"level": level, "message": message, **extra}, sort_keys=True), file=sys.stderr)


def _kv_costs(values) -> tuple:
    """Split ``--cost-log`` style values into (default, per-activity)."""
    default, per = None, {}
    for v in values or ():
        name, sep, num = v.rpartition("=")
        try:
            n = int(num)
        except ValueError:
            raise ValueError(f"bad cost {v!r}; expected N or ACTIVITY=N") from None
        if sep:
            per[name] = n
        else:
            default = n
    return default, per


def cost_from_args(args) -> CostFunction:
    log_default, log_costs = _kv_costs(args.cost_log)
    model_default, model_costs = _kv_costs(args.cost_model)
    return CostFunction(
        log_costs, model_costs,
        1 if log_default is None else log_default,
        1 if model_default is None else model_default,
        args.cost_in_label, args.cost_out_label,
    )


def emit(args, text: str) -> None:
    if args.out:
        ws.write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _load_log(path, kind="private"):
    return parse_log(ws.read_text(path), kind)


def cmd_project(args) -> int:
    emit(args, serialize_log(project_public(_load_log(args.log))))
    return EXIT_OK


def cmd_align(args) -> int:
    elog = _load_log(args.log, args.kind)
    on = load_net(args.net)
    aligner = Aligner(inner(on), cost_from_args(args), args.budget)
    rows, failed = {}, []
    for cid, var in variants_by_case(elog).items():
        try:
            al = aligner.align(var)
            rows[cid] = al.to_dict(fitness(var, aligner.sn, aligner=aligner))
        except SearchExhausted as exc:
            failed.append(cid)
            rows[cid] = {"error": str(exc)}
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cid", "cost", "fitness"])
        for cid, doc in rows.items():
            w.writerow([cid, doc.get("total_cost", ""), doc.get("fitness", "")])
        emit(args, buf.getvalue())
    else:
        doc = {"org": on.org_id, "cases": rows, "fitness_definition": FITNESS_DEFINITION}
        emit(args, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if failed:
        diag("error", "search budget exhausted", cases=failed)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_commcost(args) -> int:
    mat = local_comm_matrix(_load_log(args.log), load_net(args.net), cost_from_args(args), args.strategy, args.budget)
    emit(args, mat.to_csv())
    return EXIT_OK


def cmd_share(args) -> int:
    for d in ws.org_dirs(args.org_dirs):
        out = ws.share_org(d, cost_from_args(args), args.strategy, args.budget)
        log.info("shared %s", out)
    return EXIT_OK


def _verdict_doc(nets, public: bool = False) -> tuple:
    model = compose_all(nets)
    verdict = validate_collaborative(model)
    reports = {}
    for on in nets:
        found = validate_open_net(on).violations
        # public models hide every internal label by construction
        reports[on.org_id] = [v for v in found if not (public and v.startswith("visible-internal"))]
    ok = verdict.valid and not any(reports.values())
    doc = {
        "valid": ok,
        "closed": verdict.valid,
        "unmatched_inputs": list(verdict.unmatched_inputs),
        "unmatched_outputs": list(verdict.unmatched_outputs),
        "open_net_violations": reports,
    }
    return model, doc


def cmd_compose(args) -> int:
    nets = [load_net(p) for p in args.nets]
    if args.public:
        nets = [to_public(on) for on in nets]
    model, doc = _verdict_doc(nets, args.public)
    emit(args, serialize_net(model))
    if not doc["closed"]:
        diag("error", "collaborative model is not closed", unmatched=sorted(doc["unmatched_inputs"] + doc["unmatched_outputs"]))
        return EXIT_INVALID
    return EXIT_OK


def cmd_validate(args) -> int:
    _, doc = _verdict_doc([load_net(p) for p in args.nets], args.public)
    emit(args, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if not doc["valid"]:
        diag("error", "invalid collaboration", unmatched=sorted(doc["unmatched_inputs"] + doc["unmatched_outputs"]))
        return EXIT_INVALID
    return EXIT_OK


def cmd_collab_log(args) -> int:
    emit(args, serialize_log(merge_collaborative(_load_log(p, "public") for p in args.logs)))
    return EXIT_OK


def _render(doc: dict, fmt: str, cases: bool = False) -> str:
    if fmt == "json":
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        return render_cases_csv(doc) if cases else render_summary_csv(doc)
    return render_text(doc)


def cmd_federate(args) -> int:
    shares = [ws.load_share(d) for d in ws.org_dirs(args.org_dirs)]
    cost = cost_from_args(args)
    report = federate(shares, cost, args.budget, uniform_costs=not args.custom_costs)
    emit(args, _render(report.to_dict(), args.format, args.cases))
    failed = [cr.case_id for cr in report.cases if cr.error]
    for n in report.notices:
        diag("warning", n)
    if report.crosscheck_mismatches:
        diag("warning", "cross-check mismatches", cases=[m["cid"] for m in report.crosscheck_mismatches])
    if failed:
        diag("error", "search budget exhausted", cases=failed)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_report(args) -> int:
    doc = json.loads(ws.read_text(args.report))
    emit(args, _render(doc, args.format, args.cases))
    return EXIT_OK


def cmd_generate(args) -> int:
    if not args.out:
        raise ValueError("generate needs --out DIR")
    ds = generate(args.cases, args.seed)
    if args.evaluation:
        ds = ds.apply(evaluation_scenarios(args.seed))
    ds.write(args.out)
    if args.share:
        for d in ws.org_dirs([args.out]):
            ws.share_org(d, cost_from_args(args), budget=args.budget)
    log.info("dataset of %d cases written to %s", args.cases, args.out)
    return EXIT_OK


def cmd_inject(args) -> int:
    org, channel = ws.find_target(args.dataset, args.activity)
    shift = timedelta(minutes=args.shift_minutes) if args.shift_minutes is not None else DEFAULT_SHIFT
    spec = ScenarioSpec(
        args.scenario, args.activity, args.channel or channel, args.count,
        shift if args.scenario == "asynchronous" else timedelta(0), args.seed,
    )
    cases = ws.inject_dataset(args.dataset, spec, args.org or org, disjoint=not args.allow_overlap)
    sys.stdout.write(json.dumps({"org": args.org or org, "channel": spec.channel, "cases": cases}, sort_keys=True) + "\n")
    return EXIT_OK


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--budget", type=int, default=d(DEFAULT_BUDGET), help="max expanded search states per trace")
    p.add_argument("--cost-log", action="append", default=d(None), metavar="[ACT=]N",
                   help="log-move cost, default or per activity (repeatable)")
    p.add_argument("--cost-model", action="append", default=d(None), metavar="[LABEL=]N",
                   help="model-move cost, default or per label (repeatable)")
    p.add_argument("--cost-in-label", type=int, default=d(0), help="cost of a masked input transition")
    p.add_argument("--cost-out-label", type=int, default=d(0), help="cost of a masked output transition")
    p.add_argument("--format", choices=("json", "csv", "text"), default=d("json"))
    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--out", default=d(None), help="output file (stdout if omitted) or directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedcc", description="Federated conformance checking over open nets.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    p = add("project", cmd_project, "public log of a private log")
    p.add_argument("log")

    p = add("align", cmd_align, "optimal alignments of a log against an open net's inner net")
    p.add_argument("log")
    p.add_argument("net")
    p.add_argument("--kind", choices=("private", "public"), default="private")

    p = add("commcost", cmd_commcost, "local alignment and potential communication costs")
    p.add_argument("log")
    p.add_argument("net")
    p.add_argument("--strategy", choices=STRATEGIES, default="transport")

    p = add("share", cmd_share, "write an organization's shared/ directory")
    p.add_argument("org_dirs", nargs="+")
    p.add_argument("--strategy", choices=STRATEGIES, default="transport")

    p = add("compose", cmd_compose, "compose open nets")
    p.add_argument("nets", nargs="+")
    p.add_argument("--public", action="store_true", help="hide internal labels before composing")

    p = add("validate", cmd_validate, "check open nets and whether they form a closed collaboration")
    p.add_argument("nets", nargs="+")
    p.add_argument("--public", action="store_true", help="nets are public models")

    p = add("collab-log", cmd_collab_log, "merge public logs")
    p.add_argument("logs", nargs="+")

    p = add("federate", cmd_federate, "federated conformance report from shared/ directories")
    p.add_argument("org_dirs", nargs="+", help="organization or dataset directories")
    p.add_argument("--cases", action="store_true", help="per-case rows for csv output")
    p.add_argument("--custom-costs", action="store_true", help="organizations used non-uniform local costs")

    p = add("report", cmd_report, "render a saved JSON report")
    p.add_argument("report")
    p.add_argument("--cases", action="store_true", help="per-case rows for csv output")

    p = add("generate", cmd_generate, "generate the supply-chain dataset")
    p.add_argument("--cases", type=int, default=297)
    p.add_argument("--evaluation", action="store_true", help="also inject the three evaluation scenarios")
    p.add_argument("--share", action="store_true", help="also write every shared/ directory")

    p = add("inject", cmd_inject, "inject a miscommunication into a dataset")
    p.add_argument("dataset", nargs="?", default=".")
    p.add_argument("--scenario", choices=SCENARIOS, required=True)
    p.add_argument("--activity", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--org", help="owning organization (inferred from the activity)")
    p.add_argument("--channel", help="affected channel (inferred from the activity)")
    p.add_argument("--shift-minutes", type=int, help="time shift for asynchronous injection")
    p.add_argument("--allow-overlap", action="store_true", help="allow cases already altered by earlier injections")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonLineFormatter())
    root = logging.getLogger("fedcc")
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO if args.verbose else logging.WARNING)
    root.propagate = False
    if args.budget <= 0:
        diag("error", "budget must be positive")
        return EXIT_INVALID
    try:
        return args.func(args)
    except SearchExhausted as exc:
        diag("error", str(exc), kind="SearchExhausted")
        return EXIT_BUDGET
    except InvalidCollaboration as exc:
        diag("error", "invalid collaboration", kind="InvalidCollaboration", unmatched=exc.unmatched)
        return EXIT_INVALID
    except (LogError, NetError, PrivacyError, GeneratorError, ValueError, KeyError, OSError) as exc:
        diag("error", str(exc), kind=type(exc).__name__)
        return EXIT_INVALID
