"""Command line entry points for the preventive audit toolkit.

Subcommands cover the pipeline end to end: ``ingest`` tallies records into
a joint table, ``report`` prints entropy and mutual information figures,
``audit`` runs the bound-constrained adjustment, ``sweep`` traces a
bound-value grid, ``check`` evaluates the optimality certificates, and
``stepwise`` runs the three-step exchange protocol.

Every run can also write a manifest recording input digests, the effective
configuration digest, the seed, and output digests; reruns with the same
inputs produce byte-identical outputs and manifests.

Exit codes: 0 on success, 1 on input or usage errors, 2 when the audit
reports infeasible bounds.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import replace

from . import __version__
from .distribution import (
    CharacteristicSpec,
    JointDistribution,
    from_json_dict,
    to_json_dict,
    validate,
)
from .exchange import CONSTANT, VARIABLE, write_move_log
from .infotheory import full_report
from .ingest import (
    EQUAL_FREQUENCY,
    EQUAL_WIDTH,
    binarize_characteristic,
    build_empirical_joint,
    build_release_plan,
    fit_quantizer,
    read_records_csv,
)
from .optimizer import (
    STATUS_INFEASIBLE,
    AuditConfig,
    SweepAxis,
    config_from_json_dict,
    frontier_csv,
    run_stepwise,
    solve_audit,
    sweep_frontier,
)
from .propositions import checker_report

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2

_SCHEMA_KEYS = {
    "schema_version", "id_column", "value_column", "characteristics",
    "quantizer", "binarize",
}
_CHAR_KEYS = {"name", "values", "role"}
_QUANT_KEYS = {"strategy", "intervals"}


def _read_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from None


def _dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _write_output(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _digest(doc) -> str:
    return hashlib.sha256(
        json.dumps(doc, sort_keys=True).encode("utf-8")
    ).hexdigest()


def _write_manifest(args, command: str, inputs: list[str], config_doc,
                    outputs: list[str]) -> None:
    path = args.manifest
    if path is None:
        if args.out and args.out != "-":
            path = args.out + ".manifest.json"
        else:
            return
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "tool_version": __version__,
        "seed": args.seed,
        "inputs": {p: _sha256_file(p) for p in sorted(set(inputs))},
        "config_digest": _digest(config_doc),
        "outputs": {p: _sha256_file(p) for p in sorted(set(outputs))
                    if p and p != "-"},
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dump(doc))


def _load_schema(path: str):
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: schema must be a JSON object")
    unknown = set(doc) - _SCHEMA_KEYS
    if unknown:
        raise ValueError(f"{path}: unknown schema keys: {sorted(unknown)}")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(
            f"{path}: unsupported schema_version "
            f"{doc.get('schema_version')!r}, expected {SCHEMA_VERSION}"
        )
    chars = []
    for item in doc.get("characteristics", []):
        bad = set(item) - _CHAR_KEYS
        if bad:
            raise ValueError(
                f"{path}: unknown characteristic keys: {sorted(bad)}"
            )
        chars.append(CharacteristicSpec(item["name"], tuple(item["values"]),
                                        item["role"]))
    if not chars:
        raise ValueError(f"{path}: schema declares no characteristics")
    quant = doc.get("quantizer", {})
    bad = set(quant) - _QUANT_KEYS
    if bad:
        raise ValueError(f"{path}: unknown quantizer keys: {sorted(bad)}")
    strategy = quant.get("strategy", EQUAL_FREQUENCY)
    if strategy not in (EQUAL_FREQUENCY, EQUAL_WIDTH):
        raise ValueError(f"{path}: unknown quantizer strategy {strategy!r}")
    intervals = int(quant.get("intervals", 8))
    binarize = doc.get("binarize", True)
    if not isinstance(binarize, (bool, list)):
        raise ValueError(f"{path}: binarize must be a bool or a name list")
    return (doc, doc.get("id_column", "id"), doc.get("value_column", "value"),
            tuple(chars), strategy, intervals, binarize)


def _load_distribution(path: str) -> JointDistribution:
    doc = _read_json(path)
    if isinstance(doc, dict) and "distribution" in doc:
        doc = doc["distribution"]
    dist = from_json_dict(doc)
    res = validate(dist)
    if not res.ok:
        raise ValueError(f"{path}: " + "; ".join(res.failures))
    return dist


def _parse_weights(text: str) -> dict[str, float]:
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        name, sep, value = part.partition("=")
        if not sep:
            raise ValueError(f"weight {part!r} is not of the form name=value")
        out[name.strip()] = float(value)
    return out


def _parse_bounds(text: str) -> tuple[dict[str, float], dict[str, float]]:
    upper: dict[str, float] = {}
    lower: dict[str, float] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "<=" in part:
            name, _, value = part.partition("<=")
            upper[name.strip()] = float(value)
        elif ">=" in part:
            name, _, value = part.partition(">=")
            lower[name.strip()] = float(value)
        else:
            raise ValueError(
                f"bound {part!r} must use name<=value or name>=value"
            )
    return upper, lower


def _parse_axis(text: str) -> SweepAxis:
    parts = text.split(":")
    if len(parts) == 3 and "," in parts[2]:
        name, direction, raw = parts
        values = [float(x) for x in raw.split(",") if x.strip()]
    elif len(parts) == 5:
        name, direction, start, step, count = parts
        start, step, count = float(start), float(step), int(count)
        if count < 1:
            raise ValueError(f"axis {text!r} has an empty grid")
        values = [start + step * i for i in range(count)]
    else:
        raise ValueError(
            f"axis {text!r} must be name:direction:v1,v2,... or "
            "name:direction:start:step:count"
        )
    if not values:
        raise ValueError(f"axis {text!r} has an empty grid")
    return SweepAxis(name, direction, tuple(values))


def _effective_config(args) -> AuditConfig:
    if getattr(args, "config", None):
        cfg = config_from_json_dict(_read_json(args.config))
    else:
        cfg = AuditConfig()
    changes = {}
    if getattr(args, "mode", None):
        changes["mode"] = args.mode
    if getattr(args, "weights", None):
        changes["weights"] = _parse_weights(args.weights)
    if getattr(args, "bounds", None):
        upper, lower = _parse_bounds(args.bounds)
        merged_u = dict(cfg.upper_bounds)
        merged_u.update(upper)
        merged_l = dict(cfg.lower_bounds)
        merged_l.update(lower)
        changes["upper_bounds"] = merged_u
        changes["lower_bounds"] = merged_l
    if getattr(args, "stop_tol", None) is not None:
        changes["stop_tol"] = args.stop_tol
    if getattr(args, "max_iters", None) is not None:
        changes["max_iters"] = args.max_iters
    return replace(cfg, **changes) if changes else cfg


def cmd_ingest(args) -> int:
    schema_doc, id_col, val_col, chars, strategy, intervals, binarize = (
        _load_schema(args.schema)
    )
    rs = read_records_csv(args.records, chars, id_col, val_col)
    quant = fit_quantizer(rs.values, strategy, intervals)
    assigned = quant.assign(rs.values)
    names = [c.name for c in chars]
    if binarize is True:
        targets = [c.name for c in chars if len(c.values) > 2]
    elif binarize is False:
        targets = []
    else:
        missing = [n for n in binarize if n not in names]
        if missing:
            raise ValueError(f"binarize names unknown: {missing}")
        targets = list(binarize)
    groupings = {}
    for name in targets:
        m = names.index(name)
        part = binarize_characteristic(assigned, rs.labels[m], chars[m].values)
        groupings[name] = (part.first, part.second)
    dist = build_empirical_joint(rs, quant, groupings)
    res = validate(dist)
    if not res.ok:
        raise ValueError(
            "ingested table breaks invariants: " + "; ".join(res.failures)
        )
    doc = {
        "schema_version": SCHEMA_VERSION,
        "records": len(rs),
        "quantizer": quant.to_json_dict(),
        "groupings": {
            name: [list(g) for g in groups]
            for name, groups in sorted(groupings.items())
        },
        "distribution": to_json_dict(dist),
    }
    _write_output(_dump(doc), args.out)
    _write_manifest(args, "ingest", [args.records, args.schema], schema_doc,
                    [args.out] if args.out else [])
    return EXIT_OK


def cmd_report(args) -> int:
    dist = _load_distribution(args.dist)
    base = 2.0 if args.log_base == "2" else math.e
    rep = full_report(dist, base=base)
    _write_output(_dump(rep.to_json_dict()), args.out)
    _write_manifest(args, "report", [args.dist], {"log_base": args.log_base},
                    [args.out] if args.out else [])
    return EXIT_OK


def cmd_audit(args) -> int:
    dist = _load_distribution(args.dist)
    cfg = _effective_config(args)
    cfg.check_names(dist)
    res = solve_audit(dist, cfg)
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(res.to_json_dict())
    _write_output(_dump(doc), args.out)
    outputs = [args.out] if args.out else []
    if args.release_plan:
        plan = build_release_plan(dist, res.audited)
        plan_doc = {"schema_version": SCHEMA_VERSION}
        plan_doc.update(plan.to_json_dict())
        _write_output(_dump(plan_doc), args.release_plan)
        outputs.append(args.release_plan)
    if args.move_log:
        write_move_log(args.move_log, res.moves)
        outputs.append(args.move_log)
    _write_manifest(args, "audit", [args.dist], cfg.to_json_dict(), outputs)
    return EXIT_INFEASIBLE if res.status == STATUS_INFEASIBLE else EXIT_OK


def cmd_sweep(args) -> int:
    dist = _load_distribution(args.dist)
    cfg = _effective_config(args)
    cfg.check_names(dist)
    axes = [_parse_axis(text) for text in args.axis]
    for axis in axes:
        if axis.characteristic not in {c.name for c in dist.characteristics}:
            raise ValueError(f"unknown characteristic {axis.characteristic!r}")
    points = sweep_frontier(dist, cfg, axes, jobs=args.jobs)
    outputs = [args.out] if args.out else []
    if args.csv:
        _write_output(frontier_csv(points, dist), args.csv)
        outputs.append(args.csv)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "axes": [
            {"characteristic": a.characteristic, "direction": a.direction,
             "values": list(a.values)}
            for a in axes
        ],
        "points": [
            {
                "bounds": [[n, d, v] for n, d, v in pt.bounds],
                "status": pt.result.status,
                "objective": pt.result.objective,
                "final_mi": list(pt.result.final_mi),
            }
            for pt in points
        ],
    }
    _write_output(_dump(doc), args.out)
    config_doc = {"config": cfg.to_json_dict(),
                  "axes": [[a.characteristic, a.direction, list(a.values)]
                           for a in axes]}
    _write_manifest(args, "sweep", [args.dist], config_doc, outputs)
    return EXIT_OK


def cmd_check(args) -> int:
    dist = _load_distribution(args.dist)
    doc = {"schema_version": SCHEMA_VERSION, "checks": checker_report(dist)}
    _write_output(_dump(doc), args.out)
    _write_manifest(args, "check", [args.dist], {}, [args.out] if args.out else [])
    return EXIT_OK


def cmd_stepwise(args) -> int:
    dist = _load_distribution(args.dist)
    res = run_stepwise(dist, stop_tol=args.stop_tol)
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(res.to_json_dict())
    _write_output(_dump(doc), args.out)
    outputs = [args.out] if args.out else []
    if args.move_log:
        write_move_log(args.move_log,
                       [m for step in res.step_moves for m in step])
        outputs.append(args.move_log)
    _write_manifest(args, "stepwise", [args.dist],
                    {"stop_tol": args.stop_tol}, outputs)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; keep 2 for infeasible
    # bounds and report usage problems as exit 1 instead.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None,
                   help="output path ('-' or omitted for stdout)")
    p.add_argument("--manifest", default=None,
                   help="manifest path (default <out>.manifest.json)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed recorded in the manifest and used for sampling")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="preaudit",
                     description="preventive audit of a shareable data column")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="tally records into a joint table")
    p.add_argument("--records", required=True, help="records CSV path")
    p.add_argument("--schema", required=True, help="schema JSON path")
    _common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("report", help="entropy and mutual information report")
    p.add_argument("--dist", required=True, help="distribution JSON path")
    p.add_argument("--log-base", choices=["2", "e"], default="2")
    _common(p)
    p.set_defaults(func=cmd_report)

    for name, helptext in (("audit", "run the bound-constrained adjustment"),
                           ("sweep", "audit across a grid of bound values")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--dist", required=True, help="distribution JSON path")
        p.add_argument("--config", help="audit config JSON path")
        p.add_argument("--mode", choices=[CONSTANT, VARIABLE])
        p.add_argument("--weights",
                       help="objective weights, e.g. 'income=1,region=-1'")
        p.add_argument("--bounds",
                       help="MI bounds, e.g. 'income<=0.01,region>=0.2'")
        p.add_argument("--stop-tol", type=float, default=None)
        p.add_argument("--max-iters", type=int, default=None)
        if name == "audit":
            p.add_argument("--release-plan",
                           help="also write a release plan JSON here")
            p.add_argument("--move-log",
                           help="also write the applied moves as JSONL here")
            p.set_defaults(func=cmd_audit)
        else:
            p.add_argument("--axis", action="append", required=True,
                           help="swept bound: name:direction:v1,v2,... or "
                                "name:direction:start:step:count")
            p.add_argument("--jobs", type=int, default=1,
                           help="parallel worker processes")
            p.add_argument("--csv", help="also write the frontier as CSV here")
            p.set_defaults(func=cmd_sweep)
        _common(p)

    p = sub.add_parser("check", help="evaluate the optimality certificates")
    p.add_argument("--dist", required=True, help="distribution JSON path")
    _common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("stepwise", help="run the three-step exchange protocol")
    p.add_argument("--dist", required=True, help="distribution JSON path")
    p.add_argument("--stop-tol", type=float, default=1e-9)
    p.add_argument("--move-log", help="also write the applied moves here")
    _common(p)
    p.set_defaults(func=cmd_stepwise)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
