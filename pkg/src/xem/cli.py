"""Command-line pipeline driver: generate, match, link, train-proxy,
explain, report, eval, serve.

Each stage reads/writes files in an artifact directory (records.jsonl,
pairs.jsonl, partition.json, model.json, metrics.json). A manifest.json
records the config fingerprint of the run that produced the artifacts;
stages refuse to consume artifacts from a different config unless --force.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import evalharness, explainers, gnn, linker, matcher, proxygraph, synthgen
from .records import AnonymousValueList, parse_records, parse_schema, schema_to_json, serialize_records

_CONFIG_SECTIONS = {"generate", "matcher", "train", "explain"}


class CliError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


def load_config(path: str | None, seed_override: int | None = None) -> dict:
    cfg = {}
    if path:
        cfg = json.loads(Path(path).read_text())
        unknown = set(cfg) - _CONFIG_SECTIONS
        if unknown:
            raise CliError("bad_config", f"unknown config sections: {sorted(unknown)}")
    if seed_override is not None:
        cfg.setdefault("generate", {})["seed"] = seed_override
        cfg.setdefault("train", {})["seed"] = seed_override
        cfg.setdefault("explain", {})["seed"] = seed_override
    return cfg


def fingerprint(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def _check_fingerprint(out: Path, fp: str, force: bool) -> None:
    manifest = out / "manifest.json"
    if not manifest.exists():
        return
    recorded = json.loads(manifest.read_text()).get("config_fingerprint")
    if recorded != fp and not force:
        raise CliError("fingerprint_mismatch",
                       f"artifacts in {out} were produced with config {recorded}, "
                       f"current config is {fp}; pass --force to override")


def _write_manifest(out: Path, fp: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps({"config_fingerprint": fp}))


def _need(out: Path, name: str, stage: str) -> Path:
    p = out / name
    if not p.exists():
        raise CliError("missing_artifact", f"{name} not found in {out}; run {stage} first")
    return p


def _gen_config(cfg: dict) -> synthgen.GenConfig:
    return synthgen.GenConfig.from_json(cfg.get("generate", {}))


def _matcher_config(cfg: dict, schema):
    m = cfg.get("matcher", {})
    wt = (matcher.WeightTable.from_json(m["weights"]) if "weights" in m
          else matcher.default_weight_table(schema))
    th = (matcher.Thresholds(**m["thresholds"]) if "thresholds" in m
          else evalharness.DEFAULT_THRESHOLDS)
    blocking = (matcher.BlockingConfig.from_json(m["blocking"]) if "blocking" in m
                else evalharness.DEFAULT_BLOCKING)
    return wt, th, blocking


def _load_records(out: Path, stage: str = "generate"):
    schema = parse_schema(json.loads(_need(out, "schema.json", stage).read_text()))
    return parse_records(_need(out, "records.jsonl", stage).read_bytes(), "jsonl", schema)


def cmd_generate(args, cfg: dict, fp: str) -> dict:
    out = Path(args.out)
    _check_fingerprint(out, fp, args.force)
    rs, gold = synthgen.generate(_gen_config(cfg))
    _write_manifest(out, fp)
    (out / "schema.json").write_text(json.dumps(schema_to_json(rs.schema)))
    (out / "records.jsonl").write_bytes(serialize_records(rs, "jsonl"))
    (out / "gold.json").write_bytes(synthgen.write_gold(gold))
    return {"records": len(rs), "entities": len(set(gold.values()))}


def cmd_match(args, cfg: dict, fp: str) -> dict:
    out = Path(args.out)
    _check_fingerprint(out, fp, args.force)
    rs = _load_records(out)
    wt, th, blocking = _matcher_config(cfg, rs.schema)
    stats = matcher.BlockingStats()
    scores = matcher.run_matching(rs, blocking, wt, th, AnonymousValueList.default(), stats)
    (out / "pairs.jsonl").write_bytes(matcher.write_pair_scores(scores))
    n_match = sum(1 for s in scores if s.match_class is matcher.MatchClass.MATCH)
    return {"pairs": len(scores), "match": n_match,
            "oversized_blocks": stats.oversized_blocks}


def cmd_link(args, cfg: dict, fp: str) -> dict:
    out = Path(args.out)
    _check_fingerprint(out, fp, args.force)
    rs = _load_records(out)
    scores = matcher.read_pair_scores(_need(out, "pairs.jsonl", "match").read_bytes())
    rules = []
    if (out / "unlinks.jsonl").exists():
        rules = linker.read_unlink_log((out / "unlinks.jsonl").read_bytes())
    anon = AnonymousValueList.default()
    partition = linker.link(scores, rules, set(rs.index), rs, anon)
    (out / "partition.json").write_text(json.dumps(partition.to_json(), sort_keys=True))
    return {"entities": len(partition.entities),
            "size_histogram": {str(k): v for k, v in
                               sorted(linker.entity_size_histogram(partition).items())}}


def _load_graph(out: Path, rs):
    partition = linker.Partition.from_json(
        json.loads(_need(out, "partition.json", "link").read_text()))
    codec = proxygraph.FeatureCodec(rs.schema)
    return partition, codec, proxygraph.build_graph(partition, rs, codec)


def cmd_train_proxy(args, cfg: dict, fp: str) -> dict:
    out = Path(args.out)
    _check_fingerprint(out, fp, args.force)
    rs = _load_records(out)
    scores = matcher.read_pair_scores(_need(out, "pairs.jsonl", "match").read_bytes())
    _, codec, graph = _load_graph(out, rs)
    tc = gnn.TrainConfig(**cfg.get("train", {}))
    pairs = proxygraph.make_training_set(scores, list(rs.index), seed=tc.seed)
    params = gnn.train(graph, pairs, tc)
    (out / "model.json").write_bytes(gnn.save_model(params, codec.fingerprint()))
    return {"trained": True, "nodes": graph.n_nodes, "training_pairs": len(pairs)}


def _load_model(out: Path, codec):
    return gnn.load_model(_need(out, "model.json", "train-proxy").read_bytes(),
                          codec.fingerprint())


def cmd_explain(args, cfg: dict, fp: str) -> dict:
    out = Path(args.out)
    _check_fingerprint(out, fp, args.force)
    rs = _load_records(out)
    scores = matcher.read_pair_scores(_need(out, "pairs.jsonl", "match").read_bytes())
    partition, codec, graph = _load_graph(out, rs)
    params = _load_model(out, codec)
    mask_cfg = explainers.MaskConfig(**cfg.get("explain", {}))
    anon = AnonymousValueList.default()
    wt, th, _ = _matcher_config(cfg, rs.schema)
    scorer_obj = matcher.PairScorer(rs, wt, th, anon)
    scorer = lambda a, b: scorer_obj.score(a, b).total

    if args.pair:
        a, b = args.pair
        mask = explainers.explain_pair_mask(params, graph, a, b, mask_cfg)
        att = explainers.attribute_contributions(scorer, rs[a], rs[b],
                                                 rs.attribute_names, seed=mask_cfg.seed)
        return {"mask": mask.to_json(), "attribution": att.to_json()}
    entity = partition.by_id(args.entity)
    if entity is None:
        raise CliError("not_found", f"unknown entity: {args.entity}")
    results = []
    for member, rep in entity.edges:
        mask = explainers.explain_pair_mask(params, graph, member, rep, mask_cfg)
        results.append(mask.to_json())
    return {"entity_id": entity.entity_id, "masks": results}


def cmd_report(args, cfg: dict, fp: str) -> dict:
    out = Path(args.out)
    _check_fingerprint(out, fp, args.force)
    rs = _load_records(out)
    scores = matcher.read_pair_scores(_need(out, "pairs.jsonl", "match").read_bytes())
    partition, codec, graph = _load_graph(out, rs)
    params = _load_model(out, codec)
    entity = partition.by_id(args.entity)
    if entity is None:
        raise CliError("not_found", f"unknown entity: {args.entity}")
    anon = AnonymousValueList.default()
    wt, th, _ = _matcher_config(cfg, rs.schema)
    scorer_obj = matcher.PairScorer(rs, wt, th, anon)
    report = explainers.build_explanation_report(
        entity, partition, rs, scores, params, graph,
        lambda a, b: scorer_obj.score(a, b).total, anon,
        explainers.MaskConfig(**cfg.get("explain", {})))
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
    return report.to_json()


def cmd_eval(args, cfg: dict, fp: str) -> dict:
    out = Path(args.out)
    _check_fingerprint(out, fp, args.force)
    gold = synthgen.read_gold(_need(out, "gold.json", "generate").read_bytes())
    partition = linker.Partition.from_json(
        json.loads(_need(out, "partition.json", "link").read_text()))
    counts, metrics = evalharness.pairwise_metrics(partition, gold)
    report = {
        "precision": metrics.precision, "recall": metrics.recall, "f1": metrics.f1,
        "counts": {"tp": counts.tp, "fp": counts.fp, "fn": counts.fn},
        "config_fingerprint": fp,
    }
    (out / "metrics.json").write_text(json.dumps(report, sort_keys=True, indent=2))
    return report


def cmd_serve(args, cfg: dict, fp: str) -> dict:
    import os

    import uvicorn

    from .service import create_app
    addr = args.addr or os.environ.get("XEM_ADDR", "127.0.0.1:8000")
    data_dir = Path(args.out or os.environ.get("XEM_DATA_DIR", "data"))
    host, _, port = addr.rpartition(":")
    ui_dir = Path(args.ui) if args.ui else None
    app = create_app(data_dir, serve_ui_from=ui_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return {}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xem", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default="data", help="artifact directory")
        p.add_argument("--seed", type=int, help="override every seed in the config")
        p.add_argument("--force", action="store_true",
                       help="ignore config fingerprint mismatches")

    for name in ("generate", "match", "link", "train-proxy", "eval"):
        common(sub.add_parser(name))
    p_explain = sub.add_parser("explain")
    common(p_explain)
    group = p_explain.add_mutually_exclusive_group(required=True)
    group.add_argument("--pair", nargs=2, metavar=("A", "B"))
    group.add_argument("--entity")
    p_report = sub.add_parser("report")
    common(p_report)
    p_report.add_argument("--entity", required=True)
    p_report.add_argument("--csv", help="also write the report as CSV here")
    p_serve = sub.add_parser("serve")
    common(p_serve)
    p_serve.add_argument("--addr", help="host:port (default env XEM_ADDR or 127.0.0.1:8000)")
    p_serve.add_argument("--ui", help="directory of built UI assets to serve at /")
    return parser


_COMMANDS = {
    "generate": cmd_generate,
    "match": cmd_match,
    "link": cmd_link,
    "train-proxy": cmd_train_proxy,
    "explain": cmd_explain,
    "report": cmd_report,
    "eval": cmd_eval,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
        result = _COMMANDS[args.command](args, cfg, fingerprint(cfg))
        json.dump(result, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return 0
    except CliError as exc:
        print(json.dumps({"error": {"code": exc.code, "message": str(exc)}}),
              file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(json.dumps({"error": {"code": type(exc).__name__, "message": str(exc)}}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
