"""Command-line entry points.

Subcommands mirror the workflows: ``eval-story`` (per-story and corpus
metrics plus an edit-transaction dump), ``eval-scene`` (operation census over
detection thresholds), ``explain`` (association rules and insert/delete
frequency tables), ``gen-synthetic`` (seeded corpora with known expected
losses), and ``selftest`` (embedded oracle, golden, and recovery suites).

All outputs are deterministic for fixed inputs and seed: ids are sorted,
floats use fixed formats, and no timestamps or timings are emitted.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import random
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Sequence

from .edits import EditScript, brute_force_csed, csed, format_cost
from .errors import CeeError, EmptyCorpus
from .explain import (
    Transaction,
    id_frequency_table,
    mine_rules,
    read_transactions,
    write_transactions,
)
from .harness import (
    corrupt,
    generate_story,
    golden_story_pair,
    random_multiset,
    random_spec,
    random_taxonomy,
)
from .scene import (
    build_samples,
    census_csv,
    corpus_report,
    read_detections,
    read_targets,
    scene_csed,
)
from .story import (
    consistency_flags,
    consistency_loss,
    evaluate_story,
    global_aggregate,
    read_stories,
    semantic_loss_table,
    story_loss,
    write_stories,
)
from .taxonomy import (
    COST_PROFILES,
    FLATTENED_CONFIG,
    CostConfig,
    Taxonomy,
    clevr_taxonomy,
    resolve_taxonomy,
)

FORMATS = ("csv", "markdown", "json")
_EXT = {"csv": "csv", "markdown": "md", "json": "json"}


@dataclass(frozen=True)
class RunConfig:
    """Resolved run options: config-file values overridden by flags."""

    taxonomy: str = "clevr"
    cost_profile: str = "flattened"
    replace_mode: str | None = None
    unit_edge_cost: float | None = None
    delete_weight: float | None = None
    insert_weight: float | None = None
    thresholds: tuple[float, ...] = (0.5, 0.6, 0.7)
    min_support: float = 0.01
    format: str = "csv"
    seed: int = 0
    out_dir: str = "."
    attach_unknown: bool = False
    top_k: int = 10

    def cost_config(self) -> CostConfig:
        if self.cost_profile not in COST_PROFILES:
            raise ValueError(
                f"unknown cost profile {self.cost_profile!r}; "
                f"choose from {sorted(COST_PROFILES)}"
            )
        cfg = COST_PROFILES[self.cost_profile]
        overrides = {}
        if self.replace_mode is not None:
            overrides["replace_mode"] = self.replace_mode
        if self.unit_edge_cost is not None:
            overrides["unit_edge_cost"] = self.unit_edge_cost
        if self.delete_weight is not None:
            overrides["delete_weight"] = self.delete_weight
        if self.insert_weight is not None:
            overrides["insert_weight"] = self.insert_weight
        return replace(cfg, **overrides) if overrides else cfg

    def load_taxonomy(self) -> Taxonomy:
        return resolve_taxonomy(self.taxonomy, attach_unknown=self.attach_unknown)


def _merge_config(args: argparse.Namespace, scene_defaults: bool = False) -> RunConfig:
    file_values: dict = {}
    if getattr(args, "config", None):
        file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        unknown = set(file_values) - {f.name for f in fields(RunConfig)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    values: dict = {}
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
        elif f.name in file_values:
            values[f.name] = file_values[f.name]
    if "thresholds" in values:
        values["thresholds"] = tuple(float(t) for t in values["thresholds"])
    if scene_defaults and "cost_profile" not in values:
        values["cost_profile"] = "path"
    cfg = RunConfig(**values)
    if cfg.format not in FORMATS:
        raise ValueError(f"unknown format {cfg.format!r}; choose from {FORMATS}")
    return cfg


# -- table rendering ---------------------------------------------------------


def render_table(headers: Sequence[str], rows: Sequence[Sequence[str]], fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(headers)
        writer.writerows(rows)
        return buf.getvalue()
    if fmt == "markdown":
        lines = [
            "| " + " | ".join(headers) + " |",
            "| " + " | ".join("---" for _ in headers) + " |",
        ]
        lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
        return "\n".join(lines) + "\n"
    if fmt == "json":
        records = [dict(zip(headers, row)) for row in rows]
        return json.dumps(records, indent=2, ensure_ascii=False) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def _write(out_dir: str | Path, name: str, text: str) -> Path:
    path = Path(out_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _fmt_avg(x: float) -> str:
    return f"{x:.4f}"


# -- eval-story ---------------------------------------------------------------


def _join_on_id(left: dict, right: dict, left_name: str, right_name: str):
    common = sorted(set(left) & set(right))
    misses = []
    for only_id in sorted(set(left) - set(right)):
        misses.append(f"join-miss: id {only_id!r} only in {left_name}")
    for only_id in sorted(set(right) - set(left)):
        misses.append(f"join-miss: id {only_id!r} only in {right_name}")
    for line in misses:
        print(line, file=sys.stderr)
    return common, len(misses)


def cmd_eval_story(args: argparse.Namespace) -> int:
    cfg = _merge_config(args)
    tax = cfg.load_taxonomy()
    cost = cfg.cost_config()
    gen_by_id = {s.id: s for s in read_stories(args.generated)}
    gt_by_id = {s.id: s for s in read_stories(args.ground_truth)}
    common, n_miss = _join_on_id(gen_by_id, gt_by_id, "generated corpus", "ground-truth corpus")
    if not common:
        raise EmptyCorpus("no story ids shared between generated and ground-truth corpora")

    per_story = []
    transactions = []
    indexed_scripts = []
    gt_objects_per_frame: dict[int, int] = {}
    for story_id in common:
        metrics = evaluate_story(gen_by_id[story_id], gt_by_id[story_id], tax, cost)
        per_story.append(metrics)
        transactions.append(Transaction.from_scripts(story_id, metrics.frame_scripts))
        for k, script in enumerate(metrics.frame_scripts, start=1):
            indexed_scripts.append((k, script))
        for k, frame in enumerate(gt_by_id[story_id].frames, start=1):
            gt_objects_per_frame[k] = gt_objects_per_frame.get(k, 0) + len(frame)
    summary = global_aggregate(per_story)
    loss_table = semantic_loss_table(indexed_scripts, tax, gt_objects_per_frame)

    ext = _EXT[cfg.format]
    story_rows = [
        [
            m.story_id,
            str(len(m.per_frame_csed)),
            ";".join(format_cost(c) for c in m.per_frame_csed),
            format_cost(m.sl),
            _fmt_avg(m.avg_sl),
            format_cost(m.cl),
            _fmt_avg(m.avg_cl),
            ";".join(str(k) for k in sorted(m.cl_flags)),
        ]
        for m in per_story
    ]
    _write(
        cfg.out_dir,
        f"story_metrics.{ext}",
        render_table(
            ["story_id", "length", "per_frame_csed", "sl", "avg_sl", "cl", "avg_cl", "cl_flags"],
            story_rows,
            cfg.format,
        ),
    )
    summary_row = [
        str(summary.n_stories),
        str(n_miss),
        format_cost(summary.gsl),
        _fmt_avg(summary.avg_gsl),
        format_cost(summary.gcl),
        _fmt_avg(summary.avg_gcl),
    ]
    _write(
        cfg.out_dir,
        f"global_summary.{ext}",
        render_table(
            ["n_stories", "n_join_miss", "gsl", "avg_gsl", "gcl", "avg_gcl"],
            [summary_row],
            cfg.format,
        ),
    )
    frame_cols = sorted(gt_objects_per_frame)
    loss_rows = [
        [category] + [f"{loss_table[category][k]:.2f}" for k in frame_cols]
        for category in sorted(loss_table)
    ]
    _write(
        cfg.out_dir,
        f"semantic_loss.{ext}",
        render_table(
            ["category"] + [f"frame_{k}" for k in frame_cols], loss_rows, cfg.format
        ),
    )
    write_transactions(Path(cfg.out_dir) / "transactions.jsonl", transactions)

    print(
        f"stories={summary.n_stories} join_miss={n_miss} "
        f"GSL={format_cost(summary.gsl)} AvgGSL={_fmt_avg(summary.avg_gsl)} "
        f"GCL={format_cost(summary.gcl)} AvgGCL={_fmt_avg(summary.avg_gcl)}"
    )
    return 0


# -- eval-scene ---------------------------------------------------------------


def cmd_eval_scene(args: argparse.Namespace) -> int:
    cfg = _merge_config(args, scene_defaults=True)
    tax = cfg.load_taxonomy()
    cost = cfg.cost_config()
    detections = read_detections(args.detections)
    targets = read_targets(args.targets)
    common, n_miss = _join_on_id(detections, targets, "detections", "targets")
    if not common:
        raise EmptyCorpus("no image ids shared between detections and targets")
    detections = {i: detections[i] for i in common}
    targets = {i: targets[i] for i in common}

    report = corpus_report(detections, targets, cfg.thresholds, tax, cost)
    if cfg.format == "csv":
        census_text = census_csv(report)
    else:
        rows = []
        for t_d, census in report:
            mean = "" if census.mean_total is None else f"{census.mean_total:.4f}"
            rows.append(
                [
                    format_cost(t_d),
                    str(census.n_insert), format_cost(census.cost_insert),
                    str(census.n_delete), format_cost(census.cost_delete),
                    str(census.n_replace), format_cost(census.cost_replace),
                    mean,
                ]
            )
        census_text = render_table(
            [
                "threshold",
                "n_insert", "cost_insert",
                "n_delete", "cost_delete",
                "n_replace", "cost_replace",
                "mean_csed",
            ],
            rows,
            cfg.format,
        )
    _write(cfg.out_dir, f"census.{_EXT[cfg.format]}", census_text)

    for t_d in cfg.thresholds:
        samples, _, _ = build_samples(detections, targets, t_d)
        transactions = [
            Transaction.from_scripts(s.image_id, [scene_csed(s, tax, cost)])
            for s in samples
        ]
        write_transactions(
            Path(cfg.out_dir) / f"transactions_td{format_cost(t_d)}.jsonl",
            transactions,
        )
    print(census_text, end="" if census_text.endswith("\n") else "\n")
    return 0


# -- explain ------------------------------------------------------------------


def cmd_explain(args: argparse.Namespace) -> int:
    cfg = _merge_config(args)
    transactions = read_transactions(args.transactions)
    rules = mine_rules(transactions, cfg.min_support)
    rule_rows = [
        [
            r.source,
            r.target,
            str(r.frequency),
            f"{r.support:.2f}",
            f"{r.antecedent_support:.2f}",
            f"{r.consequent_support:.2f}",
        ]
        for r in rules
    ]
    rules_text = render_table(
        [
            "source", "target", "frequency",
            "support_pct", "antecedent_support_pct", "consequent_support_pct",
        ],
        rule_rows,
        cfg.format,
    )
    table = id_frequency_table(transactions, cfg.top_k) if transactions else {"I": [], "D": []}
    freq_rows = [
        [kind, concept, str(count), f"{share:.2f}"]
        for kind in ("I", "D")
        for concept, count, share in table.get(kind, [])
    ]
    freq_text = render_table(
        ["kind", "concept", "count", "share_pct"], freq_rows, cfg.format
    )
    ext = _EXT[cfg.format]
    _write(cfg.out_dir, f"rules.{ext}", rules_text)
    _write(cfg.out_dir, f"id_frequency.{ext}", freq_text)
    print(rules_text, end="" if rules_text.endswith("\n") else "\n")
    return 0


# -- gen-synthetic ------------------------------------------------------------


def cmd_gen_synthetic(args: argparse.Namespace) -> int:
    cfg = _merge_config(args)
    cost = cfg.cost_config()
    if not cost.flattened:
        raise ValueError("gen-synthetic requires a flattened cost profile")
    rng = random.Random(cfg.seed)
    n_stories = args.n_stories
    length = args.length
    ground_truth = []
    generated = []
    manifest_stories = []
    for i in range(n_stories):
        gt = generate_story(length=length, rng=rng, story_id=f"story-{i:04d}")
        spec = random_spec(rng, gt, max_ops=args.max_ops)
        corrupted, impact = corrupt(gt, spec, cost)
        ground_truth.append(gt)
        generated.append(corrupted)
        manifest_stories.append(
            {
                "id": gt.id,
                "ops": [
                    {
                        "kind": op.kind,
                        "frame": op.frame,
                        **({"attribute": op.attribute, "value": op.value}
                           if op.attribute else {}),
                        **({"object": op.obj.to_dict()} if op.obj else {}),
                    }
                    for op in spec.ops
                ],
                "expected_sl_delta": impact.sl_delta,
                "expected_cl_trace": list(impact.cl_trace),
                "expected_cl_flags": sorted(impact.cl_flags),
                "expected_avg_cl": impact.avg_cl,
            }
        )
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_stories(out / "ground_truth.jsonl", ground_truth)
    write_stories(out / "generated.jsonl", generated)
    manifest = {
        "seed": cfg.seed,
        "n_stories": n_stories,
        "length": length,
        "cost_profile": cfg.cost_profile,
        "stories": manifest_stories,
    }
    _write(cfg.out_dir, "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {n_stories} story pairs of length {length} to {out}")
    return 0


# -- selftest -----------------------------------------------------------------


def _suite_oracle(cost: CostConfig, seed: int) -> tuple[str, str]:
    rng = random.Random(seed)
    n_cases = 120
    for _ in range(n_cases):
        tax = random_taxonomy(rng, n_nodes=rng.randint(5, 20))
        s = random_multiset(rng, tax, max_size=5)
        t = random_multiset(rng, tax, max_size=5)
        fast = csed(s, t, tax, cost)
        slow = brute_force_csed(s, t, tax, cost)
        if fast.total_cost != slow.total_cost:
            return "FAIL", (
                f"assignment {fast.total_cost} != brute force {slow.total_cost} "
                f"on S={list(s)} T={list(t)}"
            )
    return "PASS", f"{n_cases} random instances, assignment == brute force"


def _suite_golden(cost: CostConfig) -> tuple[str, str]:
    if cost != FLATTENED_CONFIG:
        return "SKIP", "requires the default flattened unit-weight profile"
    tax = clevr_taxonomy()
    gen, gt = golden_story_pair()
    scripts, sl, avg_sl = story_loss(gen, gt, tax, cost)
    trace, avg_cl = consistency_loss(gen, tax, cost)
    checks = [
        ([s.total_cost for s in scripts] == [2.0, 2.0, 2.0, 4.0], "per-frame CSED"),
        (sl == 10.0, "SL"),
        (avg_sl == 2.5, "Avg SL"),
        (trace == [0.0, 4.0, 8.0, 12.0], "CL trace"),
        (avg_cl == 0.0, "Avg CL"),
        (consistency_flags(trace, cost) == frozenset(), "CL flags"),
        (
            [op.token for op in scripts[3]]
            == ["R:rubber→metallic", "R:sphere→cylinder"],
            "frame-4 script",
        ),
    ]
    for ok, label in checks:
        if not ok:
            return "FAIL", f"golden story mismatch: {label}"
    return "PASS", "reference story pair reproduced exactly"


def _suite_recovery(cost: CostConfig, seed: int) -> tuple[str, str]:
    if not cost.flattened:
        return "SKIP", "corruption analytics need a flattened profile"
    tax = clevr_taxonomy()
    rng = random.Random(seed)
    n_cases = 100
    for _ in range(n_cases):
        gt = generate_story(length=rng.randint(2, 6), rng=rng)
        spec = random_spec(rng, gt)
        corrupted, impact = corrupt(gt, spec, cost)
        _, sl, _ = story_loss(corrupted, gt, tax, cost)
        trace, avg_cl = consistency_loss(corrupted, tax, cost)
        flags = consistency_flags(trace, cost)
        if (
            sl != impact.sl_delta
            or list(trace) != list(impact.cl_trace)
            or flags != impact.cl_flags
            or avg_cl != impact.avg_cl
        ):
            return "FAIL", (
                f"recovery mismatch for spec {spec}: measured SL {sl} vs "
                f"{impact.sl_delta}, flags {sorted(flags)} vs {sorted(impact.cl_flags)}"
            )
    return "PASS", f"{n_cases} corrupted stories recovered exactly"


def cmd_selftest(args: argparse.Namespace) -> int:
    cfg = _merge_config(args)
    cfg.load_taxonomy()  # propagate taxonomy validation errors before running
    cost = cfg.cost_config()
    results = [
        ("oracle-equivalence", *_suite_oracle(cost, cfg.seed)),
        ("golden-story", *_suite_golden(cost)),
        ("harness-recovery", *_suite_recovery(cost, cfg.seed)),
    ]
    counts = {"PASS": 0, "FAIL": 0, "SKIP": 0}
    for name, status, detail in results:
        counts[status] += 1
        print(f"[{status}] {name}: {detail}")
    print(
        f"{counts['PASS']} passed, {counts['FAIL']} failed, {counts['SKIP']} skipped"
    )
    return 1 if counts["FAIL"] else 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig defaults")
    common.add_argument("--taxonomy", help="bundled name, $CEE_TAXONOMY_DIR name, or path")
    common.add_argument("--cost-profile", dest="cost_profile", choices=sorted(COST_PROFILES))
    common.add_argument("--replace-mode", dest="replace_mode",
                        choices=["delete-plus-insert", "shortest-path"])
    common.add_argument("--unit-edge-cost", dest="unit_edge_cost", type=float)
    common.add_argument("--delete-weight", dest="delete_weight", type=float)
    common.add_argument("--insert-weight", dest="insert_weight", type=float)
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--seed", type=int)
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--attach-unknown", dest="attach_unknown",
                        action="store_const", const=True,
                        help="treat unknown concepts as direct children of the root")

    parser = argparse.ArgumentParser(
        prog="cee",
        description="Knowledge-driven counterfactual edit evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval-story", parents=[common],
                       help="story metrics (SL/CL and aggregates) plus transactions")
    p.add_argument("generated", help="generated stories (JSON lines)")
    p.add_argument("ground_truth", help="ground-truth stories (JSON lines)")
    p.set_defaults(func=cmd_eval_story)

    p = sub.add_parser("eval-scene", parents=[common],
                       help="operation census over detection thresholds")
    p.add_argument("detections", help="detections with confidences (JSON lines)")
    p.add_argument("targets", help="target concept sets (JSON lines)")
    p.add_argument("--threshold", dest="thresholds", action="append", type=float,
                   help="detection confidence cut; repeatable")
    p.set_defaults(func=cmd_eval_scene)

    p = sub.add_parser("explain", parents=[common],
                       help="association rules and I/D frequency tables")
    p.add_argument("transactions", help="edit transactions (JSON lines)")
    p.add_argument("--min-support", dest="min_support", type=float)
    p.add_argument("--top-k", dest="top_k", type=int)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("gen-synthetic", parents=[common],
                       help="seeded story corpora with known expected losses")
    p.add_argument("--n-stories", type=int, default=20)
    p.add_argument("--length", type=int, default=4)
    p.add_argument("--max-ops", type=int, default=2)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("selftest", parents=[common],
                       help="run embedded oracle, golden, and recovery suites")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CeeError, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
