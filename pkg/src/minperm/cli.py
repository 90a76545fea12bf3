"""Command-line interface.

Subcommands: ingest, train, minset, mine-support, recommend, risk, evaluate,
synth. Exit codes: 0 success, 1 usage/config error, 2 data error,
3 non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

from . import pipeline, synth
from .corpus import ApiPermissionMap, Corpus, PermissionRegistry, load_corpus
from .funcperm import final_minset
from .metrics import format_table
from .pipeline import PipelineResult, RunConfig
from .recommender import NoNeighborsError
from .util import DataError, dump_json, dump_jsonl

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NO_CONVERGENCE = 3


def _add_io_arguments(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", required=True, help="corpus JSONL file")
    p.add_argument("--registry", help="permission registry JSON (default: bundled)")
    p.add_argument("--api-map", help="API-to-permission map JSON")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.add_argument("--allow-unknown", action="store_true",
                   help="downgrade unknown permissions to a warning instead of an error")


def _add_config_arguments(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int, help="run seed (default 0)")
    p.add_argument("--topics", type=int, dest="k", help="LDA topic count (default 100)")
    p.add_argument("--alpha", type=float, help="document-topic prior (default 50/K)")
    p.add_argument("--beta", type=float, help="topic-word prior (default 0.01)")
    p.add_argument("--gibbs-iterations", type=int, help="training sweeps (default 1000)")
    p.add_argument("--infer-iterations", type=int, help="fold-in sweeps (default 200)")
    p.add_argument("--t-b", type=float, help="benign similarity threshold (default 0.6)")
    p.add_argument("--t-m", type=float, help="malicious similarity threshold (default 0.4)")
    p.add_argument("--theta-support", type=float, help="support-degree threshold (default 0.1)")
    p.add_argument("--top-t", type=int, help="top permissions per topic (default 20)")
    p.add_argument("--n-folds", type=int, help="benign training folds (default 5)")
    p.add_argument("--max-iterations", type=int, help="minimization pass limit (default 10)")
    p.add_argument("--test-ratio", type=float, help="test split fraction (default 0.2)")
    p.add_argument("--stop-ratio", type=float, help="adaptive-cutoff gap threshold (default 0.5)")
    p.add_argument("--relevance-floor", type=float, help="inverted-index probability floor (default 0.05)")
    p.add_argument("--uniform-fallback", action="store_const", const=True, default=None,
                   help="give out-of-vocabulary descriptions a uniform topic vector")
    p.add_argument("--relax-threshold", action="store_const", const=True, default=None,
                   help="lower similarity thresholds in 0.05 steps when no neighbor qualifies")
    p.add_argument("--no-index", action="store_const", const=False, default=None, dest="use_index",
                   help="disable the inverted-index acceleration")
    p.add_argument("--threads", type=int, help="worker cap for per-app stages (default 1)")


_CONFIG_KEYS = [f.name for f in dataclasses.fields(RunConfig)]


def _build_config(args: argparse.Namespace) -> RunConfig:
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    if getattr(args, "config", None):
        return RunConfig.from_file(args.config, **overrides)
    return RunConfig(**{k: v for k, v in overrides.items() if v is not None})


def _load_corpus(args: argparse.Namespace) -> Corpus:
    registry = PermissionRegistry.load(args.registry) if args.registry else PermissionRegistry.bundled()
    api_map = ApiPermissionMap.load(args.api_map, registry) if args.api_map else None
    warnings: list[str] = []
    corpus = load_corpus(
        args.corpus,
        registry,
        api_map=api_map,
        on_unknown="warn" if args.allow_unknown else "error",
        warnings=warnings,
    )
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    return corpus


def _print_stats(corpus: Corpus) -> None:
    print(f"records: {len(corpus)}")
    print(f"benign: {len(corpus.benign())}")
    print(f"malicious: {len(corpus.malicious())}")
    print(f"registry permissions: {len(corpus.registry)}")


def _run_training(args: argparse.Namespace) -> tuple[PipelineResult, Corpus]:
    corpus = _load_corpus(args)
    cfg = _build_config(args)
    return pipeline.run_training(corpus, cfg), corpus


def _func_rows(func: dict) -> list[dict]:
    return [
        {"app_id": app_id, "probs": [float(v) for v in vec]}
        for app_id, vec in sorted(func.items())
    ]


def cmd_ingest(args: argparse.Namespace) -> int:
    corpus = _load_corpus(args)
    out = Path(args.out_dir)
    corpus.save(out / "corpus.normalized.jsonl")
    _print_stats(corpus)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    result, _ = _run_training(args)
    out = Path(args.out_dir)
    result.model.save(out / "model" / "topic_model.json")
    dump_jsonl(_func_rows(result.train_func), out / "func" / "func_train.jsonl")
    dump_jsonl(_func_rows(result.test_func), out / "func" / "func_test.jsonl")
    _print_stats(result.train_corpus)
    print(f"vocabulary: {len(result.model.vocab)}")
    print(f"topics: {result.model.k}")
    return EXIT_OK


def cmd_minset(args: argparse.Namespace) -> int:
    result, _ = _run_training(args)
    out = Path(args.out_dir) / "minset"
    dump_jsonl(result.minset_result.rows(), out / "initial_minsets.jsonl")
    dump_jsonl(
        [{"app_id": a, "min_perms": sorted(p)} for a, p in sorted(result.final_minsets.items())],
        out / "minsets.jsonl",
    )
    dump_jsonl([e.to_row() for e in result.minset_result.events], out / "iteration_log.jsonl")
    result.declared_table.save(out / "support_declared.json")
    result.code_table.save(out / "support_code.json")
    print(f"iterations: {result.minset_result.iterations}")
    print(f"converged: {result.minset_result.converged}")
    print(f"removals: {len(result.minset_result.events)}")
    if not result.minset_result.converged:
        print("error: minimization did not converge", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_mine_support(args: argparse.Namespace) -> int:
    corpus = _load_corpus(args)
    cfg = _build_config(args)
    train_corpus, _ = pipeline.split_corpus(corpus, cfg)
    model, train_func = pipeline.train_topics(train_corpus.records, cfg)
    declared_table, code_table = pipeline.mine_tables(
        train_corpus.benign(), train_func, model.fingerprint
    )
    out = Path(args.out_dir) / "minset"
    declared_table.save(out / "support_declared.json")
    code_table.save(out / "support_code.json")
    print(f"topics: {declared_table.n_topics}")
    print(f"declared-table permissions: {len(declared_table.known_permissions())}")
    print(f"code-table permissions: {len(code_table.known_permissions())}")
    return EXIT_OK


def _select_targets(args: argparse.Namespace, result: PipelineResult) -> list:
    by_id = result.test_corpus.by_id()
    if args.all_test:
        return sorted(by_id.values(), key=lambda r: r.id)
    if not args.targets:
        raise ValueError("give --targets or --all-test")
    missing = sorted(t for t in args.targets if t not in by_id)
    if missing:
        raise ValueError(f"targets not in the test split: {missing}")
    return [by_id[t] for t in sorted(args.targets)]


def cmd_recommend(args: argparse.Namespace) -> int:
    result, _ = _run_training(args)
    rows = []
    for record in _select_targets(args, result):
        try:
            rec = pipeline.recommend_for(result, record, side=args.side)
            rows.append({
                "app_id": record.id,
                "ranked": [{"perm": p, "rv": v} for p, v in rec.ranked],
                "truncated_at": rec.truncated_at,
            })
        except NoNeighborsError:
            rows.append({"app_id": record.id, "ranked": [], "truncated_at": 0,
                         "status": "no-neighbors"})
    dump_jsonl(rows, Path(args.out_dir) / "recommend" / "recommendations.jsonl")
    print(f"recommended: {len(rows)}")
    return EXIT_OK


def cmd_risk(args: argparse.Namespace) -> int:
    result, _ = _run_training(args)
    wanted = {r.id for r in _select_targets(args, result)}
    pipeline.assess_tests(result)
    rows = [
        report.to_row()
        for label in ("benign", "malicious")
        for report in result.reports[label]
        if report.app_id in wanted
    ]
    rows.sort(key=lambda r: r["app_id"])
    dump_jsonl(rows, Path(args.out_dir) / "risk" / "risk.jsonl")
    risky = sum(1 for r in rows if r["risky"])
    print(f"assessed: {len(rows)}")
    print(f"risky: {risky}")
    return EXIT_OK


def _sweep_grid(raw: str | None, default: list[float], cast=float) -> list:
    if raw is None or raw == "default":
        return default
    return [cast(v) for v in raw.split(",")]


def _run_sweep(args: argparse.Namespace, corpus: Corpus, cfg: RunConfig,
               truth_min: dict | None, out: Path) -> None:
    k_grid = _sweep_grid(args.sweep_topics, list(range(60, 101, 5)), int) \
        if args.sweep_topics is not None else [cfg.k]
    theta_grid = _sweep_grid(args.sweep_support, [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6]) \
        if args.sweep_support is not None else [cfg.theta_support]
    ratio_grid = _sweep_grid(args.sweep_ratio, [0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40]) \
        if args.sweep_ratio is not None else [cfg.test_ratio]

    fieldnames = ["k", "theta_support", "test_ratio"]
    for label in ("benign", "malicious"):
        for col in ("aupr", "rar", "arisk", "map", "nr", "trr"):
            fieldnames.append(f"{label}_{col}")

    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        for k in k_grid:
            for ratio in ratio_grid:
                base = pipeline.run_training(
                    corpus, cfg.with_overrides(k=k, test_ratio=ratio)
                )
                for theta in theta_grid:
                    final_sets = {
                        app_id: final_minset(
                            perms, base.train_func[app_id], base.declared_table,
                            base.code_table, theta, cfg.top_t,
                        )
                        for app_id, perms in base.minset_result.minsets.items()
                    }
                    run = dataclasses.replace(
                        base,
                        config=base.config.with_overrides(theta_support=theta),
                        final_minsets=final_sets,
                        reports={}, rankings={}, eval_reports={},
                    )
                    pipeline.evaluate_run(run, truth_min=truth_min)
                    row = {"k": k, "theta_support": theta, "test_ratio": ratio}
                    for label, report in run.eval_reports.items():
                        for col, value in zip(("aupr", "rar", "arisk", "map", "nr", "trr"),
                                              report.column_values()):
                            row[f"{label}_{col}"] = f"{value:.6f}"
                    writer.writerow(row)


def cmd_evaluate(args: argparse.Namespace) -> int:
    corpus = _load_corpus(args)
    cfg = _build_config(args)
    truth_min = None
    if args.truth:
        truth_min = synth.load_truth(args.truth).true_min

    result = pipeline.run_training(corpus, cfg)
    pipeline.evaluate_run(result, truth_min=truth_min)
    out = Path(args.out_dir) / "eval"
    for label, report in result.eval_reports.items():
        dump_json(report.to_dict(), out / f"eval_{label}.json")
    table = format_table(result.eval_reports)
    out.mkdir(parents=True, exist_ok=True)
    (out / "table.txt").write_text(table + "\n", encoding="utf-8")
    print(table)

    if args.sweep_topics is not None or args.sweep_support is not None or args.sweep_ratio is not None:
        _run_sweep(args, corpus, cfg, truth_min, out / "sweep.csv")
        print(f"sweep written: {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    spec = synth.SynthSpec(
        n_benign=args.n_benign,
        n_malicious=args.n_malicious,
        n_topics=args.n_topics,
        vocab_size=args.vocab_size,
        perms_per_topic=args.perms_per_topic,
        overprivilege_rate=args.overprivilege_rate,
        extras_per_app=args.extras_per_app,
        seed=args.seed if args.seed is not None else 0,
        risk_pool_size=args.risk_pool_size,
        doc_len=args.doc_len,
    )
    registry = PermissionRegistry.load(args.registry) if args.registry else PermissionRegistry.bundled()
    corpus, truth = synth.generate(spec, registry)
    corpus.save(args.out)
    truth.save(args.truth_out)
    print(f"benign: {spec.n_benign}")
    print(f"malicious: {spec.n_malicious}")
    print(f"corpus: {args.out}")
    print(f"truth: {args.truth_out}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="minperm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, func, help_text: str, io: bool = True, config: bool = True):
        p = sub.add_parser(name, help=help_text)
        if io:
            _add_io_arguments(p)
        if config:
            _add_config_arguments(p)
        p.set_defaults(func=func)
        return p

    command("ingest", cmd_ingest, "validate and normalize a corpus", config=False)
    command("train", cmd_train, "train the topic model and emit topic vectors")
    command("minset", cmd_minset, "iterate minimum permission sets for benign training apps")
    command("mine-support", cmd_mine_support, "mine topic-permission support tables")

    p = command("recommend", cmd_recommend, "recommend permissions for test apps")
    p.add_argument("--targets", nargs="*", help="test app ids")
    p.add_argument("--all-test", action="store_true", help="recommend for the whole test split")
    p.add_argument("--side", choices=("benign", "malicious"), default="benign")

    p = command("risk", cmd_risk, "risk-assess test apps")
    p.add_argument("--targets", nargs="*", help="test app ids")
    p.add_argument("--all-test", action="store_true", help="assess the whole test split")

    p = command("evaluate", cmd_evaluate, "compute corpus metrics over the test split")
    p.add_argument("--truth", help="ground-truth JSONL for necessary permission sets")
    p.add_argument("--sweep-topics", nargs="?", const="default",
                   help="sweep topic counts (comma list; bare flag = 60..100 step 5)")
    p.add_argument("--sweep-support", nargs="?", const="default",
                   help="sweep support thresholds (bare flag = 0.05 then 0.1..0.6 step 0.1)")
    p.add_argument("--sweep-ratio", nargs="?", const="default",
                   help="sweep test ratios (bare flag = 0.10..0.40 step 0.05)")

    p = sub.add_parser("synth", help="generate a synthetic corpus with ground truth")
    p.add_argument("--out", required=True, help="corpus JSONL output path")
    p.add_argument("--truth-out", required=True, help="ground-truth JSONL output path")
    p.add_argument("--registry", help="permission registry JSON (default: bundled)")
    p.add_argument("--n-benign", type=int, default=200)
    p.add_argument("--n-malicious", type=int, default=40)
    p.add_argument("--n-topics", type=int, default=6)
    p.add_argument("--vocab-size", type=int, default=240)
    p.add_argument("--perms-per-topic", type=int, default=5)
    p.add_argument("--overprivilege-rate", type=float, default=0.4)
    p.add_argument("--extras-per-app", type=int, default=2)
    p.add_argument("--risk-pool-size", type=int, default=8)
    p.add_argument("--doc-len", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
