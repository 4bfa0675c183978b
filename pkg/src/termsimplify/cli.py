"""Command-line entry point: ``termsimplify <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .corpus_index import (
    DEFAULT_FORMULA,
    HISTOGRAM_BUCKET_WIDTH,
    IDF_FORMULAS,
    DuplicateId,
    EmptyCorpus,
    IdfIndex,
    ParseError,
    build_idf_index,
    compute_stats,
    iter_corpus,
    read_records,
)
from .llm_gateway import AuthMissing, UsageLedger, ledger_report, load_cost_table
from .pipeline import (
    ConfigError,
    IncompleteManifest,
    Pipeline,
    RunAborted,
    RunManifest,
    emit_submission,
    load_run_config,
    resume,
)
from .sari_eval import AlignmentError, EmptyReferenceSet, evaluate_run, render_diff_html
from .term_marker import CONTRAST_DIRECTIONS, DEFAULT_THRESHOLD, SCIENCE_MINUS_LIFESTYLE, mark, render_brackets

log = logging.getLogger("termsimplify")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INCOMPLETE = 2
EXIT_PROVIDER = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit_json(data) -> None:
    sys.stdout.write(json.dumps(data, indent=2, sort_keys=True, default=str) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_index(args) -> int:
    index = build_idf_index(iter_corpus(args.corpus), args.label, args.formula, workers=args.workers)
    index.save(args.out)
    log.info("indexed %d documents, %d terms -> %s", index.doc_count, len(index), args.out)
    return EXIT_OK


def cmd_stats(args) -> int:
    records = read_records(args.dataset)
    stats = compute_stats(records, args.bucket_width)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "stats.json").write_text(json.dumps(stats.to_dict(), indent=2) + "\n", encoding="utf-8")
        stats.write_histogram_csv(out / "length_histogram.csv")
    if args.json:
        _emit_json(stats.to_dict())
    else:
        print(f"total texts:   {stats.total_texts}")
        print(f"unique texts:  {stats.unique_texts}")
        print(f"mean length:   {stats.mean_length_chars:.2f} characters")
    return EXIT_OK


def cmd_mark(args) -> int:
    records = read_records(args.dataset)
    science = IdfIndex.load(args.science)
    lifestyle = IdfIndex.load(args.lifestyle)
    unmarked = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        for r in records:
            m = mark(r.text, science, lifestyle, args.threshold, args.contrast_direction)
            unmarked += m.marked_count == 0
            row = {
                "pair_id": r.pair_id,
                "para_id": r.para_id,
                "sent_id": r.sent_id,
                "marked_text": render_brackets(m),
                "span_count": m.marked_count,
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        summary = {"summary": {"total": len(records), "unmarked": unmarked, "threshold": args.threshold}}
        fh.write(json.dumps(summary) + "\n")
    log.info("%d of %d texts received no markings", unmarked, len(records))
    return EXIT_OK


def _apply_overrides(config, args):
    changes = {}
    if args.seed is not None:
        changes["shuffle_seed"] = args.seed
        changes["providers"] = [
            dataclasses.replace(p, mock=dataclasses.replace(p.mock, seed=args.seed)) if p.mock else p
            for p in config.providers
        ]
    if args.batch_size is not None:
        changes["batch_size"] = args.batch_size
    if args.threshold is not None:
        changes["threshold"] = args.threshold
    return dataclasses.replace(config, **changes).validate() if changes else config


def cmd_run(args) -> int:
    config = _apply_overrides(load_run_config(args.config), args)
    log.info("resolved config: %s", json.dumps(config.to_dict(), sort_keys=True))
    records = read_records(args.dataset)
    out = Path(args.out)
    if args.dry_run:
        plan = Pipeline(config).dry_run(records)
        out.mkdir(parents=True, exist_ok=True)
        (out / "dry_run_prompts.txt").write_text("\n\n=====\n\n".join(plan.pop("prompts")) + "\n", encoding="utf-8")
        (out / "dry_run.json").write_text(json.dumps(plan, indent=2) + "\n", encoding="utf-8")
        _emit_json(plan)
        return EXIT_OK
    pipeline = Pipeline(config, out_dir=out)
    try:
        manifest = pipeline.run(records, dataset_path=args.dataset)
    except RunAborted as exc:
        log.error("%s; partial manifest at %s", exc, out / Pipeline.MANIFEST_NAME)
        return EXIT_PROVIDER
    except KeyboardInterrupt:
        log.error("interrupted; resume with: resume --manifest %s", out / Pipeline.MANIFEST_NAME)
        return EXIT_INCOMPLETE
    finally:
        if pipeline.gateway is not None:
            pipeline.gateway.close()
    emit_submission(manifest, out / Pipeline.SUBMISSION_NAME)
    log.info("run %s: f10=%d f1=%d paths=%s", manifest.run_id, manifest.f10, manifest.f1, manifest.path_counts())
    return EXIT_OK


def cmd_resume(args) -> int:
    try:
        manifest = resume(args.manifest)
    except RunAborted as exc:
        log.error("%s", exc)
        return EXIT_PROVIDER
    except KeyboardInterrupt:
        return EXIT_INCOMPLETE
    emit_submission(manifest, Path(args.manifest).parent / Pipeline.SUBMISSION_NAME)
    log.info("run %s complete: f10=%d f1=%d", manifest.run_id, manifest.f10, manifest.f1)
    return EXIT_OK


def _parse_refs(values) -> dict[str, str]:
    refs = {}
    for i, value in enumerate(values):
        label, sep, path = value.partition("=")
        if not sep:
            label, path = ("references" if len(values) == 1 else f"refs{i + 1}"), value
        refs[label] = path
    return refs


def cmd_eval(args) -> int:
    report, sources, outputs = evaluate_run(args.submission, args.sources, _parse_refs(args.refs))
    if args.out_dir:
        report.write(args.out_dir, sources, outputs)
    if args.json:
        _emit_json(report.to_dict())
    else:
        for label, row in report.reference_sets.items():
            print(f"{label}: SARI {row['mean_sari']:.3f} (identity baseline {row['identity_baseline']:.3f}, n={row['n']})")
    return EXIT_OK


def cmd_report(args) -> int:
    manifest = RunManifest.load(args.manifest)
    sources = {(o.pair_id, o.para_id, o.sent_id): o.original_text for o in manifest.outcomes}
    outputs = {(o.pair_id, o.para_id, o.sent_id): o.output_text for o in manifest.outcomes}
    Path(args.out).write_text(render_diff_html(sources, outputs, title=manifest.run_id), encoding="utf-8")
    summary = {
        "run_id": manifest.run_id,
        "complete": manifest.complete,
        "f10": manifest.f10,
        "f1": manifest.f1,
        "paths": manifest.path_counts(),
        "ledger": manifest.ledger,
    }
    _emit_json(summary)
    return EXIT_OK if manifest.complete else EXIT_INCOMPLETE


def cmd_costs(args) -> int:
    if args.table:
        ledger, claims = load_cost_table(args.table)
    else:
        ledger, claims = UsageLedger.read_jsonl(args.ledger), {}
    report = ledger_report(ledger, claims)
    if args.json:
        _emit_json(report.to_dict())
    else:
        print(report.format_table())
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="termsimplify", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--version", action="version", version=f"termsimplify {__version__}")
        p.set_defaults(func=func)
        return p

    p = add("index", cmd_index, "build an IDF index from a reference corpus")
    p.add_argument("--corpus", required=True, help="directory of text files or JSON-lines {doc_id, text}")
    p.add_argument("--label", required=True, help="corpus label, e.g. science or lifestyle")
    p.add_argument("--out", required=True)
    p.add_argument("--formula", default=DEFAULT_FORMULA, choices=sorted(IDF_FORMULAS))
    p.add_argument("--workers", type=int, default=1)

    p = add("stats", cmd_stats, "dataset statistics over unique texts")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out-dir", help="write stats.json and length_histogram.csv here")
    p.add_argument("--bucket-width", type=int, default=HISTOGRAM_BUCKET_WIDTH)
    p.add_argument("--json", action="store_true")

    p = add("mark", cmd_mark, "bracket-mark complex terms in a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--science", required=True, help="science IDF index file")
    p.add_argument("--lifestyle", required=True, help="lifestyle IDF index file")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--contrast-direction", choices=CONTRAST_DIRECTIONS, default=SCIENCE_MINUS_LIFESTYLE)
    p.add_argument("--out", required=True, help="marked JSON-lines output")

    p = add("run", cmd_run, "run the simplification pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="overrides the shuffle and mock seeds")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--dry-run", action="store_true", help="render prompts and count requests only")

    p = add("resume", cmd_resume, "continue an interrupted run")
    p.add_argument("--manifest", required=True)

    p = add("eval", cmd_eval, "score a submission with SARI")
    p.add_argument("--submission", required=True)
    p.add_argument("--sources", required=True, help="the task dataset file")
    p.add_argument("--refs", required=True, action="append", help="[LABEL=]PATH, repeatable")
    p.add_argument("--out-dir")
    p.add_argument("--json", action="store_true")

    p = add("report", cmd_report, "HTML diff report and summary for a run manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="HTML file to write")

    p = add("costs", cmd_costs, "usage and cost report")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--ledger", help="per-request ledger JSON-lines from a run")
    src.add_argument("--table", help="JSON cost table {rows, claims}")
    p.add_argument("--json", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except AuthMissing as exc:
        log.error("%s", exc)
        return EXIT_PROVIDER
    except IncompleteManifest as exc:
        log.error("%s", exc)
        return EXIT_INCOMPLETE
    except (
        ConfigError,
        ParseError,
        DuplicateId,
        EmptyCorpus,
        AlignmentError,
        EmptyReferenceSet,
        UsageError,
        FileNotFoundError,
        ValueError,
        KeyError,
    ) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
