"""``kathtb`` command line: one subcommand per pipeline stage.

Exit codes: 0 success, 1 validation problems in the data, 2 usage or I/O
errors. Log verbosity comes from the KATH_LOG environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .annotation import IngestState, ingest_batch, process_retries, read_records
from .conllu import (Profile, errors_only, read_treebank, serialize_treebank, validate_treebank,
                     write_treebank)
from .errors import KathError
from .metrics import EvalOptions, EvalReport, diff_reports, evaluate
from .reconstruct import ReconstructionConfig, flag_long_sentences, load_lexicon, reconstruct_lines
from .schema import default_schema, load_schema
from .snapshot import (SplitManifest, apply_split, deterministic_split, freeze, read_json,
                       write_json)

log = logging.getLogger("kathtb")

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2

# Data-level failures map to exit 1; everything else (I/O, corrupt state,
# bad model files) maps to 2.
_DATA_ERRORS = {"BAD_FIELD_COUNT", "ALIGNMENT_MISMATCH", "UNMATCHED_RETRY",
                "VALIDATION_REJECT", "UNKNOWN_RETRY_ID", "NO_VALID_SENTENCES",
                "EMPTY_TRAINING_SET", "EMPTY_EVALUATION"}


def _emit_json(obj, path: str | None) -> None:
    if path:
        write_json(obj, path)
    else:
        json.dump(obj, sys.stdout, ensure_ascii=False, indent=2)
        sys.stdout.write("\n")


def _schema(args):
    return load_schema(args.schema) if args.schema else default_schema()


def _profile(args) -> Profile:
    return Profile.STRICT if args.strict else Profile.LENIENT


def _add_profile(p, default_strict: bool):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--strict", dest="strict", action="store_true", default=default_strict)
    g.add_argument("--lenient", dest="strict", action="store_false")


# --- subcommands ------------------------------------------------------------------

def cmd_validate(args) -> int:
    tb = read_treebank(args.file, strict=False)
    issues = validate_treebank(tb, _profile(args), _schema(args) if args.schema else None)
    if args.json:
        _emit_json({"profile": _profile(args).value, "issues": [i.to_dict() for i in issues]}, None)
    else:
        for i in issues:
            where = f"{i.sent_id}" + (f":{i.token_id}" if i.token_id is not None else "")
            print(f"{i.severity.value}\t{i.code}\t{where}\t{i.message}")
    n_err = len(errors_only(issues))
    print(f"{len(tb)} sentences, {n_err} errors, {len(issues) - n_err} warnings", file=sys.stderr)
    return EXIT_INVALID if n_err else EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg = ReconstructionConfig(max_join_gap=args.max_join_gap, enum_split_threshold=args.long_threshold)
    lexicon = load_lexicon(args.lexicon) if args.lexicon else None
    text = Path(args.input).read_text(encoding="utf-8")
    lines = text.split("\n")
    trailing = bool(lines) and lines[-1] == ""
    if trailing:
        lines.pop()
    out, report = reconstruct_lines(lines, cfg, lexicon=lexicon, dehyphen=not args.no_dehyphenate,
                                    join=not args.no_join, boundary=not args.no_boundary)
    result = "\n".join(out) + ("\n" if trailing else "")
    if args.out:
        Path(args.out).write_text(result, encoding="utf-8")
    else:
        sys.stdout.write(result)
    summary = report.to_dict()
    if args.flag_long:
        summary["long_sentences"] = flag_long_sentences(read_treebank(args.flag_long), cfg)
    if args.report_out:
        write_json(summary, args.report_out)
    else:
        print(json.dumps({k: v for k, v in summary.items() if k != "audit"}, ensure_ascii=False),
              file=sys.stderr)
    return EXIT_OK


def _append_sentences(path: str, sentences) -> None:
    """Append, skipping ids already in the file (a rerun after a crash)."""
    existing = set()
    if os.path.exists(path):
        existing = set(read_treebank(path).sent_ids)
    fresh = [s for s in sentences if s.sent_id not in existing]
    with open(path, "a", encoding="utf-8", newline="\n") as f:
        f.write(serialize_treebank(fresh))


def cmd_ingest(args) -> int:
    state = IngestState.load(args.state, max_attempts=args.max_attempts)
    records = read_records(args.records)
    result = ingest_batch(records, _schema(args), state, limit=args.limit)
    _append_sentences(args.out, result.batch_sentences)
    result.state.save(args.state)
    for sid, reason in result.rejected:
        log.warning("rejected %s: %s", sid, reason)
    _emit_json({
        "admitted": len(result.admitted),
        "queued": len(result.batch_sentences) - len(result.admitted),
        "rejected": [{"sent_id": s, "reason": r} for s, r in result.rejected],
        "next_offset": result.state.next_offset,
        "retry_queue": len(result.state.retry_queue),
    }, None)
    return EXIT_OK


def cmd_retry(args) -> int:
    state = IngestState.load(args.state)
    result = process_retries(read_records(args.replacements), state, _schema(args))
    _append_sentences(args.out, result.admitted)
    if result.dead_letter and args.dead_letter:
        with open(args.dead_letter, "a", encoding="utf-8") as f:
            for entry in result.dead_letter:
                f.write(json.dumps(entry, ensure_ascii=False) + "\n")
    result.state.save(args.state)
    _emit_json({
        "admitted": len(result.admitted),
        "dead_letter": [d["sent_id"] for d in result.dead_letter],
        "retry_queue": len(result.state.retry_queue),
    }, None)
    return EXIT_OK


def cmd_freeze(args) -> int:
    batches = [read_treebank(p) for p in args.batches]
    retries = read_treebank(args.retries) if args.retries else None
    snapshot, manifest, rejected = freeze(batches, retries, _profile(args),
                                          _schema(args) if args.schema else None)
    write_treebank(snapshot, args.out)
    _emit_json(manifest.to_dict(), args.manifest_out)
    if rejected:
        print(f"VALIDATION_REJECT: {len(rejected)} sentences not admitted: {', '.join(rejected)}",
              file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def cmd_split(args) -> int:
    tb = read_treebank(args.snapshot)
    split = deterministic_split(tb, args.seed, args.test_fraction)
    _emit_json(split.to_dict(), args.out)
    if args.train_out or args.test_out:
        train_tb, test_tb = apply_split(tb, split)
        if args.train_out:
            write_treebank(train_tb, args.train_out)
        if args.test_out:
            write_treebank(test_tb, args.test_out)
    print(f"train {len(split.train_ids)} / test {len(split.test_ids)}", file=sys.stderr)
    return EXIT_OK


def cmd_train(args) -> int:
    from .parser import ParserConfig, save_model, train

    tb = read_treebank(args.train)
    if args.split:
        tb, _ = apply_split(tb, SplitManifest.from_dict(read_json(args.split)))
    config = ParserConfig(epochs=args.epochs, window=args.window, hash_bits=args.hash_bits,
                          seed=args.seed, profile="strict" if args.strict else "lenient")
    model = train(tb, config)
    save_model(model, args.model_out)
    return EXIT_OK


def cmd_parse(args) -> int:
    from .parser import load_model, predict_treebank

    model = load_model(args.model)
    tb = read_treebank(args.input)
    write_treebank(predict_treebank(model, tb, repair=args.repair_tree), args.output)
    return EXIT_OK


def cmd_score(args) -> int:
    gold, pred = read_treebank(args.gold), read_treebank(args.pred)
    report = evaluate(gold, pred, EvalOptions(universal_only=args.universal_only,
                                              exclude_punct=args.exclude_punct))
    _emit_json(report.to_dict(), args.report_out)
    return EXIT_OK


def cmd_diff(args) -> int:
    a = EvalReport.from_dict(read_json(args.a))
    b = EvalReport.from_dict(read_json(args.b))
    _emit_json(diff_reports(a, b).to_dict(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kathtb", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a CoNLL-U file")
    p.add_argument("file")
    _add_profile(p, default_strict=True)
    p.add_argument("--schema")
    p.add_argument("--json", action="store_true", help="print issues as JSON")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("reconstruct", help="OCR cleanup of a plain-text file")
    p.add_argument("input")
    p.add_argument("--out")
    p.add_argument("--lexicon", help="one word per line; enables split-word joins")
    p.add_argument("--no-dehyphenate", action="store_true")
    p.add_argument("--no-join", action="store_true")
    p.add_argument("--no-boundary", action="store_true")
    p.add_argument("--max-join-gap", type=int, default=1)
    p.add_argument("--long-threshold", type=int, default=120)
    p.add_argument("--flag-long", metavar="CONLLU", help="list sentences above --long-threshold")
    p.add_argument("--report-out")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("ingest", help="admit annotation records from a JSONL batch")
    p.add_argument("records")
    p.add_argument("--state", required=True)
    p.add_argument("--schema")
    p.add_argument("--out", required=True, help="batch CoNLL-U file (appended)")
    p.add_argument("--limit", type=int, help="consume at most N records this run")
    p.add_argument("--max-attempts", type=int, default=3, help="only used for a new state file")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("retry", help="apply replacement records to the retry queue")
    p.add_argument("replacements")
    p.add_argument("--state", required=True)
    p.add_argument("--schema")
    p.add_argument("--out", required=True, help="retry CoNLL-U file (appended)")
    p.add_argument("--dead-letter", help="JSONL file receiving exhausted records")
    p.set_defaults(func=cmd_retry)

    p = sub.add_parser("freeze", help="freeze batches and retries into a snapshot")
    p.add_argument("--batches", nargs="+", required=True)
    p.add_argument("--retries")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest-out")
    p.add_argument("--schema")
    _add_profile(p, default_strict=False)
    p.set_defaults(func=cmd_freeze)

    p = sub.add_parser("split", help="seeded fixed train/test split")
    p.add_argument("snapshot")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--test-fraction", default="0.2")
    p.add_argument("--out")
    p.add_argument("--train-out")
    p.add_argument("--test-out")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train the feature-based baseline")
    p.add_argument("--train", required=True)
    p.add_argument("--split", help="split manifest; trains on its train_ids")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--window", type=int, default=16)
    p.add_argument("--hash-bits", type=int, default=20)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--strict", action="store_true", help="train only on strictly valid trees")
    p.add_argument("--model-out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("parse", help="tag and parse with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--repair-tree", action="store_true")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("score", help="UPOS, weighted DEPREL F1, UAS, LAS")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--report-out")
    p.add_argument("--universal-only", action="store_true")
    p.add_argument("--exclude-punct", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("diff", help="absolute and relative deltas between two reports")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_diff)
    return parser


def run(argv: list[str] | None = None) -> int:
    level = os.environ.get("KATH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except KathError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_INVALID if exc.code in _DATA_ERRORS else EXIT_USAGE
    except (OSError, UnicodeDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
