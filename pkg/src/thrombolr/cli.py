"""Command-line entry point: ``thrombolr <subcommand> [options]``.

Failures print one line ``ERROR <error-class>: <message>`` to stderr and
exit with status 1 (2 for usage errors, as argparse does).
"""

import argparse
import sys
from dataclasses import replace

from . import __version__, pipeline
from .config import load_config
from .errors import InputMissingError, ThrombolrError

_COMMANDS = {
    "synth": "generate a synthetic table with planted ground truth",
    "prepare": "ingest the input CSV, build labels and the stratified split",
    "screen": "drop excluded, constant, correlated and low-importance columns",
    "train-baseline": "fit the baseline model on the screened base features",
    "engineer": "build SQ, LOG and IX candidate features",
    "select": "recursive LOFO elimination on the training rows",
    "evaluate": "score the selected model once on the held-out test rows",
    "importance": "permutation importance on the validation rows",
    "export": "write the final artifact, expression and feature manifest",
    "run-all": "run every stage from prepare to export",
    "predict": "append model probabilities to a CSV",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="thrombolr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, help_text in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("-c", "--config", help="YAML or JSON config file")
        p.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry, e.g. rfe.folds=3 (repeatable)")
        p.add_argument("-i", "--input", help="input CSV (overrides config)")
        p.add_argument("-o", "--output-dir", help="output directory (overrides config)")
        p.add_argument("-v", "--verbose", action="store_true", help="report RFE progress")
        if name == "synth":
            p.add_argument("--out", help="directory for data.csv and truth.json")
        if name == "predict":
            p.add_argument("--model", required=True, help="model artifact (model.json)")
            p.add_argument("--out", required=True, help="output CSV")
    return parser


def _config(args):
    config = load_config(args.config, args.set)
    paths = {}
    if args.input:
        paths["input"] = args.input
    if args.output_dir:
        paths["output_dir"] = args.output_dir
    return replace(config, **paths)


def _progress(rec):
    gone = rec.eliminated or "-"
    print(f"iteration {rec.iteration}: {len(rec.retained)} specs, "
          f"cv PR-AUC {rec.baseline:.6f}, eliminated {gone}", file=sys.stderr, flush=True)


def _dispatch(args):
    if args.command == "predict":
        if not args.input:
            raise InputMissingError("predict needs --input")
        pipeline.predict(args.model, args.input, args.out)
        return
    config = _config(args)
    progress = _progress if args.verbose else None
    if args.command == "synth":
        path = pipeline.run_synth(config, args.out)
        print(path)
    elif args.command == "run-all":
        pipeline.run_all(config, progress)
    elif args.command == "select":
        pipeline.select(config, progress)
    else:
        pipeline.run_stage(args.command, config)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _dispatch(args)
    except ThrombolrError as exc:
        print(f"ERROR {exc.error_class}: {_one_line(exc)}", file=sys.stderr)
        return 1
    except (OSError, MemoryError) as exc:
        print(f"ERROR io-failure: {_one_line(exc)}", file=sys.stderr)
        return 1
    except Exception as exc:  # still one parseable line, never a traceback
        print(f"ERROR internal: {type(exc).__name__}: {_one_line(exc)}", file=sys.stderr)
        return 1
    return 0


def _one_line(exc):
    return " ".join(str(exc).split())


if __name__ == "__main__":
    sys.exit(main())
