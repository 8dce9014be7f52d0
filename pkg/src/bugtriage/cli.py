"""``bugtriage`` command line.

Subcommands: clean, topics, train, assign, evaluate, synth. Every tuning
knob of :class:`~bugtriage.config.RunConfig` is also a flag; flags override
``--config``, which overrides the defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__
from ._io import write_text
from .config import PAPER_PROTOCOL, ConfigError, RunConfig, derive_seed
from .corpus import CorpusError, clean, parse_dataset, rejects_path, sort_chronological, write_dataset, write_rejects
from .evaluation import EvaluationError, write_reports
from .matching import MatchingError, write_dr, write_plan
from .optimizer import write_result
from .protocol import ProtocolError, assign, run_protocol, text_pipeline, train, vectorize
from .scoring import ScoringError, read_score_matrix, write_score_matrix
from .synth import SynthConfig, SynthError, generate, write_synth
from .textprep import EmptyVocabularyError
from .topics import TopicModelError, coherence, load_model, save_model, select_k

log = logging.getLogger("bugtriage")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_PIPELINE = 5

_DATA_ERRORS = (CorpusError, EmptyVocabularyError, TopicModelError, ScoringError, MatchingError, SynthError)


def _parse_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split("..")
        return int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO..HI, got {text!r}") from None


def _add_knobs(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("run configuration (defaults shown; --config file values override them)")
    g.add_argument("--config", metavar="FILE", help="key-per-line config file")
    defaults = RunConfig()
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        default = getattr(defaults, f.name)
        help_text = f"{f.metadata['help']} (default: {default})".replace("%", "%%")
        if f.type in ("bool", bool):
            g.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=argparse.SUPPRESS, help=help_text)
        elif f.name == "severity_weights":
            g.add_argument(flag, dest=f.name, type=float, nargs=8, metavar="W", default=argparse.SUPPRESS, help=help_text)
        else:
            conv = {"int": int, "float": float}.get(str(f.type).replace("Optional[", "").rstrip("]"), str)
            g.add_argument(flag, dest=f.name, type=conv, default=argparse.SUPPRESS, help=help_text)
    g.add_argument(
        "--topics-range", type=_parse_range, default=argparse.SUPPRESS, metavar="LO..HI",
        help=f"shorthand for --k-min/--k-max (default: {defaults.k_min}..{defaults.k_max})",
    )


def _run_config(args: argparse.Namespace, **forced) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    names = {f.name for f in fields(RunConfig)}
    overrides = {k: v for k, v in vars(args).items() if k in names}
    if "topics_range" in vars(args):
        overrides["k_min"], overrides["k_max"] = args.topics_range
    if overrides.get("severity_weights") is not None:
        overrides["severity_weights"] = list(overrides["severity_weights"])
    overrides.update(forced)
    return cfg.replace(**overrides).validate()


def _load_clean(path, cfg: RunConfig):
    return clean(parse_dataset(path, cfg.format), cfg.min_fixed)


def cmd_clean(args) -> int:
    cfg = _run_config(args)
    raw = parse_dataset(args.input, cfg.format)
    cleaned = clean(raw, cfg.min_fixed)
    write_dataset(args.output, cleaned.reports, cfg.format)
    write_rejects(rejects_path(args.output), cleaned.rejects, cfg.format)
    print(
        f"{cleaned.n_raw} rows: {len(cleaned)} kept, {cleaned.n_filtered} filtered, "
        f"{len(cleaned.rejects)} rejected; {len(cleaned.developers)} developers"
    )
    return EXIT_OK


def _coherence_csv(table: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "coherence"])
    w.writerows((k, repr(v)) for k, v in sorted(table.items()))
    return buf.getvalue()


def cmd_topics(args) -> int:
    cfg = _run_config(args)
    corpus = _load_clean(args.input, cfg)
    vocab, matrix = vectorize(corpus.reports, text_pipeline(cfg), cfg)
    sel = select_k(matrix, cfg.k_range, cfg.topic_template(derive_seed(cfg.seed, 0, 1)), vocab, cfg.coherence_top_n, cfg.jobs)
    out = Path(args.output)
    save_model(sel.model, out / "model.json")
    write_text(out / "coherence.csv", _coherence_csv(sel.table))
    print(f"best K = {sel.best_k}; model written to {out / 'model.json'}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _run_config(args)
    corpus = _load_clean(args.input, cfg)
    trained = train(list(corpus.reports), corpus.developers, cfg, derive_seed(cfg.seed, 0))
    out = Path(args.output)
    save_model(trained.model, out / "model.json")
    write_text(out / "coherence.csv", _coherence_csv(trained.selection.table))
    write_score_matrix(trained.score_matrix, out / "scores.csv", out / "scores.json")
    write_result(trained.weights_search, out / "de_result.json")
    cfg.save(out / "run_config.yaml")
    w = trained.score_matrix.weights
    print(f"K = {trained.model.K}; weights = ({w.a1:.4f}, {w.a2:.4f}, {w.a3:.4f}); outputs in {out}")
    return EXIT_OK


def cmd_assign(args) -> int:
    cfg = _run_config(args)
    model, _ = load_model(args.model)
    scores_json = args.scores_meta or str(Path(args.scores).with_suffix(".json"))
    loaded = read_score_matrix(args.scores, scores_json)
    if loaded.scores.shape[1] != model.K:
        raise MatchingError(f"score matrix has {loaded.scores.shape[1]} topics, model has {model.K}")
    test = sort_chronological(parse_dataset(args.input, cfg.format).reports)
    result = assign(model, loaded.developers, loaded.scores, test, text_pipeline(cfg), cfg.partial_rule)
    write_plan(result.plan, args.output)
    if args.dr_out:
        write_dr(result.dr, [r.bug_id for r in test], loaded.developers, args.dr_out)
    loads = result.plan.loads.values()
    print(f"{len(test)} bugs assigned in {result.plan.n_chunks} chunk(s); load range {min(loads)}-{max(loads)}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    forced = dict(PAPER_PROTOCOL) if args.paper_protocol else {}
    cfg = _run_config(args, **forced)
    corpus = _load_clean(args.input, cfg)
    reports = run_protocol(corpus, cfg.mode, cfg)
    out = Path(args.output)
    project = args.project or (Path(args.input).stem if args.paper_protocol else None)
    write_reports(reports, out, project=project, plot_data=args.plot_data)
    cfg.save(out / "run_config.yaml")
    for r in reports:
        print("\t".join(r.table_row()))
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = SynthConfig()
    if args.synth_config:
        cfg = SynthConfig(**json.loads(Path(args.synth_config).read_text("utf-8")))
    for name in ("n_topics", "n_developers", "n_reports", "vocab_per_topic", "manual_bias", "noise_days", "base_days"):
        val = getattr(args, name)
        if val is not None:
            setattr(cfg, name, val)
    if args.seed is not None:
        cfg.seed = args.seed
    csv_path, truth_path = write_synth(generate(cfg), args.output, args.name)
    print(f"wrote {csv_path} and {truth_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bugtriage", description="Topic-aware bug triage with tuned developer scores and stable matching.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("clean", help="parse, clean and sort a bug-report CSV")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True, help="cleaned CSV; rejects go to <output>.rejects.csv")
    _add_knobs(s)
    s.set_defaults(func=cmd_clean)

    s = sub.add_parser("topics", help="choose K by coherence and save the topic model")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True, help="output directory")
    _add_knobs(s)
    s.set_defaults(func=cmd_topics)

    s = sub.add_parser("train", help="topic model + DE-tuned developer scores from a history CSV")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True, help="output directory")
    _add_knobs(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("assign", help="assign new bug reports with a trained model and score matrix")
    s.add_argument("input", help="CSV of bug reports to assign")
    s.add_argument("--model", required=True, help="model.json from train/topics")
    s.add_argument("--scores", required=True, help="scores.csv from train")
    s.add_argument("--scores-meta", help="JSON sidecar of the score matrix (default: scores path with .json)")
    s.add_argument("-o", "--output", required=True, help="assignment plan CSV")
    s.add_argument("--dr-out", help="also dump the recommendation matrix to this CSV")
    _add_knobs(s)
    s.set_defaults(func=cmd_assign)

    s = sub.add_parser("evaluate", help="run the time-series or 80/20 evaluation protocol")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True, help="report directory")
    s.add_argument(
        "--paper-protocol", action="store_true",
        help="80/20 split, K in 1..15, min_fixed 10; also writes table_ix.csv",
    )
    s.add_argument("--project", help="project name for table_ix.csv (default: input file stem)")
    s.add_argument("--plot-data", action="store_true", help="also write per-metric CSVs for plotting")
    _add_knobs(s)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("synth", help="generate a synthetic corpus with planted ground truth")
    s.add_argument("-o", "--output", required=True, help="output directory")
    s.add_argument("--name", default="corpus.csv", help="corpus file name (default: corpus.csv)")
    s.add_argument("--synth-config", help="JSON file of generator settings")
    s.add_argument("--seed", type=int, default=None, help="generator seed (default: 0)")
    s.add_argument("--n-topics", type=int, default=None, help="planted topics (default: 4)")
    s.add_argument("--n-developers", type=int, default=None, help="developers (default: 8)")
    s.add_argument("--n-reports", type=int, default=None, help="reports (default: 800)")
    s.add_argument("--vocab-per-topic", type=int, default=None, help="words per topic (default: 12)")
    s.add_argument("--manual-bias", type=float, default=None, help="0 = uniform manual triage (default: 0)")
    s.add_argument("--noise-days", type=int, default=None, help="fix-time noise half-width (default: 3)")
    s.add_argument("--base-days", type=float, default=None, help="fix days at zero aptitude (default: 60)")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, _DATA_ERRORS):
            print(f"error[data]: {exc}", file=sys.stderr)
            return EXIT_DATA
        if isinstance(exc, (EvaluationError,)):
            print(f"error[pipeline]: {exc}", file=sys.stderr)
            return EXIT_PIPELINE
        print(f"error[config]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return EXIT_IO
    except ProtocolError as exc:
        print(f"error[pipeline]: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
