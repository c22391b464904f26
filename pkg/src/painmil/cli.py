"""Command-line interface: one subcommand per pipeline stage plus ``pipeline``.

Exit status is 0 on success, 1 for configuration or usage errors and 2 for
runtime failures (bad input data, numerical problems, I/O).
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from .bow import make_bags
from .encoding import ENCODINGS
from .evaluation import consistency_rate, cross_validate, roc_points
from .exceptions import ConfigError, PainMilError, StageError
from .ingest import filter_analyzable, labels_from_opi, load_labels, load_sequences, write_labels, write_sequences
from .io import (
    header_line,
    load_model,
    provenance,
    read_bags,
    read_predictions,
    save_model,
    write_bags,
    write_features,
    write_metrics,
    write_predictions,
    write_roc,
    write_segments,
)
from .mcil import MCILBoostClassifier
from .milboost import LOSSES, MILBoostClassifier
from .pipeline import LEARNERS, PipelineConfig, load_coder_counts, load_groups, prediction_records, run_pipeline
from .segmentation import NcutConfig
from .synthetic import GeneratorConfig, read_key_values, synthesize

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

logger = logging.getLogger("painmil")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _overrides(pairs):
    out = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"expected KEY=VALUE, got {pair!r}")
        out[key.strip()] = value.strip()
    return out


def _sizes(text):
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad window sizes {text!r}") from None


def _read_labels(args):
    if getattr(args, "labels", None):
        return load_labels(args.labels)
    if getattr(args, "opi", None):
        return labels_from_opi(args.opi)
    return None


def _sequences(args):
    seqs = load_sequences(args.evidence, _read_labels(args))
    return filter_analyzable(seqs, args.min_analyzable)


def _estimator(args):
    params = dict(n_rounds=args.rounds, softmax_u=args.softmax_u, loss=args.loss)
    return MCILBoostClassifier(**params) if args.learner == "mcil" else MILBoostClassifier(**params)


def _check_learner(learner, encoding):
    if learner == "mcil" and encoding != "clustered":
        raise ConfigError("the mcil learner needs clustered bags")


def _labelled(bags):
    kept = [b for b in bags if b.label is not None]
    if not kept:
        raise ConfigError("the bag file carries no labels")
    return kept


# -- subcommands -----------------------------------------------------------


def cmd_generate(args):
    values = read_key_values(args.config) if args.config else {}
    values.update(_overrides(args.set))
    if args.seed is not None:
        values["seed"] = args.seed
    cfg = GeneratorConfig.from_mapping(values)
    prov = provenance(asdict(cfg), cfg.seed)
    seqs = synthesize(cfg)
    write_sequences(seqs, args.out, header_line(prov))
    if args.labels_out:
        write_labels({s.sequence_id: s.label for s in seqs}, args.labels_out, header_line(prov))
    logger.info("wrote %d sequences to %s", len(seqs), args.out)


def cmd_encode(args):
    seqs = _sequences(args)
    prov = provenance({"encoding": args.encoding, "evidence": args.evidence}, None)
    write_features(seqs, args.encoding, args.out, prov)


def cmd_segment(args):
    ncut = NcutConfig(args.sigma_f, args.sigma_t, args.min_len, args.max_len)
    seqs = _sequences(args)
    settings = {k: v for k, v in vars(args).items() if k not in ("func", "out", "bags_out", "verbose")}
    prov = provenance(settings, None)
    errors = []
    bags = make_bags(
        seqs, args.encoding, args.method, args.window_sizes, args.stride, ncut, require_labels=False, errors=errors
    )
    if errors:
        sid, msg = errors[0]
        raise StageError("segment", sid, msg)
    write_segments({b.sequence_id: b.segments for b in bags}, args.out, prov)
    if args.bags_out:
        write_bags(bags, args.bags_out, prov)


def cmd_train(args):
    bags = _labelled(read_bags(args.bags))
    _check_learner(args.learner, bags[0].encoding)
    est = _estimator(args)
    est.fit([b.instances for b in bags], [b.label for b in bags])
    settings = {"learner": args.learner, "rounds": args.rounds, "softmax_u": args.softmax_u, "loss": args.loss}
    save_model(est, args.out, bags[0].encoding, provenance(settings, None))
    logger.info("trained on %d bags, %d loss values recorded", len(bags), len(est.loss_history_))


def cmd_predict(args):
    model, encoding = load_model(args.model)
    bags = read_bags(args.bags)
    if bags[0].encoding != encoding:
        raise ConfigError(f"model expects {encoding} bags, got {bags[0].encoding}")
    if args.threshold is not None:
        model.set_params(threshold=args.threshold)
    X = [b.instances for b in bags]
    records = prediction_records(bags, model.decision_function(X), model.localize(X), model.threshold)
    write_predictions(records, args.out, provenance({"model": args.model, "bags": args.bags}, None))


def cmd_evaluate(args):
    if args.coders and args.predictions:
        table = consistency_rate(read_predictions(args.predictions), load_coder_counts(args.coders))
        doc = {g: {"agree": r.agree, "total": r.total, "rate": r.rate} for g, r in table.items()}
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump({"provenance": provenance(vars_for_hash(args), None), "consistency": doc}, fh, indent=1)
            fh.write("\n")
        return
    if not args.bags:
        raise ConfigError("evaluate needs --bags (cross-validation) or --predictions with --coders")
    bags = _labelled(read_bags(args.bags))
    _check_learner(args.learner, bags[0].encoding)
    X = [b.instances for b in bags]
    y = np.array([b.label for b in bags])
    groups = None
    if args.groups:
        table = load_groups(args.groups)
        groups = np.array([table[b.sequence_id] for b in bags])
    cv = cross_validate(_estimator(args), X, y, args.folds, args.seed, not args.no_stratify, groups)
    prov = provenance(vars_for_hash(args), args.seed)
    write_metrics(cv.metrics, args.out, prov, {"learner": args.learner, "n_bags": len(bags)})
    if args.roc_out:
        write_roc(*roc_points(cv.scores, y), args.roc_out, prov)
    print(f"AUC {cv.metrics.auc:.4f}  accuracy {cv.metrics.accuracy:.4f}  ({len(bags)} bags, {args.folds} folds)")


def vars_for_hash(args):
    return {k: v for k, v in vars(args).items() if k not in ("func", "verbose", "out", "roc_out")}


def cmd_pipeline(args):
    overrides = _overrides(args.set)
    if args.out_dir:
        overrides["out_dir"] = args.out_dir
    cfg = PipelineConfig.from_file(args.config, overrides) if args.config else PipelineConfig().with_overrides(overrides)
    result = run_pipeline(cfg)
    m = result.metrics
    print(f"AUC {m.auc:.4f}  accuracy {m.accuracy:.4f}  ({result.n_bags} bags, {cfg.folds}-fold CV)")
    for name, path in result.paths.items():
        print(f"  {name}: {path}")


# -- parser ----------------------------------------------------------------


def _add_learner(p):
    p.add_argument("--learner", choices=LEARNERS, default="mcil")
    p.add_argument("--rounds", type=int, default=50)
    p.add_argument("--softmax-u", type=float, default=20.0)
    p.add_argument("--loss", choices=LOSSES, default="log")


def _add_evidence(p):
    p.add_argument("--evidence", required=True, help="evidence CSV")
    p.add_argument("--labels", help="sequence_id,label CSV")
    p.add_argument("--opi", help="sequence_id,opi CSV (OPI>=3 positive, OPI=0 negative)")
    p.add_argument("--min-analyzable", type=float, default=0.5)


def build_parser():
    parser = _Parser(prog="painmil", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"painmil {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="synthesize labelled evidence sequences")
    p.add_argument("--config", help="generator key-value file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--labels-out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("encode", help="per-frame AU-combination features")
    _add_evidence(p)
    p.add_argument("--encoding", choices=ENCODINGS, default="compact")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("segment", help="temporal segments and pooled bags")
    _add_evidence(p)
    p.add_argument("--encoding", choices=ENCODINGS, default="clustered")
    p.add_argument("--method", choices=("scwind", "ncut"), default="ncut")
    p.add_argument("--window-sizes", type=_sizes, default=(30, 40, 50))
    p.add_argument("--stride", type=int)
    p.add_argument("--sigma-f", type=float, default=0.1)
    p.add_argument("--sigma-t", type=float, default=30.0)
    p.add_argument("--min-len", type=int, default=21)
    p.add_argument("--max-len", type=int, default=81)
    p.add_argument("--out", required=True, help="segments CSV")
    p.add_argument("--bags-out", help="pooled bag CSV for train/predict/evaluate")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("train", help="fit a MIL or MCIL model on a bag file")
    p.add_argument("--bags", required=True)
    _add_learner(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score bags with a saved model")
    p.add_argument("--bags", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="cross-validate on bags, or score predictions against coders")
    p.add_argument("--bags")
    _add_learner(p)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-stratify", action="store_true")
    p.add_argument("--groups", help="sequence_id,group CSV for group-wise folds")
    p.add_argument("--predictions", help="prediction CSV (with --coders)")
    p.add_argument("--coders", help="sequence_id,coders CSV")
    p.add_argument("--out", required=True, help="metrics JSON")
    p.add_argument("--roc-out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="run every stage with cross-validation")
    p.add_argument("--config", help="pipeline key-value file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_pipeline)
    return parser


def _is_config_error(exc):
    if isinstance(exc, StageError):
        return isinstance(exc.cause, ConfigError)
    return isinstance(exc, ConfigError)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        args.func(args)
    except (PainMilError, OSError, KeyError) as exc:
        code = EXIT_CONFIG if _is_config_error(exc) else EXIT_RUNTIME
        print(f"painmil {args.command}: error: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
