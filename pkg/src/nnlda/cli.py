"""Command-line entry point: ``nnlda {synth,train,eval,generate}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

import argparse
import csv
import json
import logging
import os
import subprocess
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import evaluation
from .corpus import Schema, SyntheticConfig, load_corpus, write_synthetic_csv
from .exceptions import NNLDAError, UnknownSideValue
from .prior import AdamConfig
from .trainer import NonFiniteTraining, TrainConfig, fit, load_model, save_model

logger = logging.getLogger("nnlda")

TASKS = ("perplexity", "grouping", "features", "lift")


class UsageError(Exception):
    pass


def _now():
    return datetime.now(timezone.utc).isoformat()


def _git_describe():
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True, text=True, timeout=5,
            cwd=Path(__file__).resolve().parent,
        )
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


class RunManifest:
    """JSON record of a run, written at start and finalized at exit."""

    def __init__(self, path, command, argv, config, seed, inputs):
        self.path = Path(path)
        self.data = {
            "command": command,
            "argv": list(argv),
            "config": config,
            "seed": seed,
            "inputs": {k: str(v) for k, v in inputs.items()},
            "outputs": {},
            "git_describe": _git_describe(),
            "started_at": _now(),
            "finished_at": None,
            "status": "running",
        }
        self._write()

    def _write(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", encoding="utf-8") as fh:
            json.dump(self.data, fh, indent=2, default=str)
            fh.write("\n")

    def output(self, name, path):
        self.data["outputs"][name] = str(path)

    def finish(self, status="ok", **extra):
        self.data.update(extra)
        self.data["status"] = status
        self.data["finished_at"] = _now()
        self._write()


def _threads(args):
    env = os.environ.get("NNLDA_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"NNLDA_THREADS must be an integer, got {env!r}") from None
    else:
        n = args.threads if args.threads is not None else (os.cpu_count() or 1)
    if n < 1:
        raise UsageError("thread count must be >= 1")
    return n


def _out_path(out_dir, name):
    p = Path(name)
    return p if p.is_absolute() else Path(out_dir) / p


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def _schema_from_args(args, side=None):
    side_cols = side
    if side_cols is None and getattr(args, "side_cols", None):
        side_cols = tuple(c for c in args.side_cols.split(",") if c)
    return Schema(text=args.text_col, side=side_cols, label=args.label_col,
                  category=args.category_col)


# --- commands ---------------------------------------------------------------

def cmd_synth(args, argv):
    out_dir = Path(args.out_dir)
    out = _out_path(out_dir, args.out)
    cfg = SyntheticConfig(n_docs=args.n_docs, min_len=args.min_len, max_len=args.max_len,
                          seed=args.seed)
    manifest = RunManifest(out_dir / "manifest-synth.json", "synth", argv, asdict(cfg),
                           args.seed, {})
    out.parent.mkdir(parents=True, exist_ok=True)
    write_synthetic_csv(cfg, out)
    manifest.output("corpus", out)
    manifest.finish()
    print(out)


def cmd_train(args, argv):
    out_dir = Path(args.out_dir)
    threads = _threads(args)
    cfg = TrainConfig(
        n_topics=args.topics,
        prior_kind=args.prior,
        em_tol=args.em_tol,
        max_em_iters=args.max_em_iters,
        estep_tol=args.estep_tol,
        estep_max_iter=args.estep_max_iter,
        adam=AdamConfig(lr=args.lr, weight_decay=args.weight_decay, batch_size=args.batch_size),
        gamma_steps_per_em=args.gamma_steps_per_em,
        seed=args.seed,
    )
    manifest = RunManifest(out_dir / "manifest-train.json", "train", argv, asdict(cfg),
                           args.seed, {"data": args.data})
    corpus = load_corpus(args.data, _schema_from_args(args))
    if cfg.prior_kind == "fixed" and corpus.side_dim:
        logger.warning("--prior lda ignores the %d side columns %s",
                       len(corpus.side_schema.names), corpus.side_schema.names)
    model_path = _out_path(out_dir, args.model_out)
    trace_path = _out_path(out_dir, args.trace_out)
    try:
        model, report = fit(corpus, cfg, n_threads=threads)
    except NonFiniteTraining as exc:
        fallback = model_path.with_name(model_path.stem + ".last_good.json")
        save_model(exc.last_good, fallback)
        manifest.output("last_good_checkpoint", fallback)
        manifest.finish("failed", error=str(exc))
        raise
    model_path.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, model_path)
    report.to_csv(trace_path)
    manifest.output("model", model_path)
    manifest.output("elbo_trace", trace_path)
    manifest.finish(converged=report.converged, iterations=report.iterations,
                    final_elbo=report.elbo_trace[-1], wall_time=report.wall_time)
    print(f"{model_path} iterations={report.iterations} converged={report.converged} "
          f"elbo={report.elbo_trace[-1]:.6f}")


def _load_eval_corpus(path, model, args):
    schema = _schema_from_args(args, side=tuple(model.side_schema.names))
    return load_corpus(path, schema, vocab=model.vocab, side_schema=model.side_schema)


def _parse_tasks(text):
    tasks = [t.strip() for t in text.split(",") if t.strip()]
    unknown = [t for t in tasks if t not in TASKS]
    if unknown or not tasks:
        raise UsageError(f"unknown task(s) {unknown}; choose from {','.join(TASKS)}")
    return tasks


def cmd_eval(args, argv):
    out_dir = Path(args.out_dir)
    tasks = _parse_tasks(args.tasks)
    threads = _threads(args)
    sweep = None
    if args.topics_sweep:
        try:
            sweep = [int(k) for k in args.topics_sweep.split(",") if k.strip()]
        except ValueError:
            raise UsageError(f"--topics-sweep must be comma-separated integers") from None
        if "{K}" not in args.model:
            raise UsageError("--topics-sweep needs a --model path containing '{K}'")
    manifest = RunManifest(out_dir / "manifest-eval.json", "eval", argv,
                           {"tasks": tasks, "topics_sweep": sweep, "heldout": args.heldout},
                           None, {"model": args.model, "data": args.data})
    metrics = {}
    if sweep is not None:
        sweep_path = out_dir / "perplexity_sweep.csv"
        with open(sweep_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["K", "log_perplexity"])
            for K in sweep:
                model = load_model(args.model.replace("{K}", str(K)))
                corpus = _load_eval_corpus(args.heldout or args.data, model, args)
                w.writerow([K, repr(evaluation.log_perplexity(model, corpus, threads))])
        manifest.output("perplexity_sweep", sweep_path)
        metrics["perplexity_sweep"] = str(sweep_path)
    else:
        model = load_model(args.model)
        corpus = _load_eval_corpus(args.data, model, args)
        metrics["n_docs"] = len(corpus)
        metrics["n_oov"] = corpus.n_oov
        if "perplexity" in tasks:
            target = _load_eval_corpus(args.heldout, model, args) if args.heldout else corpus
            metrics["log_perplexity"] = evaluation.log_perplexity(model, target, threads)
        if "grouping" in tasks:
            rep = evaluation.grouping_scores(model, corpus, threads)
            metrics.update(rep.metrics())
            metrics["topic_to_category"] = {str(k): v for k, v in rep.topic_to_category.items()}
            metrics["top_words"] = {str(k): evaluation.top_words(model, k, 5)
                                    for k in range(model.n_topics)}
            conf_path = out_dir / "grouping_confusion.csv"
            with open(conf_path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["category", *[f"topic_{k}" for k in range(model.n_topics)]])
                for cat, row in zip(rep.categories, rep.confusion):
                    w.writerow([cat, *row.tolist()])
            manifest.output("grouping_confusion", conf_path)
        if "features" in tasks:
            feat_path = out_dir / "features.csv"
            evaluation.export_features(model, corpus, feat_path, threads)
            manifest.output("features", feat_path)
        if "lift" in tasks:
            lifts = evaluation.lift_all(corpus)
            lift_path = out_dir / "lift.csv"
            with open(lift_path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["doc_id", "lift"])
                for i, v in enumerate(lifts):
                    w.writerow([i, repr(float(v))])
            metrics["lift_below_one_fraction"] = float(np.mean(lifts < 1.0))
            manifest.output("lift", lift_path)
    metrics_path = out_dir / "metrics.json"
    with open(metrics_path, "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest.output("metrics", metrics_path)
    manifest.finish()
    print(metrics_path)


def _parse_side_pairs(pairs):
    out = {}
    for p in pairs or []:
        if "=" not in p:
            raise UsageError(f"--side expects key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def cmd_generate(args, argv):
    model = load_model(args.model)
    side = _parse_side_pairs(args.side)
    unknown = [k for k in side if k not in model.side_schema.names]
    if unknown:
        raise UsageError(f"unknown side column(s) {unknown}; model has {model.side_schema.names}")
    try:
        s = model.side_schema.encode(side)
    except UnknownSideValue as exc:
        raise UsageError(str(exc.args[0])) from None
    print(" ".join(evaluation.generate_comment(model, s, args.n_words)))


# --- parser -----------------------------------------------------------------

def _add_columns(p):
    p.add_argument("--text-col", default="text")
    p.add_argument("--label-col", default="label")
    p.add_argument("--category-col", default="category")


def build_parser():
    parser = argparse.ArgumentParser(prog="nnlda", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write the synthetic product-review corpus as CSV")
    p.add_argument("--n-docs", type=_positive_int, default=2000)
    p.add_argument("--min-len", type=_positive_int, default=1)
    p.add_argument("--max-len", type=_positive_int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="synthetic.csv")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fit a topic model")
    p.add_argument("--data", required=True)
    p.add_argument("--prior", choices=["lda", "dmr", "nnlda"], default="nnlda")
    p.add_argument("--topics", type=_positive_int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=_positive_float, default=0.001)
    p.add_argument("--weight-decay", type=float, default=0.1)
    p.add_argument("--batch-size", type=_positive_int, default=64)
    p.add_argument("--em-tol", type=_positive_float, default=1e-4)
    p.add_argument("--max-em-iters", type=_positive_int, default=200)
    p.add_argument("--estep-tol", type=_positive_float, default=1e-5)
    p.add_argument("--estep-max-iter", type=_positive_int, default=100)
    p.add_argument("--gamma-steps-per-em", type=int, default=None,
                   help="prior ascent steps per EM iteration (default: one epoch)")
    p.add_argument("--side-cols", default=None,
                   help="comma-separated side columns (default: all non-reserved columns)")
    _add_columns(p)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--model-out", default="model.json")
    p.add_argument("--trace-out", default="elbo_trace.csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model")
    p.add_argument("--model", required=True, help="checkpoint; may contain {K} with --topics-sweep")
    p.add_argument("--data", required=True)
    p.add_argument("--tasks", default="perplexity,grouping")
    p.add_argument("--topics-sweep", default=None)
    p.add_argument("--heldout", default=None, help="compute perplexity on this file instead")
    _add_columns(p)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("generate", help="generate a comment from side data")
    p.add_argument("--model", required=True)
    p.add_argument("--side", action="append", metavar="COLUMN=VALUE")
    p.add_argument("--n-words", type=_positive_int, default=5)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args, argv)
    except UsageError as exc:
        parser.error(str(exc))
    except (NNLDAError, OSError, ValueError) as exc:
        print(f"nnlda: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
