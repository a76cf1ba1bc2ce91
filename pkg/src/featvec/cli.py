"""Command line interface: ``featvec <subcommand> ...``.

Subcommands write into a run directory that always holds ``metadata.json``
(every flag, the seed and the tool version). Exit codes: 0 success,
1 usage or argument error, 2 data error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import (ImportanceScores, gini_importance, load_external_scores,
                        permutation_importance, write_scores_tsv)
from .dataset import (CLASSIFICATION, Dataset, FeatureSchema, FeatureSpec, load_csv, save_csv,
                      train_test_split)
from .embedding import build_cooccurrence, embed, write_embedding_tsv
from .errors import DataError, NumericalError
from .evaluation import ForestTrainer, sds_curve, spearman, sss_curve, write_curve_csv
from .forest import (Forest, TrainParams, cross_validate_depth, extract_sentences, grow_until_rules,
                     resolve_workers)
from .knockoffs import (GaussianMixture, angle_permutation_test, fit_gmm, knockoff_report,
                        sample_knockoffs, write_knockoff_report)
from .synthetic import gen_exchangeable_pairs, gen_gmm_nonnull
from .viz import render_curves, render_feature_vectors

log = logging.getLogger("featvec")

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3
DEFAULT_RULES = 100_000
DEFAULT_WINDOW = 3
DEFAULT_PERMUTATIONS = 10_000
CV_DEPTHS = tuple(range(2, 11))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _depth(text: str):
    if text == "auto":
        return text
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("depth must be 'auto' or a positive integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError("depth must be >= 1")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _csv_list(choices):
    def parse(text: str) -> list[str]:
        items = [t.strip() for t in text.split(",") if t.strip()]
        bad = [t for t in items if t not in choices]
        if bad or not items:
            raise argparse.ArgumentTypeError(f"choose from {','.join(choices)}")
        return items
    return parse


def _add_data_args(p):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--schema", help="schema JSON; inferred from the CSV when omitted")
    p.add_argument("--target", help="target column when inferring the schema (default: last column)")
    p.add_argument("--impute", action="store_true", help="fill missing cells (median / mode)")


def _add_model_args(p):
    p.add_argument("--rules", type=_positive, default=DEFAULT_RULES, help="number of decision paths R")
    p.add_argument("--window", type=_positive, default=DEFAULT_WINDOW, help="co-occurrence window w")
    p.add_argument("--depth", type=_depth, default="auto", help="tree depth or 'auto' (cross-validated)")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="featvec", description="Feature Vectors for tabular models.")
    parser.add_argument("--version", action="version", version=f"featvec {__version__}")
    parser.add_argument("--threads", type=_positive, default=None,
                        help="worker threads (default: $FEATVEC_THREADS or 1)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("fit", help="train the forest and collect decision paths")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--out", required=True, help="model directory")

    p = sub.add_parser("embed", help="embed a fitted model as feature vectors")
    p.add_argument("--model", required=True, help="model directory written by 'fit'")
    p.add_argument("--out", required=True, help="output directory for the TSV and SVG")
    p.add_argument("--knockoff-pairs", action="store_true",
                   help="draw the second half of the features as knockoff squares")

    p = sub.add_parser("eval", help="compare importance methods with SDS/SSS curves")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--methods", type=_csv_list(("fv", "gini", "perm", "external")), default=["fv", "gini", "perm"])
    p.add_argument("--curves", type=_csv_list(("sds", "sss")), default=["sds", "sss"])
    p.add_argument("--external", help="TSV of (feature_name, score) for the 'external' method")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--curve-trees", type=_positive, default=50, help="trees per retrained curve model")
    p.add_argument("--repeats", type=_positive, default=5, help="permutation importance repeats")
    p.add_argument("--out", required=True)

    p = sub.add_parser("knockoff-test", help="angle permutation test on [X, knockoffs]")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--gmm-components", type=_positive, default=3)
    p.add_argument("--mixture", help="use this mixture JSON instead of fitting one")
    p.add_argument("--n-perm", type=int, default=DEFAULT_PERMUTATIONS)
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="write a synthetic benchmark dataset")
    p.add_argument("--kind", choices=("pairs", "gmm"), required=True)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _metadata(args, **extra) -> dict:
    flags = {k: v for k, v in vars(args).items() if k not in ("func",)}
    return {"tool": "featvec", "version": __version__, "command": args.command, "flags": flags, **extra}


def _write_json(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args) -> Dataset:
    schema = FeatureSchema.load(args.schema) if args.schema else None
    return load_csv(args.data, schema, impute=args.impute, target=args.target)


def _resolve_depth(ds: Dataset, args, n_jobs: int) -> tuple[int, bool]:
    if args.depth != "auto":
        return args.depth, False
    depth = cross_validate_depth(ds, CV_DEPTHS, folds=3, seed=args.seed, n_jobs=n_jobs)
    log.info("cross-validated depth: %d", depth)
    return depth, True


def _fit_model(ds: Dataset, args, n_jobs: int):
    depth, auto = _resolve_depth(ds, args, n_jobs)
    params = TrainParams(max_depth=depth, task=ds.task)
    forest, sentences = grow_until_rules(ds, args.rules, params, args.seed, n_jobs)
    log.info("%d trees, %d decision paths", len(forest), len(sentences))
    E = embed(build_cooccurrence(sentences, ds.d, args.window))
    return forest, sentences, E, depth, auto


def _sentence_summary(sentences, names) -> dict:
    lengths = np.array([len(s) for s in sentences], dtype=np.int64)
    counts = np.zeros(len(names), dtype=np.int64)
    for s in sentences:
        for f in s:
            counts[f] += 1
    return {
        "n_sentences": int(len(sentences)),
        "length_histogram": np.bincount(lengths).tolist() if len(lengths) else [],
        "mean_length": float(lengths.mean()) if len(lengths) else 0.0,
        "feature_occurrences": {n: int(c) for n, c in zip(names, counts)},
    }


def cmd_fit(args, n_jobs: int) -> None:
    ds = _load(args)
    out = _outdir(args.out)
    forest, sentences, E, depth, auto = _fit_model(ds, args, n_jobs)
    forest.save(out / "forest.json")
    ds.schema.save(out / "schema.json")
    _write_json(_sentence_summary(sentences, ds.feature_names), out / "sentences.json")
    _write_json(_metadata(args, R=args.rules, w=args.window, depth=depth, depth_auto=auto,
                          seed=args.seed, n_trees=len(forest), n_sentences=len(sentences),
                          explained_variance=E.explained_variance), out / "metadata.json")


def cmd_embed(args, n_jobs: int) -> None:
    model = Path(args.model)
    try:
        with open(model / "metadata.json", encoding="utf-8") as fh:
            fit_meta = json.load(fh)
        forest = Forest.load(model / "forest.json")
    except FileNotFoundError as exc:
        raise DataError(f"not a model directory: {exc.filename} is missing") from None
    window = int(fit_meta["w"])
    sentences = [s for tree in forest.trees for s in extract_sentences(tree)]
    E = embed(build_cooccurrence(sentences, forest.n_features, window))
    names = forest.feature_names or [f"x{i}" for i in range(forest.n_features)]
    out = _outdir(args.out)
    write_embedding_tsv(E, names, out / "feature_vectors.tsv")
    render_feature_vectors(E, names, out / "feature_vectors.svg", knockoff_pairs=args.knockoff_pairs)
    _write_json(_metadata(args, model_metadata=fit_meta, window=window, n_sentences=len(sentences),
                          explained_variance=E.explained_variance,
                          singular_values=E.singular_values.tolist()), out / "metadata.json")


def cmd_eval(args, n_jobs: int) -> None:
    if "external" in args.methods and not args.external:
        raise UsageError("--methods external needs --external PATH")
    if not 0 < args.test_fraction < 1:
        raise UsageError("--test-fraction must lie in (0, 1)")
    ds = _load(args)
    train, test = train_test_split(ds, args.test_fraction, args.seed)
    forest, _, E, depth, auto = _fit_model(train, args, n_jobs)
    scores: dict[str, ImportanceScores] = {}
    for m in args.methods:
        if m == "fv":
            scores[m] = ImportanceScores("fv", E.importance)
        elif m == "gini":
            scores[m] = gini_importance(forest)
        elif m == "perm":
            scores[m] = permutation_importance(forest, test, args.repeats, args.seed)
        else:
            scores[m] = load_external_scores(args.external, ds.schema)
    out = _outdir(args.out)
    for m, s in scores.items():
        write_scores_tsv(s, ds.feature_names, out / f"scores_{m}.tsv")
    trainer = ForestTrainer(TrainParams(max_depth=depth, task=ds.task), args.curve_trees, args.seed, n_jobs)
    curves = {}
    for kind in args.curves:
        fn = sds_curve if kind == "sds" else sss_curve
        drawn = []
        for m, s in scores.items():
            c = fn(train, test, s.ranking(), trainer, method=m)
            write_curve_csv(c, out / f"{kind}_{m}.csv")
            drawn.append(c)
            curves[f"{kind}_{m}"] = c.metric.tolist()
        label = "accuracy" if ds.task == CLASSIFICATION else "MSE"
        render_curves(drawn, out / f"{kind}.svg", title=kind.upper(), ylabel=label)
    rho = {}
    names = list(scores)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            try:
                rho[f"{a}~{b}"] = spearman(scores[a], scores[b])
            except ValueError:
                rho[f"{a}~{b}"] = None
    _write_json(_metadata(args, depth=depth, depth_auto=auto, n_train=train.n, n_test=test.n,
                          explained_variance=E.explained_variance, spearman=rho, curves=curves),
                out / "metadata.json")


def cmd_knockoff(args, n_jobs: int) -> None:
    ds = _load(args)
    if args.mixture:
        with open(args.mixture, encoding="utf-8") as fh:
            gmm = GaussianMixture.from_dict(json.load(fh))
    else:
        gmm = fit_gmm(ds.X, args.gmm_components, seed=args.seed)
    ko = sample_knockoffs(gmm, ds.X, args.seed)
    names = ds.feature_names + [f"{n}~knockoff" for n in ds.feature_names]
    schema = FeatureSchema(tuple(FeatureSpec(n) for n in names), ds.schema.target, ds.task)
    joint = Dataset(np.hstack([ds.X, ko.x_tilde]), ds.y, schema, classes=ds.classes)
    _, _, E, depth, auto = _fit_model(joint, args, n_jobs)
    result = angle_permutation_test(E, args.n_perm, args.seed)
    out = _outdir(args.out)
    write_knockoff_report(knockoff_report(E, result, ds.feature_names), out / "knockoff_report.json")
    write_embedding_tsv(E, names, out / "feature_vectors.tsv")
    render_feature_vectors(E, names, out / "feature_vectors.svg", knockoff_pairs=True)
    _write_json(_metadata(args, depth=depth, depth_auto=auto, p_value=result.p_value,
                          observed_stat=result.observed_stat,
                          mixture_source="file" if args.mixture else "fitted"), out / "metadata.json")


def cmd_synth(args, n_jobs: int) -> None:
    out = _outdir(args.out)
    if args.kind == "pairs":
        ds = gen_exchangeable_pairs(args.n, args.seed)
    else:
        ds, gmm = gen_gmm_nonnull(args.n, args.seed)
        _write_json(gmm.to_dict(), out / "mixture.json")
    save_csv(ds, out / "data.csv")
    ds.schema.save(out / "schema.json")
    _write_json(_metadata(args, n=ds.n, d=ds.d), out / "metadata.json")


COMMANDS = {"fit": cmd_fit, "embed": cmd_embed, "eval": cmd_eval,
            "knockoff-test": cmd_knockoff, "synth": cmd_synth}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    n_jobs = resolve_workers(args.threads)
    try:
        COMMANDS[args.command](args, n_jobs)
    except UsageError as exc:
        print(f"featvec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"featvec: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"featvec: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"featvec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
