"""Command-line entry point for the whole pipeline.

Subcommands: synth, stats, split, build, train, grid, eval, rank,
explain-group.  Every run writes a sidecar manifest with the fully
resolved configuration, and all randomness flows from named seed flags,
so rerunning a command with the same flags rewrites byte-identical
artifacts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from . import corpus as corpus_mod, dataset, evaluation, group, synth, training
from .model import ModelConfig, init_model, load_checkpoint, predict_scores, save_checkpoint
from .training import TrainConfig


def _write_manifest(out_dir, subcommand, args):
    payload = {"subcommand": subcommand, "config": {}}
    for key, value in sorted(vars(args).items()):
        if key == "func":
            continue
        if isinstance(value, tuple):
            value = list(value)
        payload["config"][key] = value
    path = os.path.join(out_dir, f"{subcommand}.manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _load_store(path):
    return corpus_mod.load_features(path)


def cmd_synth(args):
    config = synth.SynthConfig(
        num_users=args.users,
        num_items=args.items,
        num_taste_clusters=args.clusters,
        review_geom_p=args.geom_p,
        max_reviews_per_user=args.max_reviews,
        photos_per_review_min=args.photos_min,
        photos_per_review_max=args.photos_max,
        feature_dim=args.feature_dim,
        cluster_separation=args.separation,
        noise_sigma=args.noise,
        seed=args.seed,
    )
    cps, store, truth = synth.generate(config)
    os.makedirs(args.out, exist_ok=True)
    corpus_mod.write_reviews(cps, os.path.join(args.out, "reviews.tsv"))
    feat_name = "features.elvf" if args.feature_format == "binary" else "features.jsonl"
    corpus_mod.write_features(store, os.path.join(args.out, feat_name), fmt=args.feature_format)
    synth.write_clusters(truth, os.path.join(args.out, "clusters.csv"))
    _write_manifest(args.out, "synth", args)
    print(f"wrote {len(cps.reviews)} reviews, {len(store)} photos to {args.out}")
    return 0


def cmd_stats(args):
    cps = corpus_mod.load_reviews(args.reviews)
    report = corpus_mod.corpus_stats(cps)
    corpus_mod.write_stats(report, args.out)
    _write_manifest(args.out, "stats", args)
    print(f"users={report.num_users} items={report.num_items} "
          f"photos={report.num_photos} reviews={report.num_reviews}")
    return 0


def cmd_split(args):
    cps = dataset.filter_corpus(corpus_mod.load_reviews(args.reviews))
    train, test = dataset.split_holdout(cps, args.seed_split, policy=args.holdout)
    os.makedirs(args.out, exist_ok=True)
    corpus_mod.write_reviews(train, os.path.join(args.out, "train_reviews.tsv"))
    corpus_mod.write_reviews(test, os.path.join(args.out, "test_reviews.tsv"))
    _write_manifest(args.out, "split", args)
    print(f"train: {len(train.reviews)} reviews, test: {len(test.reviews)} reviews")
    return 0


def cmd_build(args):
    train = corpus_mod.load_reviews(args.train_reviews)
    test = corpus_mod.load_reviews(args.test_reviews)
    train_set = dataset.build_train_set(
        train, args.seed_sample,
        negatives_same_item=args.neg_same, negatives_other_item=args.neg_other,
    )
    cases = dataset.build_test_cases(train, test)
    os.makedirs(args.out, exist_ok=True)
    dataset.write_train_set(train_set, os.path.join(args.out, "train_pairs.tsv"))
    dataset.write_test_cases(cases, os.path.join(args.out, "test_cases.tsv"))
    _write_manifest(args.out, "build", args)
    print(f"{len(train_set.pairs)} training pairs, {len(cases)} test cases")
    return 0


def cmd_train(args):
    train_corpus = corpus_mod.load_reviews(args.train_reviews)
    store = _load_store(args.features)
    pairs = dataset.load_train_set(args.pairs)
    user_ids = tuple(sorted(train_corpus.users))
    model_config = ModelConfig(
        num_users=len(user_ids),
        feature_dim=store.dim,
        embed_dim=args.embed_dim,
        hidden_dim=args.hidden_dim,
        dropout_rate=args.dropout,
        seed=args.seed_init,
    )
    train_config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        base_lr=args.lr,
        shuffle_seed=args.seed_shuffle,
        dropout_seed=args.seed_dropout,
    )
    model = init_model(model_config, user_ids=user_ids)
    model, history = training.train(model, pairs, store, train_config)
    os.makedirs(args.out, exist_ok=True)
    save_checkpoint(model, os.path.join(args.out, "model.elvm"))
    training.write_history(history, os.path.join(args.out, "history.csv"))
    _write_manifest(args.out, "train", args)
    print(f"final mean loss {history[-1]['mean_loss']:.6f} after {args.epochs} epochs")
    return 0


def cmd_grid(args):
    train_corpus = corpus_mod.load_reviews(args.train_reviews)
    store = _load_store(args.features)
    grid = tuple(float(x) for x in args.lr_grid.split(","))
    model_config = ModelConfig(
        num_users=1,
        feature_dim=store.dim,
        embed_dim=args.embed_dim,
        hidden_dim=args.hidden_dim,
        dropout_rate=args.dropout,
        seed=args.seed_init,
    )
    train_config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        lr_grid=grid,
        shuffle_seed=args.seed_shuffle,
        dropout_seed=args.seed_dropout,
    )
    best_lr, rows = training.grid_search(
        train_corpus, store, model_config, train_config,
        split_seed=args.seed_split, sample_seed=args.seed_sample,
    )
    os.makedirs(args.out, exist_ok=True)
    training.write_grid_report(rows, os.path.join(args.out, "grid.csv"))
    with open(os.path.join(args.out, "best_lr.json"), "w", encoding="utf-8") as fh:
        json.dump({"best_lr": best_lr}, fh, sort_keys=True)
        fh.write("\n")
    _write_manifest(args.out, "grid", args)
    print(f"best lr: {best_lr!r}")
    return 0


def cmd_eval(args):
    train_corpus = corpus_mod.load_reviews(args.train_reviews)
    store = _load_store(args.features)
    cases = dataset.load_test_cases(args.cases, train=train_corpus)
    if args.method == "elvis":
        if not args.checkpoint:
            raise ValueError("--checkpoint is required with --method elvis")
        model = load_checkpoint(args.checkpoint)
        scorer = evaluation.elvis_scorer(model, store)
    elif args.method == "random":
        scorer = evaluation.random_scorer()
    else:
        scorer = evaluation.centroid_scorer(store)
    repetitions = args.repetitions
    if repetitions is None:
        repetitions = 10 if args.method == "random" else 1
    report = evaluation.evaluate_method(
        scorer, cases,
        filters=evaluation.EvalFilters(args.min_candidates, args.min_user_photos),
        repetitions=repetitions,
        base_seed=args.seed_baseline,
        method=args.method,
        workers=args.workers,
    )
    evaluation.write_report(report, args.out)
    _write_manifest(args.out, "eval", args)
    print(f"{args.method}: {report.case_count} cases, "
          f"top-10 {report.top_n[-1]:.1f}%, median percentile {report.median_percentile:.1f}")
    return 0


def cmd_rank(args):
    model = load_checkpoint(args.checkpoint)
    store = _load_store(args.features)
    cps = corpus_mod.load_reviews(args.reviews)
    photos = sorted(cps.photos_of_item(args.item))
    if not photos:
        raise ValueError(f"item {args.item!r} has no photos in the corpus")
    user_index = model.user_index(args.user)
    scores = predict_scores(model, [(user_index, pid) for pid in photos], store)
    ranked = sorted(zip(photos, scores), key=lambda t: (-t[1], t[0]))
    lines = ["photo_id,score,rank"]
    lines += [f"{pid},{score!r},{i}" for i, (pid, score) in enumerate(ranked, start=1)]
    _emit(lines, args.out, "rank", args)
    return 0


def cmd_explain_group(args):
    model = load_checkpoint(args.checkpoint)
    store = _load_store(args.features)
    cps = corpus_mod.load_reviews(args.reviews)
    spec = args.users
    if spec == "all":
        if model.user_ids is None:
            raise ValueError("checkpoint carries no user table; pass a user file")
        users = list(model.user_ids)
    elif spec.startswith("raters-below:"):
        users = group.users_rating_below(cps, args.item, int(spec.split(":", 1)[1]))
        if not users:
            raise ValueError(f"no users rated item {args.item!r} below the threshold")
    else:
        with open(spec, "r", encoding="utf-8") as fh:
            users = [line.strip() for line in fh if line.strip()]
    ranked = group.cold_start_explain(model, users, args.item, cps, store, args.top)
    lines = ["photo_id,phi,rank"]
    lines += [f"{pid},{phi!r},{i}" for i, (pid, phi) in enumerate(ranked, start=1)]
    _emit(lines, args.out, "explain-group", args)
    return 0


def _emit(lines, out, subcommand, args):
    text = "\n".join(lines) + "\n"
    if out:
        out_dir = os.path.dirname(os.path.abspath(out))
        os.makedirs(out_dir, exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
        _write_manifest(out_dir, subcommand, args)
    else:
        sys.stdout.write(text)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="elvis",
        description="Photo authorship model: data pipeline, training, baselines, evaluation.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus and features")
    p.add_argument("--out", required=True)
    p.add_argument("--users", type=int, default=200)
    p.add_argument("--items", type=int, default=40)
    p.add_argument("--clusters", type=int, default=4)
    p.add_argument("--geom-p", type=float, default=0.45)
    p.add_argument("--max-reviews", type=int, default=12)
    p.add_argument("--photos-min", type=int, default=1)
    p.add_argument("--photos-max", type=int, default=4)
    p.add_argument("--feature-dim", type=int, default=64)
    p.add_argument("--separation", type=float, default=5.0)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--feature-format", choices=("binary", "jsonl"), default="binary")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("stats", help="corpus totals and distributions as CSV")
    p.add_argument("--reviews", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", help="filter the corpus and hold out test reviews")
    p.add_argument("--reviews", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed-split", type=int, default=0)
    p.add_argument("--holdout", choices=("random", "recent"), default="random")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("build", help="build training pairs and test cases")
    p.add_argument("--train-reviews", required=True)
    p.add_argument("--test-reviews", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed-sample", type=int, default=0)
    p.add_argument("--neg-same", type=int, default=10)
    p.add_argument("--neg-other", type=int, default=10)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("train", help="train the authorship model")
    p.add_argument("--train-reviews", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=1024)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--embed-dim", type=int, default=256)
    p.add_argument("--hidden-dim", type=int, default=512)
    p.add_argument("--seed-init", type=int, default=0)
    p.add_argument("--seed-shuffle", type=int, default=0)
    p.add_argument("--seed-dropout", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="learning-rate grid search on a dev split")
    p.add_argument("--train-reviews", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lr-grid", default="5e-3,1e-3,5e-4,1e-4,5e-5")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=1024)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--embed-dim", type=int, default=256)
    p.add_argument("--hidden-dim", type=int, default=512)
    p.add_argument("--seed-split", type=int, default=0)
    p.add_argument("--seed-sample", type=int, default=0)
    p.add_argument("--seed-init", type=int, default=0)
    p.add_argument("--seed-shuffle", type=int, default=0)
    p.add_argument("--seed-dropout", type=int, default=0)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("eval", help="evaluate a method on test cases")
    p.add_argument("--cases", required=True)
    p.add_argument("--train-reviews", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=("elvis", "random", "centroid"), default="elvis")
    p.add_argument("--checkpoint")
    p.add_argument("--repetitions", type=int, default=None,
                   help="default: 10 for random, 1 otherwise")
    p.add_argument("--seed-baseline", type=int, default=0)
    p.add_argument("--min-candidates", type=int, default=10)
    p.add_argument("--min-user-photos", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rank", help="rank an item's photos for one user")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--reviews", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--item", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("explain-group", help="order an item's photos for a user group")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--reviews", required=True)
    p.add_argument("--item", required=True)
    p.add_argument("--users", required=True,
                   help="'all', a path to a user-id file, or 'raters-below:<r>'")
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_explain_group)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
