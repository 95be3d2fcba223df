"""Command-line entry point: synth, train, match, eval, inspect.

Exit codes: 0 success, 1 domain error, 2 usage error (argparse).
Config precedence: CLI flag > config file > built-in default.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import evaluation, ingest, matcher, normalize, synth, xqda
from .errors import XridError


def _config_from(args) -> evaluation.ExperimentConfig:
    kv = ingest.parse_kv_file(args.config) if args.config else {}
    overrides = {
        "k": args.k,
        "seed": args.seed,
        "ridge": args.ridge,
        "r_policy": args.r_policy,
        "negatives_per_positive": args.negatives_per_positive,
        "normalization_axis": getattr(args, "axis", None),
        "invert_quotient": args.invert_quotient,
        "probe_view": args.probe_view,
        "gallery_view": args.gallery_view,
        "max_rank": getattr(args, "max_rank", None),
        "column_bias": getattr(args, "column_bias", None),
        "single_shot": getattr(args, "single_shot", None),
        "threads": args.threads,
    }
    for key, val in overrides.items():
        if val is not None:
            kv[key] = str(val)
    return evaluation.ExperimentConfig.from_kv(kv, source="<cli>")


def _add_config_flags(sp, with_eval_flags: bool = False) -> None:
    sp.add_argument("--config", type=Path, help="experiment config file (key=value lines)")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--ridge", default=None, help="ridge value or 'auto'")
    sp.add_argument("--r-policy", dest="r_policy", default=None,
                    help="'threshold:<tau>' or 'fixed:<r>'")
    sp.add_argument("--negatives-per-positive", dest="negatives_per_positive",
                    type=int, default=None)
    sp.add_argument("--invert-quotient", dest="invert_quotient", action="store_const",
                    const="true", default=None,
                    help="solve the conventional discriminative orientation")
    sp.add_argument("--probe-view", dest="probe_view", default=None)
    sp.add_argument("--gallery-view", dest="gallery_view", default=None)
    sp.add_argument("--threads", type=int, default=None, help="0 = one per CPU")
    if with_eval_flags:
        sp.add_argument("--k", type=int, default=None, help="fold count")
        sp.add_argument("--axis", default=None,
                        choices=["per_probe_row", "per_gallery_column", "two_sided"])
        sp.add_argument("--max-rank", dest="max_rank", type=int, default=None)
        sp.add_argument("--column-bias", dest="column_bias", type=float, default=None)
        sp.add_argument("--single-shot", dest="single_shot", action="store_const",
                        const="true", default=None)
    else:
        sp.set_defaults(k=None, max_rank=None, column_bias=None, single_shot=None)


def cmd_synth(args) -> int:
    view_a, view_b = synth.gen_cross_view(
        n_ids=args.ids,
        dim=args.dim,
        images_per_view=args.images,
        view_noise=args.noise,
        identity_spread=args.spread,
        column_bias=args.column_bias,
        seed=args.seed,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ext = "csv" if args.format == "csv" else "bin"
    path_a, path_b = out / f"view_a.{ext}", out / f"view_b.{ext}"
    ingest.save_feature_set(view_a, path_a, format=args.format)
    ingest.save_feature_set(view_b, path_b, format=args.format)
    views = [("a", path_a), ("b", path_b)]
    distractor_file = None
    if args.distractors > 0:
        dis = synth.gen_distractors(
            args.distractors, args.dim, identity_spread=args.spread,
            view_noise=args.noise, seed=args.seed + 1,
        )
        distractor_file = out / f"distractors.{ext}"
        ingest.save_feature_set(dis, distractor_file, format=args.format)
    manifest = ingest.DatasetManifest(
        name=args.name, views=tuple(views), expected_dim=args.dim,
        distractor_file=distractor_file,
        notes=f"synthetic seed={args.seed} noise={args.noise:g} spread={args.spread:g}",
    )
    ingest.save_manifest(manifest, out / "manifest.txt")
    print(f"wrote {out / 'manifest.txt'} ({args.ids} ids, dim {args.dim}, "
          f"{view_a.m} images per view)")
    return 0


def cmd_train(args) -> int:
    config = _config_from(args)
    manifest = ingest.load_manifest(args.manifest)
    probe_view = config.probe_view or manifest.views[0][0]
    gallery_view = config.gallery_view or manifest.views[1][0]
    view_a = manifest.load_view(probe_view)
    view_b = manifest.load_view(gallery_view)
    diffs = xqda.build_difference_sets(
        view_a, view_b,
        negatives_per_positive=config.negatives_per_positive,
        seed=config.seed,
    )
    model = xqda.solve_xqda(
        diffs, ridge=config.ridge, r_policy=config.policy(),
        invert_quotient=config.invert_quotient,
    )
    xqda.save_model(model, args.out)
    top = ", ".join(f"{v:.6g}" for v in model.eigenvalues[:5])
    print(f"d={model.d} r={model.r} ridge={model.ridge:.6g}")
    print(f"top eigenvalues: {top}")
    print(f"model written to {args.out}")
    return 0


def cmd_match(args) -> int:
    model = xqda.load_model(args.model)
    probes = ingest.load_feature_set(args.probes, expected_dim=model.d)
    gallery = ingest.load_feature_set(args.gallery, expected_dim=model.d)
    scores = matcher.score_matrix(model, probes, gallery, threads=args.threads or 0)
    if args.axis:
        scores = normalize.minmax_normalize(scores, args.axis)
    order = np.argsort(
        scores.values if scores.polarity == "smaller_better" else -scores.values,
        axis=1, kind="stable",
    )
    top = min(args.top, scores.g)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("probe_label,rank,gallery_label,score\n")
        for i in range(scores.p):
            for rank in range(top):
                j = order[i, rank]
                fh.write(f"{scores.probe_labels[i]},{rank + 1},"
                         f"{scores.gallery_labels[j]},{scores.values[i, j]:.17g}\n")
    matrix_out = Path(args.matrix_out) if args.matrix_out else Path(str(args.out) + ".matrix.csv")
    if matrix_out.suffix == ".csv":
        matcher.save_scores_csv(scores, matrix_out)
    else:
        matcher.save_scores_binary(scores, matrix_out)
    print(f"ranked {scores.p} probes against {scores.g} gallery samples")
    print(f"results: {args.out}; matrix: {matrix_out}")
    return 0


def cmd_eval(args) -> int:
    config = _config_from(args)
    manifest = ingest.load_manifest(args.manifest)
    report = evaluation.run_experiment(manifest, config)
    report.write(args.out_dir)
    print(report.to_text(), end="")
    print(f"artifacts written to {args.out_dir}")
    return 0


def cmd_inspect(args) -> int:
    path = Path(args.path)
    if not path.is_file():
        raise XridError(f"file not found: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == xqda.MODEL_MAGIC:
        model = xqda.load_model(path)
        eigs = ", ".join(f"{v:.6g}" for v in model.eigenvalues[:5])
        print(f"model file: d={model.d} r={model.r} ridge={model.ridge:.6g}")
        print(f"top eigenvalues: {eigs}")
    elif magic == matcher.SCORE_MAGIC:
        scores = matcher.load_scores_binary(path)
        print(f"score file: {scores.p} probes x {scores.g} gallery, "
              f"polarity={scores.polarity}, normalization={scores.normalization}")
    else:
        dim, count = ingest.read_feature_header(path)
        kind = "binary" if magic == ingest.MAGIC else "csv"
        print(f"feature file ({kind}): dim={dim} count={count}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xrid",
        description="Cross-view re-identification metric learning toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic cross-view dataset")
    sp.add_argument("--out-dir", required=True, type=Path)
    sp.add_argument("--ids", type=int, default=synth.DEFAULT_IDS)
    sp.add_argument("--dim", type=int, default=synth.DEFAULT_DIM)
    sp.add_argument("--images", type=int, default=1, help="images per identity per view")
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--spread", type=float, default=1.0)
    sp.add_argument("--column-bias", dest="column_bias", type=float, default=0.0)
    sp.add_argument("--distractors", type=int, default=0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=["csv", "binary"], default="binary")
    sp.add_argument("--name", default="synthetic")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="learn a model from a manifest")
    sp.add_argument("--manifest", required=True, type=Path)
    sp.add_argument("--out", required=True, type=Path, help="model output path")
    _add_config_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("match", help="rank a gallery for each probe")
    sp.add_argument("--model", required=True, type=Path)
    sp.add_argument("--probes", required=True, type=Path)
    sp.add_argument("--gallery", required=True, type=Path)
    sp.add_argument("--out", required=True, type=Path)
    sp.add_argument("--matrix-out", dest="matrix_out", type=Path, default=None,
                    help="score matrix export (.csv or binary)")
    sp.add_argument("--axis", default=None,
                    choices=["per_probe_row", "per_gallery_column", "two_sided"])
    sp.add_argument("--top", type=int, default=10)
    sp.add_argument("--threads", type=int, default=0)
    sp.set_defaults(func=cmd_match)

    sp = sub.add_parser("eval", help="run the k-fold evaluation protocol")
    sp.add_argument("--manifest", required=True, type=Path)
    sp.add_argument("--out-dir", required=True, type=Path)
    _add_config_flags(sp, with_eval_flags=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("inspect", help="print a file's header information")
    sp.add_argument("path", type=Path)
    sp.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except XridError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
