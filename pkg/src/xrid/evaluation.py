"""CMC computation, identity splits, the k-fold protocol and reporting.

The protocol: identities shared by the two views are shuffled and split
50/50 into train/test, independently for each of the k trials; each
trial trains the metric on the train identities and ranks every test
probe against the test gallery (plus distractors when the manifest has
them), once on raw scores and once after min-max normalization. Rank
rates are averaged over trials.

Ranking tie-break is by gallery index ascending, recorded here for
reproducibility. Multi-shot galleries score a probe by its best-matching
same-label gallery image (set ``single_shot`` to keep only the first
image per gallery identity instead).
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datamodel import CmcResult, FeatureSet, ScoreMatrix, is_distractor_label
from .errors import (
    BadParams,
    ProbeLabelAbsent,
    RankOutOfRange,
    SchemaError,
    TooFewIdentities,
    ValidationError,
)
from .ingest import DatasetManifest, parse_kv_file
from .matcher import score_matrix
from .normalize import minmax_normalize
from .synth import gallery_score_bias
from .xqda import RPolicy, build_difference_sets, parse_r_policy, solve_xqda

REPORT_RANKS = (1, 5, 10, 15, 20)
ARM_WITHOUT = "without_normalization"
ARM_WITH = "with_normalization"


@dataclass(frozen=True)
class SplitPlan:
    """k train/test identity splits; each fold's sets are disjoint."""

    folds: tuple
    seed: int
    k: int

    def __post_init__(self):
        if len(self.folds) != self.k:
            raise ValidationError("fold_count", f"{len(self.folds)} folds, k={self.k}")
        sizes = set()
        for train, test in self.folds:
            if set(train) & set(test):
                raise ValidationError("disjoint_split", "train and test identities overlap")
            sizes.add(len(test))
        if sizes and max(sizes) - min(sizes) > 1:
            raise ValidationError("equal_test_sizes", f"test sizes vary too much: {sorted(sizes)}")


def _sorted_distinct(labels) -> list:
    distinct = list(dict.fromkeys(labels))
    try:
        return sorted(distinct)
    except TypeError:
        return sorted(distinct, key=lambda lab: (type(lab).__name__, str(lab)))


def make_splits(labels, k: int, seed: int) -> SplitPlan:
    """k independent 50/50 train/test identity splits (fresh shuffle each).

    Deterministic given the label set, k and seed; for an odd identity
    count the test side gets the extra one.
    """
    if k < 2:
        raise BadParams(f"k must be >= 2, got {k}")
    distinct = _sorted_distinct(labels)
    if len(distinct) < k:
        raise TooFewIdentities(f"{len(distinct)} identities < k={k}")
    rng = np.random.default_rng(seed)
    half = len(distinct) // 2
    folds = []
    for _ in range(k):
        order = rng.permutation(len(distinct))
        train = tuple(distinct[i] for i in order[:half])
        test = tuple(distinct[i] for i in order[half:])
        folds.append((train, test))
    return SplitPlan(folds=tuple(folds), seed=seed, k=k)


def cmc(scores: ScoreMatrix, max_rank: int) -> CmcResult:
    """Cumulative matching characteristic at ranks 1..max_rank.

    Gallery candidates are sorted best-first by score (ascending when
    smaller is better); a probe's rank is the 1-based position of the
    first same-label candidate.
    """
    p, g = scores.p, scores.g
    if p < 1:
        raise BadParams("CMC needs at least one probe")
    if not (1 <= max_rank <= g):
        raise RankOutOfRange(f"max_rank={max_rank} outside [1, gallery size {g}]")
    gallery_set = set(scores.gallery_labels)
    for lab in scores.probe_labels:
        if not is_distractor_label(lab) and lab not in gallery_set:
            raise ProbeLabelAbsent(lab)
    keys = scores.values if scores.polarity == "smaller_better" else -scores.values
    indices = np.argsort(keys, axis=1, kind="stable")
    matches = scores.gallery_labels[indices] == scores.probe_labels[:, None]
    # Distractor-labeled probes are allowed to have no match; they simply
    # never land a hit at any rank.
    has_match = matches.any(axis=1)
    first_hit = matches.argmax(axis=1)[has_match]
    curve = np.cumsum(np.bincount(first_hit, minlength=g))[:max_rank] / p
    return CmcResult.from_folds([curve])


def concat_gallery(gallery: FeatureSet, extra: FeatureSet) -> FeatureSet:
    """Append extra samples (e.g. distractors) to a gallery view."""
    if gallery.dim != extra.dim:
        raise ValidationError("same_dimension", f"{gallery.dim} vs {extra.dim}")
    return FeatureSet(
        view_id=gallery.view_id,
        dim=gallery.dim,
        vectors=np.hstack([gallery.vectors, extra.vectors]),
        labels=np.concatenate([np.asarray(gallery.labels, dtype=object),
                               np.asarray(extra.labels, dtype=object)]),
    )


def first_shot(fs: FeatureSet) -> FeatureSet:
    """Keep the first image of each identity (single-gallery-shot reduction)."""
    seen = set()
    keep = []
    for j, lab in enumerate(fs.labels):
        if lab not in seen:
            seen.add(lab)
            keep.append(j)
    return FeatureSet(fs.view_id, fs.dim, fs.vectors[:, keep], fs.labels[keep])


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a full evaluation run depends on, seeds included."""

    k: int = 10
    seed: int = 0
    ridge: float | None = None
    r_policy: str = "threshold:1"
    negatives_per_positive: int = 1
    normalization_axis: str = "per_gallery_column"
    invert_quotient: bool = False
    probe_view: str | None = None
    gallery_view: str | None = None
    max_rank: int = 20
    column_bias: float = 0.0
    single_shot: bool = False
    threads: int = 0

    def policy(self) -> RPolicy:
        return parse_r_policy(self.r_policy)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_kv(parse_kv_file(path), source=str(path))

    @classmethod
    def from_kv(cls, kv: dict, source: str = "<config>") -> "ExperimentConfig":
        def to_bool(text: str) -> bool:
            t = text.strip().lower()
            if t in ("1", "true", "yes", "on"):
                return True
            if t in ("0", "false", "no", "off"):
                return False
            raise SchemaError(f"{source}: boolean expected, got {text!r}")

        kv = dict(kv)
        kwargs = {}
        try:
            for key, conv in (
                ("k", int), ("seed", int), ("negatives_per_positive", int),
                ("max_rank", int), ("threads", int), ("column_bias", float),
            ):
                if key in kv:
                    kwargs[key] = conv(kv.pop(key))
            if "ridge" in kv:
                raw = kv.pop("ridge").strip().lower()
                kwargs["ridge"] = None if raw in ("", "auto") else float(raw)
        except ValueError as exc:
            raise SchemaError(f"{source}: {exc}") from None
        for key in ("r_policy", "normalization_axis", "probe_view", "gallery_view"):
            if key in kv:
                kwargs[key] = kv.pop(key)
        for key in ("invert_quotient", "single_shot"):
            if key in kv:
                kwargs[key] = to_bool(kv.pop(key))
        if kv:
            raise SchemaError(f"{source}: unknown config keys {sorted(kv)}")
        cfg = cls(**kwargs)
        cfg.policy()  # fail fast on unparseable policies
        return cfg

    def to_text(self) -> str:
        lines = [
            f"k={self.k}",
            f"seed={self.seed}",
            f"ridge={'auto' if self.ridge is None else format(self.ridge, '.17g')}",
            f"r_policy={self.r_policy}",
            f"negatives_per_positive={self.negatives_per_positive}",
            f"normalization_axis={self.normalization_axis}",
            f"invert_quotient={str(self.invert_quotient).lower()}",
            f"max_rank={self.max_rank}",
            f"column_bias={self.column_bias:.17g}",
            f"single_shot={str(self.single_shot).lower()}",
            f"threads={self.threads}",
        ]
        if self.probe_view is not None:
            lines.append(f"probe_view={self.probe_view}")
        if self.gallery_view is not None:
            lines.append(f"gallery_view={self.gallery_view}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ExperimentReport:
    """Aggregated CMC curves for both arms plus run provenance."""

    dataset: str
    config: ExperimentConfig
    arms: dict
    retained_r: tuple
    probe_view: str
    gallery_view: str

    def report_ranks(self) -> list[int]:
        return [r for r in REPORT_RANKS if r <= self.config.max_rank]

    def to_text(self) -> str:
        ranks = self.report_ranks()
        out = io.StringIO()
        out.write(f"Dataset: {self.dataset}\n")
        out.write(
            f"Folds: {self.config.k}   Probe view: {self.probe_view}   "
            f"Gallery view: {self.gallery_view}   Seed: {self.config.seed}\n"
        )
        out.write(
            f"Normalization axis: {self.config.normalization_axis}   "
            f"r per fold: {list(self.retained_r)}\n\n"
        )
        header = "Normalization".ljust(16) + "".join(f"Rank-{r}".rjust(10) for r in ranks)
        out.write(header + "\n")
        for arm, label in ((ARM_WITHOUT, "Without"), (ARM_WITH, "With")):
            curve = self.arms[arm].ranks
            row = label.ljust(16) + "".join(f"{100 * curve[r - 1]:.2f}%".rjust(10) for r in ranks)
            out.write(row + "\n")
        return out.getvalue()

    def report_csv(self) -> str:
        ranks = self.report_ranks()
        lines = ["normalization," + ",".join(f"rank_{r}" for r in ranks)]
        for arm, label in ((ARM_WITHOUT, "without"), (ARM_WITH, "with")):
            curve = self.arms[arm].ranks
            lines.append(label + "," + ",".join(f"{curve[r - 1]:.17g}" for r in ranks))
        return "\n".join(lines) + "\n"

    def curve_csv(self) -> str:
        lines = ["arm,rank,rate"]
        for arm, label in ((ARM_WITHOUT, "without"), (ARM_WITH, "with")):
            for r, rate in enumerate(self.arms[arm].ranks, start=1):
                lines.append(f"{label},{r},{rate:.17g}")
        return "\n".join(lines) + "\n"

    def folds_csv(self) -> str:
        lines = ["arm,fold,rank,rate"]
        for arm, label in ((ARM_WITHOUT, "without"), (ARM_WITH, "with")):
            for i, fold in enumerate(self.arms[arm].folds):
                for r, rate in enumerate(fold, start=1):
                    lines.append(f"{label},{i},{r},{rate:.17g}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.txt").write_text(self.to_text(), encoding="utf-8")
        (out_dir / "report.csv").write_text(self.report_csv(), encoding="utf-8")
        (out_dir / "cmc_curve.csv").write_text(self.curve_csv(), encoding="utf-8")
        (out_dir / "folds.csv").write_text(self.folds_csv(), encoding="utf-8")


def _with_column_bias(scores: ScoreMatrix, magnitude: float, seed: int) -> ScoreMatrix:
    offsets = gallery_score_bias(scores.g, magnitude, seed)
    return ScoreMatrix(
        values=scores.values + offsets[None, :],
        probe_labels=scores.probe_labels,
        gallery_labels=scores.gallery_labels,
        polarity=scores.polarity,
        normalization="none",
    )


def run_experiment(manifest: DatasetManifest, config: ExperimentConfig) -> ExperimentReport:
    """Run the full k-fold protocol and aggregate both arms."""
    probe_view = config.probe_view or manifest.views[0][0]
    gallery_view = config.gallery_view or manifest.views[1][0]
    probes_all = manifest.load_view(probe_view)
    gallery_all = manifest.load_view(gallery_view)
    distractors = manifest.load_distractors()

    shared = [
        lab for lab in _sorted_distinct(probes_all.labels)
        if not is_distractor_label(lab) and lab in set(gallery_all.labels)
    ]
    plan = make_splits(shared, config.k, config.seed)
    fold_seeds = np.random.SeedSequence(config.seed).generate_state(2 * config.k)

    curves_raw, curves_norm, retained = [], [], []
    for i, (train, test) in enumerate(plan.folds):
        diffs = build_difference_sets(
            probes_all.restrict(train),
            gallery_all.restrict(train),
            negatives_per_positive=config.negatives_per_positive,
            seed=int(fold_seeds[2 * i]),
        )
        model = solve_xqda(
            diffs,
            ridge=config.ridge,
            r_policy=config.policy(),
            invert_quotient=config.invert_quotient,
        )
        retained.append(model.r)
        probes = probes_all.restrict(test)
        gallery = gallery_all.restrict(test)
        if config.single_shot:
            gallery = first_shot(gallery)
        if distractors is not None:
            gallery = concat_gallery(gallery, distractors)
        raw = score_matrix(model, probes, gallery, threads=config.threads)
        if config.column_bias > 0:
            raw = _with_column_bias(raw, config.column_bias, int(fold_seeds[2 * i + 1]))
        curves_raw.append(cmc(raw, config.max_rank).ranks)
        normalized = minmax_normalize(raw, config.normalization_axis)
        curves_norm.append(cmc(normalized, config.max_rank).ranks)

    return ExperimentReport(
        dataset=manifest.name,
        config=config,
        arms={
            ARM_WITHOUT: CmcResult.from_folds(curves_raw),
            ARM_WITH: CmcResult.from_folds(curves_norm),
        },
        retained_r=tuple(retained),
        probe_view=probe_view,
        gallery_view=gallery_view,
    )
