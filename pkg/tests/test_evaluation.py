import numpy as np
import pytest

from xrid.datamodel import FeatureSet, ScoreMatrix
from xrid.errors import (
    BadParams,
    ProbeLabelAbsent,
    RankOutOfRange,
    SchemaError,
    TooFewIdentities,
)
from xrid.evaluation import (
    ARM_WITH,
    ARM_WITHOUT,
    ExperimentConfig,
    cmc,
    concat_gallery,
    first_shot,
    make_splits,
    run_experiment,
)
from xrid.ingest import DatasetManifest, save_feature_set, save_manifest, load_manifest
from xrid.synth import gen_cross_view, gen_distractors
from conftest import brute_force_cmc


def scores_of(values, probe_labels, gallery_labels, polarity="smaller_better") -> ScoreMatrix:
    return ScoreMatrix(values=np.asarray(values, dtype=np.float64),
                       probe_labels=probe_labels, gallery_labels=gallery_labels,
                       polarity=polarity)


class TestMakeSplits:
    def test_four_labels_two_folds(self):
        plan = make_splits(["a", "b", "c", "d"], k=2, seed=0)
        assert plan.k == 2
        for train, test in plan.folds:
            assert len(train) == 2 and len(test) == 2
            assert set(train).isdisjoint(test)
            assert set(train) | set(test) == {"a", "b", "c", "d"}

    def test_viper_shape(self):
        labels = [f"id{i}" for i in range(632)]
        plan = make_splits(labels, k=10, seed=0)
        assert plan.k == 10
        for train, test in plan.folds:
            assert len(train) == 316 and len(test) == 316

    def test_deterministic(self):
        labels = [f"id{i}" for i in range(50)]
        assert make_splits(labels, 5, 3) == make_splits(labels, 5, 3)
        assert make_splits(labels, 5, 3) != make_splits(labels, 5, 4)

    def test_order_insensitive(self):
        labels = [f"id{i}" for i in range(20)]
        shuffled = list(reversed(labels))
        assert make_splits(labels, 4, 1) == make_splits(shuffled, 4, 1)

    def test_too_few_identities(self):
        with pytest.raises(TooFewIdentities):
            make_splits(["a", "b"], k=3, seed=0)

    def test_k_must_be_at_least_two(self):
        with pytest.raises(BadParams):
            make_splits(["a", "b", "c"], k=1, seed=0)

    def test_odd_count_test_gets_extra(self):
        plan = make_splits([f"id{i}" for i in range(7)], k=2, seed=0)
        for train, test in plan.folds:
            assert len(train) == 3 and len(test) == 4


class TestCmc:
    def test_single_probe_match_first(self):
        res = cmc(scores_of([[0.1, 0.9]], ["x"], ["x", "y"]), max_rank=2)
        assert res.ranks.tolist() == [1.0, 1.0]

    def test_two_probes_one_matches_second(self):
        values = [[0.1, 0.5], [0.4, 0.2]]
        # probe q matches gallery position 2 only on the second try
        res = cmc(scores_of(values, ["x", "x"], ["x", "y"]), max_rank=2)
        assert res.ranks.tolist() == [0.5, 1.0]

    def test_matches_brute_force_on_random_single_match(self, rng):
        for _ in range(5):
            g = 30
            perm = rng.permutation(g)
            gallery_labels = [f"id{j}" for j in range(g)]
            probe_labels = [f"id{j}" for j in perm]
            values = rng.standard_normal((g, g))
            scores = scores_of(values, probe_labels, gallery_labels)
            ours = cmc(scores, max_rank=g).ranks
            brute = brute_force_cmc(scores, max_rank=g)
            assert np.array_equal(ours, brute)
            assert np.all(np.diff(ours) >= 0)
            assert ours[-1] == 1.0  # every probe has its match somewhere

    def test_larger_better_polarity(self):
        res = cmc(scores_of([[0.9, 0.1]], ["x"], ["x", "y"], polarity="larger_better"), 2)
        assert res.ranks.tolist() == [1.0, 1.0]

    def test_tie_broken_by_gallery_index(self):
        # equal scores: the lower gallery index wins
        res = cmc(scores_of([[0.5, 0.5]], ["x"], ["y", "x"]), max_rank=2)
        assert res.ranks.tolist() == [0.0, 1.0]

    def test_probe_label_absent(self):
        with pytest.raises(ProbeLabelAbsent):
            cmc(scores_of([[0.1, 0.2]], ["z"], ["x", "y"]), max_rank=1)

    def test_distractor_probes_exempt_from_presence_check(self):
        scores = scores_of([[0.1, 0.2], [0.3, 0.1]], ["x", "__distractor_0"], ["x", "y"])
        res = cmc(scores, max_rank=2)
        assert res.ranks[-1] == 0.5  # the distractor probe never matches

    def test_max_rank_bounds(self):
        scores = scores_of([[0.1, 0.2]], ["x"], ["x", "y"])
        with pytest.raises(RankOutOfRange):
            cmc(scores, max_rank=3)
        with pytest.raises(RankOutOfRange):
            cmc(scores, max_rank=0)

    def test_full_rank_rate_is_one_with_unique_gallery(self, rng):
        g = 12
        gallery_labels = [f"id{j}" for j in range(g)]
        probe_labels = [f"id{j}" for j in rng.permutation(g)]
        scores = scores_of(rng.standard_normal((g, g)), probe_labels, gallery_labels)
        assert cmc(scores, max_rank=g).ranks[-1] == 1.0


class TestGalleryHelpers:
    def test_concat_gallery(self, rng):
        a = FeatureSet("g", 3, rng.standard_normal((3, 2)), ["x", "y"])
        d = gen_distractors(4, 3, seed=0)
        merged = concat_gallery(a, d)
        assert merged.m == 6
        assert list(merged.labels[:2]) == ["x", "y"]

    def test_first_shot(self, rng):
        fs = FeatureSet("g", 2, rng.standard_normal((2, 5)), ["x", "x", "y", "x", "y"])
        out = first_shot(fs)
        assert list(out.labels) == ["x", "y"]
        assert np.array_equal(out.vectors[:, 0], fs.vectors[:, 0])
        assert np.array_equal(out.vectors[:, 1], fs.vectors[:, 2])


def write_synth_manifest(tmp_path, n_ids=40, dim=8, images=1, noise=0.0, seed=0,
                         distractors=0, fmt="binary"):
    a, b = gen_cross_view(n_ids, dim, images_per_view=images, view_noise=noise,
                          identity_spread=1.0, seed=seed)
    save_feature_set(a, tmp_path / "a.bin", format=fmt)
    save_feature_set(b, tmp_path / "b.bin", format=fmt)
    distractor_file = None
    if distractors:
        dfs = gen_distractors(distractors, dim, view_noise=noise, seed=seed + 1)
        distractor_file = tmp_path / "extra.bin"
        save_feature_set(dfs, distractor_file, format=fmt)
    manifest = DatasetManifest(
        name="synthetic", views=(("a", tmp_path / "a.bin"), ("b", tmp_path / "b.bin")),
        expected_dim=dim, distractor_file=distractor_file,
    )
    path = tmp_path / "manifest.txt"
    save_manifest(manifest, path)
    return load_manifest(path)


class TestRunExperiment:
    def test_row_axis_normalization_is_rank_invariant(self, tmp_path):
        manifest = write_synth_manifest(tmp_path, n_ids=30, noise=0.3)
        config = ExperimentConfig(k=3, seed=1, invert_quotient=True, max_rank=8,
                                  normalization_axis="per_probe_row")
        report = run_experiment(manifest, config)
        assert np.array_equal(report.arms[ARM_WITHOUT].folds, report.arms[ARM_WITH].folds)

    def test_deterministic_reports(self, tmp_path):
        manifest = write_synth_manifest(tmp_path, n_ids=24, noise=0.2)
        config = ExperimentConfig(k=3, seed=5, invert_quotient=True, max_rank=6)
        r1 = run_experiment(manifest, config)
        r2 = run_experiment(manifest, config)
        assert r1.report_csv() == r2.report_csv()
        assert r1.curve_csv() == r2.curve_csv()
        assert r1.folds_csv() == r2.folds_csv()
        assert r1.to_text() == r2.to_text()

    def test_column_bias_hurts_and_normalization_recovers(self, tmp_path):
        manifest = write_synth_manifest(tmp_path, n_ids=40, dim=8, noise=0.1, seed=2)
        clean_cfg = ExperimentConfig(k=3, seed=2, invert_quotient=True, max_rank=5)
        clean = run_experiment(manifest, clean_cfg)
        biased_cfg = ExperimentConfig(k=3, seed=2, invert_quotient=True, max_rank=5,
                                      column_bias=1e4)
        biased = run_experiment(manifest, biased_cfg)
        rank1_clean = clean.arms[ARM_WITHOUT].ranks[0]
        rank1_biased = biased.arms[ARM_WITHOUT].ranks[0]
        rank1_restored = biased.arms[ARM_WITH].ranks[0]
        assert rank1_biased < rank1_clean
        assert rank1_restored > rank1_biased  # strictly better than the biased arm
        assert abs(rank1_restored - clean.arms[ARM_WITH].ranks[0]) < 1e-12

    def test_distractors_extend_gallery(self, tmp_path):
        manifest = write_synth_manifest(tmp_path, n_ids=20, noise=0.1, distractors=15)
        report = run_experiment(manifest, ExperimentConfig(k=2, seed=0, max_rank=5,
                                                           invert_quotient=True))
        assert report.arms[ARM_WITHOUT].ranks.shape == (5,)

    def test_distractor_padding_never_raises_rates(self, tmp_path):
        (tmp_path / "with").mkdir()
        (tmp_path / "without").mkdir()
        man_with = write_synth_manifest(tmp_path / "with", n_ids=24, dim=8, noise=0.6,
                                        seed=7, distractors=50)
        man_without = write_synth_manifest(tmp_path / "without", n_ids=24, dim=8,
                                           noise=0.6, seed=7)
        cfg = ExperimentConfig(k=3, seed=7, invert_quotient=True, max_rank=8)
        padded = run_experiment(man_with, cfg)
        plain = run_experiment(man_without, cfg)
        for arm in (ARM_WITHOUT, ARM_WITH):
            assert np.all(padded.arms[arm].folds <= plain.arms[arm].folds + 1e-15)

    def test_single_shot_reduces_gallery(self, tmp_path):
        manifest = write_synth_manifest(tmp_path, n_ids=16, images=3, noise=0.2)
        multi = run_experiment(manifest, ExperimentConfig(k=2, seed=0, max_rank=4,
                                                          invert_quotient=True))
        single = run_experiment(manifest, ExperimentConfig(k=2, seed=0, max_rank=4,
                                                           invert_quotient=True,
                                                           single_shot=True))
        # both runs complete and report full curves; single-shot galleries
        # are smaller so rates generally differ
        assert multi.arms[ARM_WITHOUT].ranks.shape == single.arms[ARM_WITHOUT].ranks.shape

    def test_report_artifacts_written(self, tmp_path):
        manifest = write_synth_manifest(tmp_path, n_ids=16, noise=0.1)
        report = run_experiment(manifest, ExperimentConfig(k=2, seed=0, max_rank=5,
                                                           invert_quotient=True))
        out = tmp_path / "out"
        report.write(out)
        for name in ("report.txt", "report.csv", "cmc_curve.csv", "folds.csv"):
            assert (out / name).is_file()
        text = (out / "report.txt").read_text()
        assert "Rank-1" in text and "Without" in text and "With" in text
        header = (out / "report.csv").read_text().splitlines()[0]
        assert header == "normalization,rank_1,rank_5"


class TestExperimentConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.k == 10 and cfg.max_rank == 20
        assert cfg.normalization_axis == "per_gallery_column"
        assert cfg.ridge is None

    def test_file_round_trip(self, tmp_path):
        cfg = ExperimentConfig(k=5, seed=9, ridge=0.01, r_policy="fixed:4",
                               invert_quotient=True, column_bias=2.5)
        path = tmp_path / "config.txt"
        path.write_text(cfg.to_text())
        back = ExperimentConfig.from_file(path)
        assert back == cfg

    def test_auto_ridge_spelling(self, tmp_path):
        path = tmp_path / "config.txt"
        path.write_text("ridge=auto\nk=3\n")
        assert ExperimentConfig.from_file(path).ridge is None

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "config.txt"
        path.write_text("k=3\nmystery=1\n")
        with pytest.raises(SchemaError):
            ExperimentConfig.from_file(path)

    def test_bad_value_rejected(self, tmp_path):
        path = tmp_path / "config.txt"
        path.write_text("k=three\n")
        with pytest.raises(SchemaError):
            ExperimentConfig.from_file(path)

    def test_bad_policy_rejected(self, tmp_path):
        path = tmp_path / "config.txt"
        path.write_text("r_policy=zigzag\n")
        with pytest.raises(Exception):
            ExperimentConfig.from_file(path)
