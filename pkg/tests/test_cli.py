import pytest

from xrid.cli import main
from xrid.ingest import load_manifest
from xrid.matcher import load_scores_binary
from xrid.xqda import load_model


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


def make_dataset(tmp_path, ids=24, dim=8, noise=0.0, distractors=0, seed=0):
    out = tmp_path / "data"
    code = run_cli(
        "synth", "--out-dir", out, "--ids", ids, "--dim", dim,
        "--noise", noise, "--seed", seed, "--distractors", distractors,
    )
    assert code == 0
    return out / "manifest.txt"


def test_synth_writes_loadable_dataset(tmp_path, capsys):
    manifest_path = make_dataset(tmp_path, distractors=5)
    manifest = load_manifest(manifest_path)
    assert len(manifest.views) == 2
    assert manifest.distractor_file is not None
    assert "manifest.txt" in capsys.readouterr().out


def test_train_writes_model_and_prints_summary(tmp_path, capsys):
    manifest_path = make_dataset(tmp_path)
    model_path = tmp_path / "model.bin"
    code = run_cli("train", "--manifest", manifest_path, "--out", model_path,
                   "--invert-quotient")
    assert code == 0
    out = capsys.readouterr().out
    assert "d=8" in out and "r=" in out and "ridge=" in out
    assert "top eigenvalues" in out
    model = load_model(model_path)
    assert model.d == 8 and model.r >= 1


def test_train_deterministic_byte_identical(tmp_path):
    manifest_path = make_dataset(tmp_path)
    m1, m2 = tmp_path / "m1.bin", tmp_path / "m2.bin"
    assert run_cli("train", "--manifest", manifest_path, "--out", m1) == 0
    assert run_cli("train", "--manifest", manifest_path, "--out", m2) == 0
    assert m1.read_bytes() == m2.read_bytes()


def test_train_dim_mismatch_exit_code(tmp_path, capsys):
    manifest_path = make_dataset(tmp_path, dim=8)
    # sabotage: point manifest at a file with another dimension
    other = make_dataset(tmp_path / "other", dim=6)
    text = manifest_path.read_text().replace("view.b=view_b.bin",
                                             f"view.b={other.parent / 'view_b.bin'}")
    manifest_path.write_text(text)
    code = run_cli("train", "--manifest", manifest_path, "--out", tmp_path / "m.bin")
    assert code == 1
    assert "DimMismatch" in capsys.readouterr().err


def test_match_outputs_rankings_and_matrix(tmp_path, capsys):
    manifest_path = make_dataset(tmp_path)
    data = manifest_path.parent
    model_path = tmp_path / "model.bin"
    run_cli("train", "--manifest", manifest_path, "--out", model_path,
            "--invert-quotient")
    out = tmp_path / "ranked.csv"
    code = run_cli(
        "match", "--model", model_path, "--probes", data / "view_a.bin",
        "--gallery", data / "view_b.bin", "--out", out,
        "--matrix-out", tmp_path / "scores.bin", "--top", 3,
    )
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "probe_label,rank,gallery_label,score"
    assert len(lines) == 1 + 24 * 3
    scores = load_scores_binary(tmp_path / "scores.bin")
    assert scores.p == 24 and scores.g == 24
    # zero noise, conventional orientation: rank 1 is the right identity
    top = [line.split(",") for line in lines[1:] if line.split(",")[1] == "1"]
    hits = sum(row[0] == row[2] for row in top)
    assert hits == 24


def test_match_with_normalization_axis(tmp_path):
    manifest_path = make_dataset(tmp_path)
    data = manifest_path.parent
    model_path = tmp_path / "model.bin"
    run_cli("train", "--manifest", manifest_path, "--out", model_path)
    out = tmp_path / "ranked.csv"
    code = run_cli(
        "match", "--model", model_path, "--probes", data / "view_a.bin",
        "--gallery", data / "view_b.bin", "--out", out,
        "--matrix-out", tmp_path / "scores.csv", "--axis", "per_gallery_column",
    )
    assert code == 0
    header = (tmp_path / "scores.csv").read_text().splitlines()[0]
    assert header == "probe_label,gallery_label,value"


def test_eval_zero_noise_reports_100_percent(tmp_path, capsys):
    manifest_path = make_dataset(tmp_path, ids=30, dim=8, noise=0.0)
    out_dir = tmp_path / "run"
    code = run_cli(
        "eval", "--manifest", manifest_path, "--out-dir", out_dir,
        "--k", 3, "--max-rank", 5, "--invert-quotient",
    )
    assert code == 0
    text = (out_dir / "report.txt").read_text()
    without_row = next(l for l in text.splitlines() if l.startswith("Without"))
    with_row = next(l for l in text.splitlines() if l.startswith("With"))
    assert "100.00%" in without_row
    assert "100.00%" in with_row
    for name in ("report.txt", "report.csv", "cmc_curve.csv", "folds.csv"):
        assert (out_dir / name).is_file()


def test_eval_report_rank_columns(tmp_path):
    manifest_path = make_dataset(tmp_path, ids=40, dim=8, noise=0.2)
    out_dir = tmp_path / "run"
    code = run_cli("eval", "--manifest", manifest_path, "--out-dir", out_dir,
                   "--k", 2, "--invert-quotient")
    assert code == 0
    header = (out_dir / "report.csv").read_text().splitlines()[0]
    assert header == "normalization,rank_1,rank_5,rank_10,rank_15,rank_20"
    text = (out_dir / "report.txt").read_text()
    for col in ("Rank-1", "Rank-5", "Rank-10", "Rank-15", "Rank-20"):
        assert col in text


def test_eval_viper_shaped_report_layout(tmp_path):
    # 632 identities, 10 folds: each fold splits 316 train / 316 test and
    # the report carries the full Rank-1..Rank-20 column set
    manifest_path = make_dataset(tmp_path, ids=632, dim=16, noise=0.3)
    out_dir = tmp_path / "run"
    code = run_cli("eval", "--manifest", manifest_path, "--out-dir", out_dir,
                   "--k", 10, "--invert-quotient")
    assert code == 0
    text = (out_dir / "report.txt").read_text()
    for col in ("Rank-1", "Rank-5", "Rank-10", "Rank-15", "Rank-20"):
        assert col in text
    assert "Folds: 10" in text
    lines = (out_dir / "folds.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 2 * 10 * 20  # arms x folds x ranks


def test_eval_missing_manifest_exits_1(tmp_path, capsys):
    code = run_cli("eval", "--manifest", tmp_path / "nope.txt",
                   "--out-dir", tmp_path / "out")
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_eval_with_config_file(tmp_path):
    manifest_path = make_dataset(tmp_path, ids=20, dim=8, noise=0.1)
    config = tmp_path / "config.txt"
    config.write_text("k=2\nseed=3\ninvert_quotient=true\nmax_rank=4\n")
    out_dir = tmp_path / "run"
    assert run_cli("eval", "--manifest", manifest_path, "--out-dir", out_dir,
                   "--config", config) == 0
    # CLI flag overrides the file
    out_dir2 = tmp_path / "run2"
    assert run_cli("eval", "--manifest", manifest_path, "--out-dir", out_dir2,
                   "--config", config, "--max-rank", 6) == 0
    assert "rank,rate" in (out_dir2 / "cmc_curve.csv").read_text().splitlines()[0]
    assert max(
        int(line.split(",")[1])
        for line in (out_dir2 / "cmc_curve.csv").read_text().splitlines()[1:]
    ) == 6


def test_inspect_feature_and_model_files(tmp_path, capsys):
    manifest_path = make_dataset(tmp_path)
    data = manifest_path.parent
    assert run_cli("inspect", data / "view_a.bin") == 0
    out = capsys.readouterr().out
    assert "dim=8" in out and "count=24" in out
    model_path = tmp_path / "model.bin"
    run_cli("train", "--manifest", manifest_path, "--out", model_path)
    capsys.readouterr()
    assert run_cli("inspect", model_path) == 0
    assert "model file" in capsys.readouterr().out


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["eval"])  # missing required flags
    assert exc.value.code == 2


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["transmogrify"])
    assert exc.value.code == 2
