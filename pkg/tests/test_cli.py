import dataclasses
import json

import pytest

from pyhydro.adapters import load_bundle, read_dot_edges, save_condensed
from pyhydro.cli import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    GLOBAL_FIELDS,
    build_parser,
    main,
    resolve_config,
)
from pyhydro.config import CondenseConfig

TINY_CONDENSE = [
    "--rate", "0.125", "--epochs", "8", "--tau1", "2", "--tau2", "2", "--hidden-units", "8",
    "--struct-layers", "1", "--outer-loops", "2", "--eval-every", "4", "--lp-epochs", "5",
    "--lp-hidden", "8", "--sample-size", "8", "--sample-multiplier", "2",
]


@pytest.fixture
def bundle_dir(tmp_path):
    out = tmp_path / "sbm"
    code = main([
        "synth", "--sizes", "30,30,30", "--p-in", "0.3", "--p-out", "0.02", "--features", "8",
        "--seed", "3", "--out", str(out),
    ])
    assert code == EXIT_OK
    return out


@pytest.fixture
def artifact_dir(tmp_path, condensed_factory):
    out = tmp_path / "run"
    save_condensed(condensed_factory(55, 1431), out)
    return out


def test_condense_help_lists_every_config_key(capsys):
    with pytest.raises(SystemExit) as exit_info:
        build_parser().parse_args(["condense", "--help"])

    assert exit_info.value.code == 0
    text = capsys.readouterr().out
    for f in dataclasses.fields(CondenseConfig):
        flag = GLOBAL_FIELDS.get(f.name, f.name).replace("_", "-")
        assert f"--{flag}" in text


def test_missing_command_prints_help(capsys):
    assert main([]) == EXIT_CONFIG
    assert "synth" in capsys.readouterr().out


def test_synth_writes_bundle_and_manifest(bundle_dir):
    g = load_bundle(bundle_dir)
    manifest = json.loads((bundle_dir / "manifest.json").read_text())

    assert g.num_nodes == 90
    assert manifest["seed"] == 3
    assert manifest["command"][0] == "synth"
    assert manifest["finished"] is not None


def test_missing_labels_exit_with_io_error(bundle_dir, tmp_path, caplog):
    (bundle_dir / "labels.tsv").unlink()

    code = main(["condense", "--data", str(bundle_dir), "--out", str(tmp_path / "out")])

    assert code == EXIT_IO
    assert "labels.tsv" in caplog.text


def test_flags_override_config_file(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("# tuned\nepochs = 100\nlr_feat = 0.05\nbeta = 0.2\n")

    args = build_parser().parse_args(
        ["condense", "--data", "unused", "--config", str(config), "--epochs", "200", "--seed", "4", "--threads", "2"]
    )
    cfg = resolve_config(args, CondenseConfig)

    assert cfg.epochs == 200
    assert cfg.lr_feat == 0.05
    assert cfg.beta == 0.2
    assert cfg.seed == 4
    assert cfg.workers == 2
    assert cfg.tau1 == CondenseConfig().tau1


def test_unknown_config_key_is_a_config_error(bundle_dir, tmp_path, caplog):
    config = tmp_path / "bad.cfg"
    config.write_text("epochs = 100\nlearning_speed = 3\n")

    code = main(["condense", "--data", str(bundle_dir), "--config", str(config)])

    assert code == EXIT_CONFIG
    assert "learning_speed" in caplog.text


def test_invalid_flag_value_is_a_config_error(bundle_dir, tmp_path):
    code = main(["condense", "--data", str(bundle_dir), "--rate", "1.5", "--out", str(tmp_path / "out")])

    assert code == EXIT_CONFIG


def test_eval_stats_of_condensed_artifact(artifact_dir, tmp_path):
    out = tmp_path / "stats"

    code = main(["eval", "stats", "--condensed", str(artifact_dir), "--out", str(out)])

    assert code == EXIT_OK
    data = json.loads((out / "stats.json").read_text())
    assert data["condensed"]["nodes"] == 55
    assert data["condensed"]["edges"] == 1431
    assert data["condensed"]["density_percent"] == "96.36%"
    report = json.loads((out / "report.json").read_text())
    assert report["source"] == "condensed"


def test_export_dot(artifact_dir, tmp_path):
    path = tmp_path / "graph.dot"

    code = main(["export-dot", "--condensed", str(artifact_dir), "--threshold", "0.5", "--out", str(path)])

    assert code == EXIT_OK
    assert len(read_dot_edges(path)) == 1431
    assert (tmp_path / "manifest.json").is_file()


@pytest.mark.slow
def test_synth_condense_and_evaluate(bundle_dir, tmp_path):
    run = tmp_path / "run"
    out = tmp_path / "lp"

    assert main(["condense", "--data", str(bundle_dir), "--out", str(run), "--seed", "1"] + TINY_CONDENSE) == EXIT_OK
    assert (run / "manifest.json").is_file()
    assert (run / "condensed" / "adj.f32").is_file()

    code = main([
        "eval", "lp", "--data", str(bundle_dir), "--condensed", str(run), "--out", str(out),
        "--runs", "2", "--lp-epochs", "5", "--lp-hidden", "8", "--edge-threshold", "0.0",
    ])

    assert code == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["task"] == "lp"
    assert report["rate"] == 0.125
    assert len(report["runs"]) == 2
