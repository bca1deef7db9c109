import json
import logging

import pandas as pd
import pytest

from trafficboost.pipeline.cli import EXIT_ERROR, build_parser, main
from trafficboost.pipeline.config import PipelineConfig

QUIET = ["--log-level", "ERROR"]


@pytest.fixture(autouse=True)
def restore_logging():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def _error_line(capsys) -> str:
    return capsys.readouterr().err.strip().splitlines()[-1]


def _synthesize(out, *extra) -> str:
    assert main([*QUIET, "synthesize", "--out", str(out), *extra]) == 0
    return str(out / "config.json")


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_missing_config_exits_with_one_error_line(tmp_path, capsys):
    code = main([*QUIET, "train", "--config", str(tmp_path / "absent.json")])
    assert code == EXIT_ERROR
    line = _error_line(capsys)
    assert line.startswith("error=ConfigError message=")
    assert "absent.json" in line


def test_ingest_error_names_file_and_line(tmp_path, capsys):
    config = _synthesize(tmp_path, "--weeks", "2")
    snapshots = tmp_path / "data" / "snapshots.csv"
    rows = snapshots.read_text().splitlines()
    cells = rows[1].split(",")
    cells[1] = "96"
    rows.append(",".join(cells))
    snapshots.write_text("\n".join(rows) + "\n")
    capsys.readouterr()

    assert main([*QUIET, "ingest-check", "--config", config]) == EXIT_ERROR
    line = _error_line(capsys)
    assert line.startswith("error=IngestError")
    assert f"snapshots.csv:{len(rows)}" in line


def test_synthesize_writes_a_loadable_city(tmp_path):
    path = _synthesize(tmp_path, "--weeks", "3", "--seed", "5", "--city", "demo")
    config = PipelineConfig.load(path)
    assert config.city == "demo"
    assert config.seed == 5
    assert config.data_dir == (tmp_path / "data").resolve()
    config.check_paths()
    assert main([*QUIET, "ingest-check", "--config", path]) == 0


def test_invalid_synthetic_spec(tmp_path, capsys):
    code = main([*QUIET, "synthesize", "--out", str(tmp_path), "--noise", "-1"])
    assert code == EXIT_ERROR
    assert _error_line(capsys).startswith("error=ValidationError")


def test_predict_without_bundle(tmp_path, capsys):
    config = _synthesize(tmp_path, "--weeks", "2")
    capsys.readouterr()
    assert main([*QUIET, "predict", "--config", config]) == EXIT_ERROR
    assert _error_line(capsys).startswith("error=BundleError")


@pytest.mark.slow
def test_end_to_end(tmp_path, quick_presets):
    config_path = _synthesize(tmp_path, "--weeks", "4", "--seed", "2")
    raw = json.loads((tmp_path / "config.json").read_text())
    raw.update(
        num_rounds=10,
        early_stopping_rounds=3,
        validation_weeks=1,
        preset_a=quick_presets[0].model_dump(),
        preset_b=quick_presets[1].model_dump(),
    )
    (tmp_path / "config.json").write_text(json.dumps(raw))

    assert main([*QUIET, "train", "--config", config_path]) == 0
    config = PipelineConfig.load(config_path)
    assert config.bundle_path.is_file()
    summary = json.loads((config.out_dir / "train_summary.json").read_text())
    assert len(summary["best_rounds"]) == 9

    assert main([*QUIET, "predict", "--config", config_path]) == 0
    contexts = pd.read_csv(config.out_dir / "contexts.csv")
    assert contexts["slot"].between(0, 95).all()

    assert main([*QUIET, "evaluate", "--config", config_path]) == 0
    evaluation = json.loads((config.out_dir / "evaluation.json").read_text())
    assert evaluation["core_loss"] > 0

    assert main([*QUIET, "ablate", "--config", config_path]) == 0
    ablation = json.loads((config.out_dir / "ablation.json").read_text())
    assert set(ablation["conditions"]) == {
        "two_stage",
        "single_stage_nulled",
        "single_stage_retrained",
        "ground_truth",
        "te_baseline",
    }

    # a changed model setting invalidates the bundle
    assert main([*QUIET, "evaluate", "--config", config_path, "--seed", "9"]) == EXIT_ERROR
