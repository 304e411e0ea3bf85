"""CLI contract: exit codes, output formats, schema validation."""

import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from watsonsim.cli import main
from watsonsim.color import Colorspace, Image, save_png
from watsonsim.watson import default_params, params_to_json, save_params


def schema(name):
    path = resources.files("watsonsim") / "schemas" / name
    return json.loads(path.read_text())


def validate(doc, name):
    jsonschema.validate(doc, schema(name))


def write_grey(path, arr):
    save_png(Image(np.asarray(arr, dtype=np.float64)[:, :, None],
                   Colorspace.GREY), path)


def write_rgb(path, arr):
    save_png(Image(np.asarray(arr, dtype=np.float64), Colorspace.RGB), path)


@pytest.fixture
def grey_pair(tmp_path):
    rng = np.random.default_rng(0)
    a = rng.random((16, 16))
    write_grey(tmp_path / "a.png", a)
    write_grey(tmp_path / "a_copy.png", a)
    write_grey(tmp_path / "b.png", rng.random((16, 16)))
    return tmp_path


@pytest.fixture
def color_pair(tmp_path):
    rng = np.random.default_rng(1)
    write_rgb(tmp_path / "a.png", rng.random((16, 16, 3)))
    write_rgb(tmp_path / "b.png", rng.random((16, 16, 3)))
    return tmp_path


# ---------------------------------------------------------------------------
# compare


def test_compare_identical_files_watson_dft(grey_pair, capsys):
    code = main(["compare", str(grey_pair / "a.png"), str(grey_pair / "a_copy.png"),
                 "--metric", "watson-dft"])
    assert code == 0
    value = float(capsys.readouterr().out.strip())
    assert value == pytest.approx(1e-10 ** 0.25, rel=1e-12)


def test_compare_identical_files_ssim(grey_pair, capsys):
    code = main(["compare", str(grey_pair / "a.png"), str(grey_pair / "a_copy.png"),
                 "--metric", "ssim"])
    assert code == 0
    assert float(capsys.readouterr().out.strip()) == 0.0


def test_compare_json_color_has_channel_breakdown(color_pair, capsys):
    code = main(["compare", str(color_pair / "a.png"), str(color_pair / "b.png"),
                 "--metric", "watson-dft", "--json"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    validate(doc, "compare.schema.json")
    assert set(doc["per_channel"]) == {"y", "cb", "cr"}
    total = sum(ch["weighted"] for ch in doc["per_channel"].values())
    assert doc["distance"] == pytest.approx(total, rel=1e-12)


def test_compare_json_grey_baseline(grey_pair, capsys):
    code = main(["compare", str(grey_pair / "a.png"), str(grey_pair / "b.png"),
                 "--metric", "l2", "--json"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    validate(doc, "compare.schema.json")
    assert "per_channel" not in doc


def test_compare_dimension_mismatch_names_shapes(tmp_path, capsys):
    rng = np.random.default_rng(2)
    write_grey(tmp_path / "small.png", rng.random((16, 16)))
    write_grey(tmp_path / "big.png", rng.random((24, 16)))
    code = main(["compare", str(tmp_path / "small.png"), str(tmp_path / "big.png")])
    assert code == 2
    err = capsys.readouterr().err
    assert "(16, 16, 1)" in err and "(24, 16, 1)" in err


def test_compare_missing_params_file_is_usage_error(grey_pair, capsys):
    code = main(["compare", str(grey_pair / "a.png"), str(grey_pair / "b.png"),
                 "--metric", "watson-dft", "--params", "nowhere.json"])
    assert code == 1
    assert "not found" in capsys.readouterr().err


def test_compare_corrupt_params_is_data_error(grey_pair, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code = main(["compare", str(grey_pair / "a.png"), str(grey_pair / "b.png"),
                 "--metric", "watson-dft", "--params", str(bad)])
    assert code == 2


def test_compare_variant_mismatch_is_data_error(grey_pair, tmp_path):
    path = tmp_path / "dct.json"
    save_params(default_params("dct", "grey"), path)
    code = main(["compare", str(grey_pair / "a.png"), str(grey_pair / "b.png"),
                 "--metric", "watson-dft", "--params", str(path)])
    assert code == 2


def test_compare_params_dir_search(grey_pair, tmp_path, monkeypatch, capsys):
    params_dir = tmp_path / "params"
    params_dir.mkdir()
    save_params(default_params("dft", "grey"), params_dir / "mine.json")
    monkeypatch.setenv("WATSON_PARAMS_DIR", str(params_dir))
    code = main(["compare", str(grey_pair / "a.png"), str(grey_pair / "b.png"),
                 "--metric", "watson-dft", "--params", "mine.json"])
    assert code == 0
    float(capsys.readouterr().out.strip())


def test_compare_seeded_offset_is_reproducible(grey_pair, capsys):
    argv = ["compare", str(grey_pair / "a.png"), str(grey_pair / "b.png"),
            "--metric", "watson-dct", "--seed", "9", "--json"]
    assert main(argv) == 0
    first = json.loads(capsys.readouterr().out)
    assert main(argv) == 0
    second = json.loads(capsys.readouterr().out)
    assert first == second
    assert all(-4 <= c <= 4 for c in first["offset"])


def test_unknown_metric_is_usage_error(grey_pair, capsys):
    code = main(["compare", str(grey_pair / "a.png"), str(grey_pair / "b.png"),
                 "--metric", "psnr"])
    assert code == 1


def test_missing_subcommand_is_usage_error(capsys):
    assert main([]) == 1


# ---------------------------------------------------------------------------
# dataset generation + training + evaluation


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    code = main(["make-synthetic", "--out", str(root / "d"), "--n-records", "16",
                 "--seed", "3", "--patch-size", "16", "--textures", "3"])
    assert code == 0
    return root / "d" / "manifest.csv"


def test_make_synthetic_is_deterministic(tmp_path, capsys):
    for name in ("x", "y"):
        assert main(["make-synthetic", "--out", str(tmp_path / name),
                     "--n-records", "6", "--seed", "11",
                     "--patch-size", "16", "--textures", "2"]) == 0
    capsys.readouterr()
    assert (tmp_path / "x" / "manifest.csv").read_bytes() == \
        (tmp_path / "y" / "manifest.csv").read_bytes()


def test_train_writes_validating_params_and_report(dataset, tmp_path, capsys):
    out = tmp_path / "trained.json"
    code = main(["train-2afc", "--metric", "watson-dct", "--data", str(dataset),
                 "--out", str(out), "--epochs", "1", "--batch-size", "8",
                 "--learning-rate", "0.01", "--seed", "0"])
    assert code == 0
    stdout_doc = json.loads(capsys.readouterr().out)
    validate(stdout_doc, "train_report.schema.json")
    validate(json.loads(out.read_text()), "params.schema.json")
    report = json.loads(out.with_suffix(".report.json").read_text())
    validate(report, "train_report.schema.json")
    assert report == stdout_doc
    assert len(report["loss_curve"]) == 1


def test_train_reruns_bit_identical(dataset, tmp_path, capsys):
    outs = []
    for name in ("one.json", "two.json"):
        out = tmp_path / name
        assert main(["train-2afc", "--metric", "watson-dct", "--data",
                     str(dataset), "--out", str(out), "--epochs", "1",
                     "--batch-size", "8", "--seed", "4"]) == 0
        outs.append(out.read_bytes())
    capsys.readouterr()
    assert outs[0] == outs[1]


def test_train_rejects_untrainable_metric(dataset, capsys):
    code = main(["train-2afc", "--metric", "ssim", "--data", str(dataset),
                 "--out", "x.json"])
    assert code == 1


def test_eval_report_validates(dataset, capsys):
    code = main(["eval-2afc", "--metric", "l1", "--data", str(dataset)])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    validate(doc, "eval_report.schema.json")
    assert 0.0 <= doc["agreement"] <= 1.0
    assert doc["n_records"] == 16
    assert set(doc["families"]).issubset(
        {"noise", "blur", "contrast", "quantize", "translate"}
    )


def test_eval_trained_params_roundtrip(dataset, tmp_path, capsys):
    out = tmp_path / "p.json"
    assert main(["train-2afc", "--metric", "watson-dft", "--data", str(dataset),
                 "--out", str(out), "--epochs", "0"]) == 0
    capsys.readouterr()
    code = main(["eval-2afc", "--metric", "watson-dft", "--data", str(dataset),
                 "--params", str(out)])
    assert code == 0
    validate(json.loads(capsys.readouterr().out), "eval_report.schema.json")


def test_eval_empty_dataset_is_data_error(tmp_path, capsys):
    manifest = tmp_path / "m.csv"
    manifest.write_text("ref,p0,p1,judge\n")
    code = main(["eval-2afc", "--metric", "l2", "--data", str(manifest)])
    assert code == 2


# ---------------------------------------------------------------------------
# gradcheck + bench


def test_gradcheck_json_validates_and_passes(capsys):
    code = main(["gradcheck", "--max-coords", "24", "--json"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    validate(doc, "gradcheck.schema.json")
    assert doc["ok"]
    assert set(doc["per_loss_max_rel_err"]) == {"watson-dct", "watson-dft",
                                                "ssim", "lp"}
    assert all(v < 1e-4 for v in doc["per_loss_max_rel_err"].values())


def test_gradcheck_impossible_tolerance_exits_3(capsys):
    code = main(["gradcheck", "--max-coords", "8", "--tolerance", "1e-12"])
    assert code == 3


def test_bench_json_validates(capsys):
    code = main(["bench", "--metric", "watson-dct", "--batch", "4",
                 "--size", "32", "--grey", "--seed", "1", "--json"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    validate(doc, "bench.schema.json")
    assert doc["forward_ms_per_batch"] < doc["forward_and_gradient_ms_per_batch"]
    assert doc["channels"] == 1


# ---------------------------------------------------------------------------
# params schema covers every mode


@pytest.mark.parametrize("variant", ["dct", "dft"])
@pytest.mark.parametrize("channels", ["grey", "ycbcr"])
def test_default_params_validate_against_schema(variant, channels):
    doc = params_to_json(default_params(variant, channels))
    validate(doc, "params.schema.json")


def test_params_schema_rejects_missing_weights():
    doc = params_to_json(default_params("dft", "grey"))
    del doc["w"]
    with pytest.raises(jsonschema.ValidationError):
        validate(doc, "params.schema.json")
