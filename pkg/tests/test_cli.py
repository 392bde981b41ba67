import json

import numpy as np
import pytest

from survbeta.cli import main
from survbeta.data import preset_config, generate_synthetic, save_csv
from survbeta.ensemble import load_model

FAST_FIT = {
    "m_estimators": 3,
    "tau_grid": [0.1, 1.0],
    "w_grid": [1.0, 10.0],
    "eps_grid": [0.0, 1.0],
    "pair_budget": 60,
    "subgradient_iterations": 100,
}


def _config(tmp_path, name="cfg.json", **extra):
    cfg = {"fit": FAST_FIT, "dataset": {"preset": "two-cluster", "n_per_cluster": 25}}
    cfg.update(extra)
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return str(path)


def test_fit_writes_model_and_reports(tmp_path):
    out = tmp_path / "out"
    code = main([
        "fit", "--config", _config(tmp_path), "--out", str(out),
        "--variant", "survbeta-noopt", "--seed", "3",
    ])
    assert code == 0
    assert (out / "model.json").exists()
    assert (out / "fit_report.json").exists()
    assert (out / "fit_grid.csv").exists()
    assert (out / "fit_grid.png").exists()
    assert (out / "fit_grid.csv.meta.json").exists()
    report = json.loads((out / "fit_report.json").read_text())
    assert "chosen" in report and "val_cindex" in report["chosen"]
    model = load_model(out / "model.json")
    assert model.ensemble.epsilon == 0.0


def test_fit_empty_grid_is_config_error(tmp_path):
    cfg = _config(tmp_path, fit={**FAST_FIT, "w_grid": []})
    assert main(["fit", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_unknown_flag_exits_2(tmp_path, capsys):
    assert main(["fit", "--definitely-not-a-flag"]) == 2
    capsys.readouterr()


def test_unknown_fit_key_is_config_error(tmp_path):
    cfg = _config(tmp_path, fit={**FAST_FIT, "tau_gird": [1.0]})
    assert main(["fit", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_fit_on_csv_and_predict(tmp_path):
    ds = generate_synthetic(preset_config("two-cluster", n_per_cluster=25, seed=1))
    csv_path = tmp_path / "train.csv"
    save_csv(ds, csv_path)
    out = tmp_path / "out"
    code = main([
        "fit", "--config", _config(tmp_path), "--out", str(out),
        "--variant", "beran-single", "--seed", "1",
        "--csv", str(csv_path), "--time-col", "time", "--event-col", "event",
    ])
    assert code == 0
    pred_out = tmp_path / "pred"
    code = main([
        "predict", "--model", str(out / "model.json"),
        "--csv", str(csv_path), "--out", str(pred_out),
    ])
    assert code == 0
    lines = (pred_out / "predictions.csv").read_text().strip().splitlines()
    assert lines[0] == "row,expected_time"
    assert len(lines) == ds.n + 1


def test_fit_and_predict_with_categorical_features(tmp_path):
    rng = np.random.default_rng(2)
    grades = rng.choice(["low", "mid", "high"], size=40)
    lines = ["time,event,grade,x"]
    for g in grades:
        offset = {"low": 1.0, "mid": 2.0, "high": 3.0}[g]
        lines.append(f"{rng.uniform(0.5, 2.0) + offset},1,{g},{rng.normal():.4f}")
    csv_path = tmp_path / "cat.csv"
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    out = tmp_path / "out"
    code = main([
        "fit", "--config", _config(tmp_path), "--out", str(out),
        "--variant", "survbeta-noopt", "--seed", "0",
        "--csv", str(csv_path), "--time-col", "time", "--event-col", "event",
        "--categorical", "grade",
    ])
    assert code == 0
    pred_out = tmp_path / "pred"
    code = main([
        "predict", "--model", str(out / "model.json"),
        "--csv", str(csv_path), "--out", str(pred_out),
    ])
    assert code == 0
    lines = (pred_out / "predictions.csv").read_text().strip().splitlines()
    assert len(lines) == 41

    # a category unseen at fit time is a data error
    bad = tmp_path / "bad_cat.csv"
    bad.write_text("time,event,grade,x\n1.0,1,unknown,0.2\n", encoding="utf-8")
    code = main([
        "predict", "--model", str(out / "model.json"),
        "--csv", str(bad), "--out", str(tmp_path / "p2"),
    ])
    assert code == 3


def test_fit_missing_column_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,e,x\n1.0,1,0.5\n", encoding="utf-8")
    code = main([
        "fit", "--config", _config(tmp_path), "--out", str(tmp_path / "o"),
        "--csv", str(bad),
    ])
    assert code == 3
    capsys.readouterr()


def test_sweep_rows_and_determinism(tmp_path):
    cfg = _config(tmp_path)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    args = [
        "sweep", "--config", cfg, "--axis", "estimators", "--values", "3,5",
        "--reps", "2", "--seed", "7", "--variant", "survbeta-noopt",
        "--no-figures",
    ]
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0
    table_a = (out_a / "sweep_estimators.csv").read_text()
    table_b = (out_b / "sweep_estimators.csv").read_text()
    assert table_a == table_b
    lines = table_a.strip().splitlines()
    assert lines[0] == "value,variant,rep,seed,cindex"
    assert len(lines) == 1 + 2 * 2  # 2 values x 2 reps x 1 variant


def test_sweep_figure_rendering(tmp_path):
    cfg = _config(tmp_path)
    out = tmp_path / "fig"
    code = main([
        "sweep", "--config", cfg, "--axis", "subsample_size", "--values", "0.5",
        "--reps", "1", "--seed", "0", "--variant", "survbeta-noopt",
        "--out", str(out),
    ])
    assert code == 0
    assert (out / "sweep_subsample_size.png").exists()


def test_sweep_synthetic_axes(tmp_path):
    cfg = _config(tmp_path)
    for axis, value in (("k_shape", "2.0"), ("cluster_points", "20"), ("cluster_distance", "5")):
        out = tmp_path / f"ax_{axis}"
        code = main([
            "sweep", "--config", cfg, "--axis", axis, "--values", value,
            "--reps", "1", "--seed", "0", "--variant", "beran-single",
            "--out", str(out), "--no-figures",
        ])
        assert code == 0
        lines = (out / f"sweep_{axis}.csv").read_text().strip().splitlines()
        assert len(lines) == 2


def test_sweep_axis_mismatch_is_config_error(tmp_path):
    ds = generate_synthetic(preset_config("two-cluster", n_per_cluster=25, seed=1))
    csv_path = tmp_path / "d.csv"
    save_csv(ds, csv_path)
    cfg = _config(tmp_path)
    code = main([
        "sweep", "--config", cfg, "--axis", "cluster_distance", "--values", "5",
        "--reps", "1", "--csv", str(csv_path), "--out", str(tmp_path / "o"),
        "--no-figures",
    ])
    assert code == 2


def test_benchmark_and_compare(tmp_path):
    cfg = _config(
        tmp_path,
        datasets=[
            {"name": "close", "preset": "two-cluster", "n_per_cluster": 25},
            {"name": "far", "preset": "shifted-clusters", "shift": 20.0, "n_per_cluster": 25},
        ],
    )
    out = tmp_path / "bench"
    code = main([
        "benchmark", "--config", cfg, "--reps", "2", "--seed", "5",
        "--variant", "beran-single,survbeta-noopt", "--out", str(out),
    ])
    assert code == 0
    raw = (out / "benchmark_raw.csv").read_text().strip().splitlines()
    assert raw[0] == "dataset,variant,rep,cindex"
    assert len(raw) == 1 + 2 * 2 * 2  # datasets x reps x variants
    summary = (out / "benchmark_summary.csv").read_text().strip().splitlines()
    assert summary[0] == "dataset,variant,mean_cindex,std_cindex,reps"
    assert (out / "benchmark_summary.png").exists()

    cmp_out = tmp_path / "cmp"
    code = main([
        "compare", "--csv", str(out / "benchmark_raw.csv"), "--out", str(cmp_out),
        "--no-figures",
    ])
    assert code == 0
    lines = (cmp_out / "compare_pvalues.csv").read_text().strip().splitlines()
    assert lines[0] == "variant,beran-single,survbeta-noopt"
    cells = lines[1].split(",")
    assert float(cells[1]) == 1.0  # diagonal: identical columns


def test_compare_identical_and_dominant_columns(tmp_path):
    table = tmp_path / "scores.csv"
    # dyadic scores keep the paired differences exactly constant in floats
    table.write_text(
        "dataset,variant,mean_cindex\n"
        "d1,a,0.5\nd1,b,0.5\nd1,c,0.75\n"
        "d2,a,0.625\nd2,b,0.625\nd2,c,0.875\n"
        "d3,a,0.75\nd3,b,0.75\nd3,c,1.0\n",
        encoding="utf-8",
    )
    out = tmp_path / "out"
    assert main(["compare", "--csv", str(table), "--out", str(out), "--no-figures"]) == 0
    lines = (out / "compare_pvalues.csv").read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = {line.split(",")[0]: line.split(",")[1:] for line in lines[1:]}
    i_b = header.index("b") - 1
    i_c = header.index("c") - 1
    assert float(rows["a"][i_b]) == 1.0  # identical columns
    assert float(rows["a"][i_c]) == 0.0  # constant dominance


def test_compare_single_dataset_is_data_error(tmp_path, capsys):
    table = tmp_path / "one.csv"
    table.write_text("dataset,variant,mean_cindex\nd1,a,0.7\nd1,b,0.6\n", encoding="utf-8")
    assert main(["compare", "--csv", str(table), "--out", str(tmp_path / "o")]) == 3
    capsys.readouterr()


def test_benchmark_meta_echoes_config(tmp_path):
    cfg = _config(tmp_path)
    out = tmp_path / "bench"
    main([
        "benchmark", "--config", cfg, "--reps", "1", "--seed", "0",
        "--variant", "beran-single", "--out", str(out), "--no-figures",
    ])
    meta = json.loads((out / "benchmark_raw.csv.meta.json").read_text())
    assert meta["command"] == "benchmark"
    assert meta["variants"] == ["beran-single"]
    assert meta["fit"]["m_estimators"] == 3
