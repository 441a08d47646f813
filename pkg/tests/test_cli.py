import json
import subprocess
import sys

import numpy as np
import pytest
from scipy import io as sio

from htcca.cli import load_channel_sets, main
from htcca.dataset import read_dataset, write_dataset
from htcca.evaluation import table_from_csv
from htcca.simulator import preset, simulate


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    assert main(["simulate", "--preset", "small", "--seed", "4", "-o", str(root)]) == 0
    return root / "dataset"


def _files(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.is_file()}


def test_simulate_preset_geometry(tmp_path, capsys):
    assert main(["simulate", "--preset", "san-diego-like", "--seed", "7", "-o", str(tmp_path)]) == 0
    header = read_dataset(tmp_path / "dataset").header()
    assert (header["subjects"], header["targets"], header["blocks"]) == (10, 12, 15)
    echoed = json.loads(capsys.readouterr().out)
    assert echoed["seed"] == 7 and echoed["preset"] == "san-diego-like"
    assert json.loads((tmp_path / "simulate_config.json").read_text()) == echoed


def test_simulate_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["simulate", "--preset", "small", "--seed", "3", "-o", str(tmp_path / name)]) == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_simulate_flag_parse_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "-o", str(tmp_path), "--snr-db", "abc"])
    assert exc.value.code == 2
    assert "--snr-db" in capsys.readouterr().err


def test_simulate_invalid_config_exits_2(tmp_path, capsys):
    assert main(["simulate", "--preset", "small", "--subjects", "1", "-o", str(tmp_path)]) == 2
    assert "n_subjects" in capsys.readouterr().err


def test_simulate_config_file_precedence(tmp_path, capsys):
    cfg = tmp_path / "sim.json"
    cfg.write_text(json.dumps({"preset": "small", "snr_db": 3.0, "n_blocks": 3}))
    assert main(["simulate", "--config", str(cfg), "--snr-db", "-2", "-o", str(tmp_path / "o")]) == 0
    echoed = json.loads(capsys.readouterr().out)
    assert echoed["snr_db"] == -2.0 and echoed["n_blocks"] == 3 and echoed["n_subjects"] == 4
    cfg.write_text(json.dumps({"colour": "red"}))
    assert main(["simulate", "--config", str(cfg), "-o", str(tmp_path / "p")]) == 2


def test_benchmark_output_shape(tmp_path, small_dataset):
    out = tmp_path / "bench"
    code = main(["benchmark", "--dataset", str(small_dataset), "--methods", "tdcca,htcca",
                 "--nt", "2", "--windows", "0.5,1.0,1.5", "-o", str(out)])
    assert code == 0
    rows = table_from_csv((out / "accuracy.csv").read_text())
    assert len(rows) == 2 * 3 * 4
    for method in ("tdcca", "htcca"):
        for subject in range(4):
            assert sorted(r["window"] for r in rows
                          if r["method"] == method and r["subject"] == subject) == [0.5, 1.0, 1.5]
    report = json.loads((out / "report.json").read_text())
    assert [r["method"] for r in report["reports"]] == ["tdcca", "htcca"]
    assert (out / "ttests.csv").read_text().startswith("method_a,method_b,")
    assert json.loads((out / "benchmark_config.json").read_text())["methods"] == ["tdcca", "htcca"]
    assert not list(out.glob("*.png"))


def test_benchmark_separable_data_is_perfect(tmp_path):
    ds = simulate(preset("small", snr_db=60.0, subject_similarity=1.0, subject_delay_sd=0.0,
                         phase_jitter_rad=0.0, seed=1)).dataset
    write_dataset(ds, tmp_path / "clean")
    out = tmp_path / "out"
    assert main(["benchmark", "--dataset", str(tmp_path / "clean"), "--nt", "2",
                 "--format", "csv", "-o", str(out)]) == 0
    rows = table_from_csv((out / "accuracy.csv").read_text())
    assert {r["method"] for r in rows} == {"cca", "ttcca", "tdcca", "htcca"}
    assert all(r["accuracy"] == 1.0 for r in rows)
    assert not (out / "report.json").exists()


def test_benchmark_rejects_single_training_trial(tmp_path, small_dataset, capsys):
    code = main(["benchmark", "--dataset", str(small_dataset), "--methods", "tdcca",
                 "--nt", "1", "-o", str(tmp_path)])
    assert code == 2
    assert "at least 2 training trials" in capsys.readouterr().err
    assert not any(tmp_path.iterdir())


@pytest.mark.parametrize("flags", [["--methods", "trca"], ["--format", "xml"],
                                   ["--windows", "9.0"], ["--nt", "4"], ["--threads", "0"]])
def test_benchmark_usage_errors(tmp_path, small_dataset, flags):
    assert main(["benchmark", "--dataset", str(small_dataset), "-o", str(tmp_path), *flags]) == 2


def test_benchmark_missing_dataset_exits_1(tmp_path):
    assert main(["benchmark", "--dataset", str(tmp_path / "nope"), "-o", str(tmp_path)]) == 1


def test_benchmark_threads_are_byte_identical(tmp_path, small_dataset, monkeypatch):
    args = ["benchmark", "--dataset", str(small_dataset), "--nt", "2,3", "--windows", "0.5,1.0",
            "--policy", "seeded-random", "--seed", "5"]
    assert main(args + ["--threads", "1", "-o", str(tmp_path / "t1")]) == 0
    assert main(args + ["--threads", "8", "-o", str(tmp_path / "t8")]) == 0
    monkeypatch.setenv("HTCCA_THREADS", "3")
    assert main(args + ["-o", str(tmp_path / "env")]) == 0
    assert _files(tmp_path / "t1") == _files(tmp_path / "t8") == _files(tmp_path / "env")


def test_benchmark_channel_set_and_figures(tmp_path):
    ds = simulate(preset("san-diego-like", n_subjects=3, n_blocks=4, seed=2)).dataset
    write_dataset(ds, tmp_path / "sd")
    out = tmp_path / "out"
    assert main(["benchmark", "--dataset", str(tmp_path / "sd"), "--methods", "cca,tdcca",
                 "--nt", "2,3", "--channels", "O1,Oz,O2", "--figures", "-o", str(out)]) == 0
    cfg = json.loads((out / "benchmark_config.json").read_text())
    assert cfg["channels"] == ["O1", "Oz", "O2"]
    pngs = sorted(p.name for p in out.glob("*.png"))
    assert pngs == ["fig_accuracy_vs_trials.png", "fig_windows_nt2.png", "fig_windows_nt3.png"]
    assert all((out / p).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n" for p in pngs)


def test_named_channel_sets():
    sets = load_channel_sets()
    assert len(sets["san-diego-8"]) == 8
    assert len(sets["tsinghua-9"]) == 9


def test_inspect(small_dataset, capsys):
    assert main(["inspect", str(small_dataset)]) == 0
    text = capsys.readouterr().out
    assert "4 subjects x 4 blocks" in text and "measured SNR" in text
    assert main(["inspect", str(small_dataset), "--json"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["subjects"] == 4 and len(info["snr_db"]) == 4
    assert info["channels"] == ["ch0", "ch1", "ch2", "ch3"]


def test_inspect_truncated_file(tmp_path, small_dataset, capsys):
    (tmp_path / "t.manifest").write_bytes(small_dataset.with_suffix(".manifest").read_bytes())
    (tmp_path / "t.f32").write_bytes(small_dataset.with_suffix(".f32").read_bytes()[:1000])
    assert main(["inspect", str(tmp_path / "t")]) == 1
    assert "SizeMismatch" in capsys.readouterr().err


def test_convert_mat_and_npy(tmp_path, small_dataset):
    ds = read_dataset(small_dataset)
    common = ["--axes", "channel,sample,target,block", "--sample-rate", "256",
              "--frequencies", ",".join(map(str, ds.frequencies)), "--latency", "0.135"]
    mats, npys = [], []
    for s in range(ds.n_subjects):
        arr = np.asarray(ds.data[s]).transpose(2, 3, 1, 0)
        mats.append(tmp_path / f"s{s}.mat")
        sio.savemat(mats[-1], {"eeg": arr})
        npys.append(tmp_path / f"s{s}.npy")
        np.save(npys[-1], arr)
    assert main(["convert-format", *map(str, mats), "--key", "eeg", *common,
                 "-o", str(tmp_path / "from_mat")]) == 0
    assert main(["convert-format", *map(str, npys), *common, "-o", str(tmp_path / "from_npy")]) == 0
    for name in ("from_mat", "from_npy"):
        assert read_dataset(tmp_path / name).data.tobytes() == ds.data.tobytes()
    assert main(["convert-format", str(mats[0]), *common, "-o", str(tmp_path / "x")]) == 2


def test_convert_reprocesses_dataset(tmp_path, small_dataset):
    assert main(["convert-format", str(small_dataset), "--select", "ch0,ch2",
                 "--resample", "128", "--bandpass", "5,40", "-o", str(tmp_path / "r")]) == 0
    out = read_dataset(tmp_path / "r")
    assert out.channels == ("ch0", "ch2") and out.sample_rate == 128.0
    assert main(["convert-format", str(small_dataset), "--resample", "100",
                 "-o", str(tmp_path / "bad")]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "htcca", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for command in ("simulate", "benchmark", "inspect", "convert-format"):
        assert command in proc.stdout
