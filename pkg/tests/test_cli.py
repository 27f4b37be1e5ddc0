import csv
import json
from pathlib import Path

import numpy as np
import pytest

from lowres import __version__
from lowres.cli import RESULT_COLUMNS, ConfigError, main, parse_config
from lowres.images import read_pgm

FIX = Path(__file__).parent / "fixtures"

TOY = """\
[experiment]
model = mlp
methods = rr
bits = 2, 4, 8
hidden_size = 4
seeds = 0, 1

[training]
learning_rate = 0.5
epochs = 3

[data]
source = toy
n_examples = 120
n_features = 3
validation_size = 20
test_size = 20

[output]
dir = {out}
"""


def _write(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_version(capsys):
    assert main(["version"]) == 0
    assert __version__ in capsys.readouterr().out


class TestValidate:
    def test_ok(self, tmp_path, capsys):
        assert main(["validate", str(_write(tmp_path, TOY.format(out=tmp_path / "o")))]) == 0
        assert "6 cells" in capsys.readouterr().out

    def test_shipped_configs_validate(self):
        configs = sorted((Path(__file__).parents[1] / "configs").glob("*.ini"))
        assert configs
        for c in configs:
            assert main(["validate", str(c)]) == 0, c

    def test_unknown_key_has_line(self, tmp_path, capsys):
        text = TOY.format(out="o").replace("epochs = 3", "epochs = 3\nepoch = 4")
        assert main(["validate", str(_write(tmp_path, text))]) == 2
        err = capsys.readouterr().err
        assert "line 11" in err and "epoch" in err

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError, match=r"line 1: \[extras\]"):
            parse_config("[extras]\nx = 1\n" + TOY.format(out="o"))

    def test_bad_value(self):
        with pytest.raises(ConfigError, match=r"line 4: \[experiment\] bits"):
            parse_config(TOY.format(out="o").replace("2, 4, 8", "2, four"))

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="seeds"):
            parse_config(TOY.format(out="o").replace("seeds = 0, 1\n", ""))

    def test_semantic_error(self):
        with pytest.raises(ConfigError, match="methods"):
            parse_config(TOY.format(out="o").replace("methods = rr", "methods = sgd"))

    def test_two_sweep_modes_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(TOY.format(out="o").replace("hidden_size = 4", "sweep = fixed_memory"))

    def test_unreadable(self, tmp_path):
        assert main(["validate", str(tmp_path / "nope.ini")]) == 2

    def test_hash_tracks_content(self):
        a = parse_config(TOY.format(out="o"))
        b = parse_config(TOY.format(out="o").replace("epochs = 3", "epochs = 4"))
        assert a.config_hash == parse_config(TOY.format(out="o")).config_hash
        assert a.config_hash != b.config_hash


class TestRun:
    def test_toy_results(self, tmp_path):
        out = tmp_path / "o"
        assert main(["run", str(_write(tmp_path, TOY.format(out=out)))]) == 0
        with open(out / "results.csv") as f:
            assert next(csv.reader(f)) == list(RESULT_COLUMNS)
        rows = _rows(out / "results.csv")
        assert len(rows) == 3 * 2
        assert {r["metric"] for r in rows} == {"misclassification_percent"}
        assert len(list((out / "curves").glob("*.csv"))) == 6
        meta = json.loads((out / "metadata.json").read_text())
        assert meta["config_hash"] == rows[0]["config_hash"]
        assert meta["coarse_p_levels"] == "2**bits - 1"

    def test_rerun_identical_except_wall_time(self, tmp_path):
        outs = []
        for i in range(2):
            out = tmp_path / f"o{i}"
            assert main(["run", str(_write(tmp_path, TOY.format(out=out), f"c{i}.ini"))]) == 0
            outs.append(out)
        strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time"} for r in rows]
        assert strip(_rows(outs[0] / "results.csv")) == strip(_rows(outs[1] / "results.csv"))
        for c in (outs[0] / "curves").iterdir():
            assert c.read_bytes() == (outs[1] / "curves" / c.name).read_bytes()
        assert (outs[0] / "metadata.json").read_text().replace("o0", "o1") == (outs[1] / "metadata.json").read_text()

    def test_output_override(self, tmp_path):
        cfg = _write(tmp_path, TOY.format(out=tmp_path / "unused"))
        assert main(["run", str(cfg), "--output", str(tmp_path / "elsewhere")]) == 0
        assert (tmp_path / "elsewhere" / "results.csv").exists()
        assert not (tmp_path / "unused").exists()

    def test_missing_mnist_prints_fetch_help(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("LOWRES_DATA_DIR", str(tmp_path / "empty"))
        text = TOY.format(out=tmp_path / "o").replace("source = toy", "source = mnist\npath = mnist5k")
        assert main(["run", str(_write(tmp_path, text))]) == 3
        err = capsys.readouterr().err
        assert "prepare_mnist_subset.py" in err and str(tmp_path / "empty") in err

    def test_libsvm_via_env_dir(self, tmp_path, monkeypatch):
        data = tmp_path / "data"
        data.mkdir()
        rng = np.random.default_rng(0)
        lines = []
        for i in range(60):
            x = rng.random(5) < 0.5
            feats = " ".join(f"{j + 1}:1" for j in np.flatnonzero(x))
            lines.append(f"{'+1' if x[0] else '-1'} {feats}")
        (data / "train.libsvm").write_text("\n".join(lines) + "\n")
        monkeypatch.setenv("LOWRES_DATA_DIR", str(data))
        text = TOY.format(out=tmp_path / "o").replace(
            "source = toy\nn_examples = 120\nn_features = 3",
            "source = libsvm\npath = train.libsvm\nn_features = 5",
        )
        assert main(["run", str(_write(tmp_path, text))]) == 0
        assert len(_rows(tmp_path / "o" / "results.csv")) == 6

    def test_malformed_data_exit_3(self, tmp_path, monkeypatch):
        monkeypatch.setenv("LOWRES_DATA_DIR", str(FIX))
        text = TOY.format(out=tmp_path / "o").replace(
            "source = toy\nn_examples = 120\nn_features = 3",
            "source = libsvm\npath = bad_order.libsvm\nn_features = 5",
        )
        assert main(["run", str(_write(tmp_path, text))]) == 3

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_exit_4(self, tmp_path):
        text = TOY.format(out=tmp_path / "o").replace("learning_rate = 0.5", "learning_rate = 1e308").replace(
            "methods = rr", "methods = baseline")
        assert main(["run", str(_write(tmp_path, text))]) == 4

    def test_rbm_images_layout(self, tmp_path):
        text = f"""\
[experiment]
model = rbm
methods = rr
bits = 4
hidden_size = 5
seeds = 0

[training]
learning_rate = 0.05
epochs = 2
gibbs_steps = 2

[data]
source = teacher
n_examples = 100
n_features = 16
validation_size = 20
test_size = 20

[rbm]
passes = 30
record_every = 10
initial_conditions = 4
image_shape = 4, 4

[output]
dir = {tmp_path / "o"}
"""
        assert main(["run", str(_write(tmp_path, text))]) == 0
        out = tmp_path / "o"
        [sample] = list((out / "samples").glob("*.pgm"))
        [filters] = list((out / "filters").glob("*.pgm"))
        # 3 recordings x 4 initial conditions of 4x4 tiles, 1-pixel separators
        assert read_pgm(sample).shape == (3 * 5 - 1, 4 * 5 - 1)
        # 5 hidden units on a 2x3 grid
        assert read_pgm(filters).shape == (2 * 5 - 1, 3 * 5 - 1)
        assert _rows(out / "results.csv")[0]["metric"] == "reconstruction_xent"
