"""Command-line interface: JSON documents, exit codes and file handling."""

import json
from pathlib import Path

import numpy as np
import pytest

from tsnkit import RngStream, SnParams, TsnModel, sample_tsn, truncation_bounds
from tsnkit.cli import InputError, main, read_column

DATA = Path(__file__).parent / "data"
SAMPLE = DATA / "sample.csv"
FIT_ARGS = ["--input", str(SAMPLE), "--column", "value", "--upper", "1.6448", "--grid-points", "41"]


def run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def same_schema(doc, golden, path="$"):
    assert type(doc) is type(golden), path
    if isinstance(golden, dict):
        assert list(doc) == list(golden), path
        for k in golden:
            same_schema(doc[k], golden[k], f"{path}.{k}")
    elif isinstance(golden, float):
        assert doc == pytest.approx(golden, rel=1e-8, abs=1e-10), path
    else:
        assert doc == golden, path


class TestReadColumn:
    def test_header_and_name(self):
        x = read_column(SAMPLE, "value")
        assert x.size == 200 and np.all(np.isfinite(x))

    def test_default_is_first_numeric_column(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("label,y\na,1.5\nb,2.5\n")
        assert read_column(f).tolist() == [1.5, 2.5]

    def test_no_header_and_index(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("1,10\n2,20\n\n3,30\n")
        assert read_column(f).tolist() == [1, 2, 3]
        assert read_column(f, "1").tolist() == [10, 20, 30]

    @pytest.mark.parametrize(
        "text, column, message",
        [
            ("", None, "no data"),
            ("x\n", None, "header but no data"),
            ("x\n1\nfoo\n", None, ":3: non-numeric value 'foo'"),
            ("x\n1\n", "y", "column 'y' not found"),
            ("x\n1\nnan\n", None, "non-finite"),
            ("a,b\n1,2\n3\n", "b", ":3: row has no column 1"),
        ],
    )
    def test_diagnostics(self, tmp_path, text, column, message):
        f = tmp_path / "d.csv"
        f.write_text(text)
        with pytest.raises(InputError, match=message):
            read_column(f, column)


class TestFit:
    def test_golden_document(self, capsys):
        code, out, _ = run(capsys, ["fit", *FIT_ARGS])
        assert code == 0
        same_schema(json.loads(out), json.loads((DATA / "golden_fit.json").read_text()))

    def test_byte_identical_repeats(self, capsys):
        first = run(capsys, ["fit", *FIT_ARGS])
        assert run(capsys, ["fit", *FIT_ARGS]) == first

    def test_input_not_modified(self, capsys):
        before = SAMPLE.read_bytes()
        run(capsys, ["fit", *FIT_ARGS, "--sqrt-transform", "--lower", "0"])
        assert SAMPLE.read_bytes() == before

    @pytest.mark.parametrize("method", ["mle", "mom", "mwm", "grid-mle"])
    def test_methods(self, capsys, method):
        code, out, _ = run(capsys, ["fit", *FIT_ARGS, "--method", method, "--multistart", "3"])
        doc = json.loads(out)
        assert code in (0, 2) and doc["converged"] == (code == 0)
        assert doc["method"] == method
        assert ("grid" in doc) == (method == "grid-mle")
        assert ("multistart" in doc) == (method == "mle")

    def test_window_filtering(self, capsys):
        x = read_column(SAMPLE, "value")
        argv = ["fit", *FIT_ARGS[:4], "--lower", "-1", "--upper", "1.2", "--grid-points", "41"]
        code, out, _ = run(capsys, argv)
        doc = json.loads(out)
        assert code == 0
        assert doc["n_used"] == int(np.sum((x >= -1) & (x <= 1.2)))
        assert doc["window"] == {"lower": -1.0, "upper": 1.2}

    def test_variance_beyond_window_limit(self, capsys):
        code, _, err = run(capsys, ["fit", *FIT_ARGS[:4], "--lower", "0", "--upper", "1"])
        assert code == 1 and "exceeds that of any model" in err

    def test_sqrt_transform(self, tmp_path, capsys):
        f = tmp_path / "days.csv"
        f.write_text("days\n" + "\n".join(str(v) for v in np.arange(1, 60) ** 1.3) + "\n")
        code, out, _ = run(capsys, ["fit", "--input", str(f), "--sqrt-transform", "--lower", "0", "--grid-points", "21"])
        doc = json.loads(out)
        assert code == 0 and doc["sqrt_transform"] is True and doc["n_used"] == 59

    @pytest.mark.slow
    def test_large_sample_recovery(self, tmp_path, capsys):
        p = SnParams(0, 1, 2)
        w = truncation_bounds("right", 0.1, p)
        x = sample_tsn(TsnModel(p, w), 100_000, RngStream(101))
        f = tmp_path / "big.csv"
        np.savetxt(f, x, fmt="%.17g")
        code, out, _ = run(capsys, ["fit", "--input", str(f), "--upper", repr(w.upper)])
        est = json.loads(out)["estimate"]
        assert code == 0
        assert est["xi"] == pytest.approx(0, abs=0.05)
        assert est["omega"] == pytest.approx(1, abs=0.05)
        assert est["alpha"] == pytest.approx(2, abs=0.15)


class TestFitErrors:
    def test_empty_file(self, tmp_path, capsys):
        f = tmp_path / "empty.csv"
        f.write_text("")
        code, out, err = run(capsys, ["fit", "--input", str(f)])
        assert code == 1 and out == "" and "error:" in err

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(capsys, ["fit", "--input", str(tmp_path / "nope.csv")])
        assert code == 1 and "cannot read" in err

    def test_window_excludes_everything(self, capsys):
        code, _, err = run(capsys, ["fit", *FIT_ARGS[:4], "--lower", "50", "--upper", "60"])
        assert code == 1 and "no observations in window" in err

    def test_degenerate_variance(self, tmp_path, capsys):
        f = tmp_path / "c.csv"
        f.write_text("3\n3\n3\n")
        code, _, err = run(capsys, ["fit", "--input", str(f)])
        assert code == 1 and "degenerate variance" in err

    def test_one_observation(self, tmp_path, capsys):
        f = tmp_path / "c.csv"
        f.write_text("3\n30\n")
        code, _, err = run(capsys, ["fit", "--input", str(f), "--upper", "10"])
        assert code == 1 and "at least 2 observations" in err

    @pytest.mark.parametrize(
        "extra, message",
        [
            (["--lower", "2", "--upper", "1"], "invalid window"),
            (["--grid-points", "1"], "invalid grid"),
            (["--multistart", "0"], "--multistart"),
            (["--sqrt-transform"], "non-negative"),
        ],
    )
    def test_bad_options(self, capsys, extra, message):
        code, _, err = run(capsys, ["fit", "--input", str(SAMPLE), "--column", "value", *extra])
        assert code == 1 and message in err

    @pytest.mark.parametrize(
        "argv",
        [
            ["fit", "--input", str(SAMPLE), "--method", "bayes"],
            ["fit", "--input", str(SAMPLE), "--upper", "lots"],
            ["fit"],
            ["simulate"],
        ],
    )
    def test_usage_errors_exit_1(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 1
        assert "error:" in capsys.readouterr().err

    def test_non_converged_exit_code(self, monkeypatch, capsys):
        import tsnkit.cli as cli

        real = cli.fit

        def no_converge(*args, **kwargs):
            res = real(*args, **kwargs)
            res.converged = False
            return res

        monkeypatch.setattr(cli, "fit", no_converge)
        code, out, _ = run(capsys, ["fit", *FIT_ARGS])
        assert code == 2 and json.loads(out)["converged"] is False


BOOT_ARGS = ["bootstrap", *FIT_ARGS, "--bootstrap-B", "3"]


class TestBootstrap:
    def test_golden_document(self, capsys):
        code, out, _ = run(capsys, [*BOOT_ARGS, "--seed", "5"])
        assert code == 0
        same_schema(json.loads(out), json.loads((DATA / "golden_bootstrap.json").read_text()))

    def test_deterministic(self, capsys):
        argv = [*BOOT_ARGS[:-1], "2", "--seed", "7"]
        first = run(capsys, argv)
        assert first[0] == 0 and run(capsys, argv) == first
        doc = json.loads(first[1])
        assert doc["B"] == 2 and all(v >= 0 for v in doc["se"].values())

    def test_seed_changes_se_only(self, capsys):
        a = json.loads(run(capsys, [*BOOT_ARGS, "--seed", "1"])[1])
        b = json.loads(run(capsys, [*BOOT_ARGS, "--seed", "2"])[1])
        assert a["estimate"] == b["estimate"]
        assert a["se"] != b["se"]
        assert (a["seed"], b["seed"]) == (1, 2)

    def test_workers(self, capsys):
        a = run(capsys, [*BOOT_ARGS, "--workers", "1"])
        b = run(capsys, [*BOOT_ARGS, "--workers", "2"])
        assert a == b

    def test_b_too_small(self, capsys):
        code, _, err = run(capsys, [*BOOT_ARGS[:-1], "1"])
        assert code == 1 and "B >= 2" in err


SCENARIO = """\
[cell]
direction = right
tau = 0.1
alpha0 = 2
n = 60
reps = 4
grid = 5,21
seed = 1
"""


class TestSimulate:
    def test_reproducible(self, tmp_path, capsys):
        f = tmp_path / "s.ini"
        f.write_text(SCENARIO)
        code, out, _ = run(capsys, ["simulate", str(f), "--reps", "2", "--out-dir", str(tmp_path / "a")])
        assert code == 0
        assert [Path(p).name for p in out.split()] == ["cell.csv", "combined.csv"]
        run(capsys, ["simulate", str(f), "--reps", "2", "--out-dir", str(tmp_path / "b"), "--workers", "2"])
        for name in ("cell.csv", "combined.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        lines = (tmp_path / "a" / "cell.csv").read_text().splitlines()
        assert len(lines) == 4
        n_used, failures = map(int, lines[1].split(",")[-2:])
        assert n_used + failures == 2

    def test_unknown_method(self, tmp_path, capsys):
        f = tmp_path / "s.ini"
        f.write_text(SCENARIO + "methods = grid-mom, bayes\n")
        code, _, err = run(capsys, ["simulate", str(f), "--out-dir", str(tmp_path)])
        assert code == 1 and ":9:" in err and "'methods'" in err

    def test_bad_reps(self, tmp_path, capsys):
        f = tmp_path / "s.ini"
        f.write_text(SCENARIO)
        code, _, err = run(capsys, ["simulate", str(f), "--reps", "0"])
        assert code == 1 and "--reps" in err


def test_module_entry_point():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "tsnkit", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "fit" in out.stdout and "simulate" in out.stdout
