import numpy as np
import pytest

from pefno.cli import EXIT_CONVERGENCE, EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from pefno.container import read_channels


def run(*args):
    return main(list(args))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A small end-to-end run shared by the command tests."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    runs = root / "runs"
    code = run(
        "gen-data",
        "--out",
        str(data),
        "grid.n1=16",
        "grid.n2=16",
        "data.n=4",
        "micro.grains_min=3",
        "micro.grains_max=6",
        "seed=9",
    )
    assert code == EXIT_OK
    code = run(
        "train",
        "--dataset",
        str(data),
        "--out",
        str(runs / "train"),
        "grid.n1=16",
        "grid.n2=16",
        "fno.layers=1",
        "fno.width=4",
        "fno.modes=3",
        "fno.head=encoded",
        "train.epochs=2",
        "train.batch=2",
        "seed=9",
    )
    assert code == EXIT_OK
    return root, data, runs


class TestGenMicro:
    def test_deterministic_output(self, tmp_path):
        args = ["micro.count=2", "grid.n1=16", "grid.n2=16", "seed=7"]
        assert run("gen-micro", "--out", str(tmp_path / "a"), *args) == EXIT_OK
        assert run("gen-micro", "--out", str(tmp_path / "b"), *args) == EXIT_OK
        for name in ("micro_0000.pefno", "micro_0001.pefno"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert (tmp_path / "a" / "manifest.txt").exists()

    def test_zero_count_is_usage_error(self, tmp_path):
        assert run("gen-micro", "--out", str(tmp_path), "micro.count=0") == EXIT_USAGE

    def test_unknown_key_is_usage_error(self, tmp_path):
        assert run("gen-micro", "--out", str(tmp_path), "bogus.key=1") == EXIT_USAGE

    def test_properties_in_documented_ranges(self, tmp_path):
        assert (
            run(
                "gen-micro",
                "--out",
                str(tmp_path),
                "micro.count=1",
                "grid.n1=16",
                "grid.n2=16",
            )
            == EXIT_OK
        )
        _, _, chans = read_channels(tmp_path / "micro_0000.pefno")
        assert chans[0].min() >= 50.0 and chans[0].max() <= 300.0
        assert chans[1].min() >= 0.2 and chans[1].max() <= 0.4


class TestGenDataAndVerify:
    def test_dataset_verifies_clean(self, workspace):
        _, data, _ = workspace
        assert run("verify", "--dataset", str(data)) == EXIT_OK

    def test_rerun_is_bit_identical(self, workspace, tmp_path):
        _, data, _ = workspace
        code = run(
            "gen-data",
            "--out",
            str(tmp_path / "again"),
            "grid.n1=16",
            "grid.n2=16",
            "data.n=4",
            "micro.grains_min=3",
            "micro.grains_max=6",
            "seed=9",
        )
        assert code == EXIT_OK
        for f in sorted(data.glob("*.pefno")):
            assert f.read_bytes() == (tmp_path / "again" / f.name).read_bytes()

    def test_corruption_detected(self, workspace, tmp_path):
        import shutil

        _, data, _ = workspace
        broken = tmp_path / "broken"
        shutil.copytree(data, broken)
        target = broken / "sample_0002_stress.pefno"
        raw = bytearray(target.read_bytes())
        raw[-3] ^= 0x55
        target.write_bytes(bytes(raw))
        assert run("verify", "--dataset", str(broken)) == EXIT_DATA

    def test_missing_dataset_is_data_error(self, tmp_path):
        assert run("verify", "--dataset", str(tmp_path / "nope")) == EXIT_DATA

    def test_unreachable_tolerance_is_convergence_error(self, tmp_path):
        code = run(
            "gen-data",
            "--out",
            str(tmp_path / "d"),
            "grid.n1=16",
            "grid.n2=16",
            "data.n=1",
            "solver.tol=1e-15",
            "solver.max_iter=3",
            "solver.redraw_budget=2",
        )
        assert code == EXIT_CONVERGENCE

    def test_corrupt_magic_is_data_error(self, workspace, tmp_path):
        import shutil

        _, data, _ = workspace
        broken = tmp_path / "magic"
        shutil.copytree(data, broken)
        target = broken / "sample_0000_material.pefno"
        raw = bytearray(target.read_bytes())
        raw[0] = ord("X")
        target.write_bytes(bytes(raw))
        code = run(
            "train",
            "--dataset",
            str(broken),
            "--out",
            str(tmp_path / "t"),
            "train.epochs=1",
        )
        assert code == EXIT_DATA


class TestTrainAndEval:
    def test_artifacts_present(self, workspace):
        _, _, runs = workspace
        out = runs / "train"
        assert (out / "metrics.csv").exists()
        assert (out / "checkpoint_final" / "manifest.txt").exists()
        assert (out / "manifest.txt").exists()
        header = (out / "metrics.csv").read_text().splitlines()[0]
        assert header.startswith("epoch,L_dat,L_div")

    def test_metrics_rerun_byte_identical(self, workspace, tmp_path):
        _, data, runs = workspace
        code = run(
            "train",
            "--dataset",
            str(data),
            "--out",
            str(tmp_path / "t2"),
            "grid.n1=16",
            "grid.n2=16",
            "fno.layers=1",
            "fno.width=4",
            "fno.modes=3",
            "fno.head=encoded",
            "train.epochs=2",
            "train.batch=2",
            "seed=9",
        )
        assert code == EXIT_OK
        assert (tmp_path / "t2" / "metrics.csv").read_bytes() == (
            runs / "train" / "metrics.csv"
        ).read_bytes()

    def test_eval_summary_matches_dumped_fields(self, workspace, tmp_path):
        _, data, runs = workspace
        out = tmp_path / "eval"
        code = run(
            "eval",
            "--checkpoint",
            str(runs / "train" / "checkpoint_final"),
            "--dataset",
            str(data),
            "--sample",
            "1",
            "--out",
            str(out),
        )
        assert code == EXIT_OK
        _, _, errs = read_channels(out / "error_fields.pefno")
        _, _, divs = read_channels(out / "div_rows.pefno")
        summary = dict(
            line.split("=")
            for line in (out / "summary.txt").read_text().splitlines()
            if "=" in line
        )
        for i, name in enumerate(("p11", "p12", "p21", "p22", "p33")):
            assert float(summary[f"mae_{name}_mpa"]) == pytest.approx(
                errs[i].mean(), rel=1e-12
            )
        assert float(summary["max_abs_div_mpa_per_l"]) == pytest.approx(
            np.abs(divs).max(), rel=1e-12, abs=1e-300
        )
        # encoded checkpoint: the dumped divergence is machine-precision zero
        assert np.abs(divs).max() < 1e-6

    def test_bad_sample_index_is_usage_error(self, workspace, tmp_path):
        _, data, runs = workspace
        code = run(
            "eval",
            "--checkpoint",
            str(runs / "train" / "checkpoint_final"),
            "--dataset",
            str(data),
            "--sample",
            "99",
            "--out",
            str(tmp_path / "e"),
        )
        assert code == EXIT_USAGE


class TestExportPlots:
    def test_constant_field_is_single_color(self, tmp_path):
        from pefno.container import write_channels

        src = tmp_path / "const.pefno"
        write_channels(src, np.full((1, 8, 8), 3.25))
        out = tmp_path / "plots"
        assert run("export-plots", "--out", str(out), str(src)) == EXIT_OK
        ppm = (out / "const_ch0.ppm").read_bytes()
        header_end = ppm.index(b"255\n") + 4
        pixels = ppm[header_end:]
        assert len(set(pixels[i : i + 3] for i in range(0, len(pixels), 3))) == 1
        ranges = (out / "ranges.txt").read_text()
        assert "min=3.25" in ranges and "max=3.25" in ranges

    def test_ranges_match_field_extrema_and_bytes_deterministic(self, tmp_path, rng):
        from pefno.container import write_channels

        src = tmp_path / "f.pefno"
        field = rng.normal(size=(2, 8, 8))
        write_channels(src, field)
        out1, out2 = tmp_path / "p1", tmp_path / "p2"
        assert run("export-plots", "--out", str(out1), str(src)) == EXIT_OK
        assert run("export-plots", "--out", str(out2), str(src)) == EXIT_OK
        for c in range(2):
            name = f"f_ch{c}.ppm"
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        text = (out1 / "ranges.txt").read_text()
        assert format(field[0].min(), ".17g") in text
        assert format(field[0].max(), ".17g") in text

    def test_no_inputs_is_usage_error(self, tmp_path):
        assert run("export-plots", "--out", str(tmp_path)) == EXIT_USAGE
