"""End-to-end checks of the command line entry points.

These drive the real runners through ``main()`` with small configs and
inspect the reports they write.  The exit-code contract matters for shell
use: bad input exits 1 with a message on stderr, a run whose mathematics
fails exits 2, and a clean run exits 0.
"""

import csv
import json
import subprocess

import pytest

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import wannloc
from wannloc.cli import main


LEMMA_CFG = """\
experiment = "lemma-sweep"
seed = 0

[set]
d = 1
extent = 200

[sweep]
s_values = [1.0]
R_values = [1, 2]
samples_per_cell = 3
sample_box = 2.0
"""

DECAY_CFG = """\
experiment = "decay"

[grid]
d = 1
L = 6.0
h = 0.125

[family]
type = "power-law"
p = 2.0

[sweep]
s_values = [1.2]
R_values = [1.0, 1.5, 2.0, 3.0]
"""

PIPELINE_CFG = """\
experiment = "model-pipeline"

[grid]
d = 1
L = 10.0
h = 0.03125

[model]
v0 = 100.0
a = 0.5
energy_cap = 50.0
gap_tol = 5.0

[deformation]
kind = "sin"
amplitude = 0.05

[sweep]
s_values = [1.0, 2.0]
R_values = [0.5, 1.0, 1.5, 2.0]
"""

PROBES_CFG = """\
experiment = "probes"

[grid]
d = 1
L = 8.0
h = 0.0625

[family]
spacing = 1.0
margin = 2.0
p = 1.5

[probes]
separations = [0.0625, 0.125, 0.25, 0.5, 0.75, 1.0, 1.125, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0, 3.25, 3.5]
truncation_radius = 1.0
trials = 2
"""


def write_config(directory, text, name="run.toml"):
    path = directory / name
    path.write_text(text)
    return path


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


def read_json(path):
    return json.loads(path.read_text())


# ---------------------------------------------------------------------------
# argument and config validation


def test_subcommand_is_required():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_unknown_subcommand_is_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_missing_config_file(tmp_path, capsys):
    rc = main(["decay", "--config", str(tmp_path / "nope.toml"), "--out", str(tmp_path)])
    assert rc == 1
    assert "config file not found" in capsys.readouterr().err


def test_unparseable_config(tmp_path, capsys):
    cfg = write_config(tmp_path, "experiment = [unclosed")
    rc = main(["decay", "--config", str(cfg), "--out", str(tmp_path)])
    assert rc == 1
    assert "cannot parse" in capsys.readouterr().err


def test_subcommand_must_match_config_experiment(tmp_path, capsys):
    cfg = write_config(tmp_path, LEMMA_CFG)
    rc = main(["decay", "--config", str(cfg), "--out", str(tmp_path)])
    assert rc == 1
    err = capsys.readouterr().err
    assert "declares experiment 'lemma-sweep'" in err
    assert "'decay' subcommand" in err


def test_output_directory_is_required(tmp_path, capsys):
    # LEMMA_CFG carries no `out` key, and we pass no --out
    cfg = write_config(tmp_path, LEMMA_CFG)
    rc = main(["lemma-sweep", "--config", str(cfg)])
    assert rc == 1
    assert "no output directory" in capsys.readouterr().err


@pytest.mark.parametrize("literal", ['"abc"', "true"])
def test_non_integer_seed_rejected(tmp_path, capsys, literal):
    cfg = write_config(tmp_path, LEMMA_CFG.replace("seed = 0", f"seed = {literal}"))
    rc = main(["lemma-sweep", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert rc == 1
    assert "seed must be an integer" in capsys.readouterr().err


def test_undersized_grid_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, DECAY_CFG.replace("L = 6.0", "L = 0.1"))
    rc = main(["decay", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "invalid [grid]" in err
    assert "at least 3 points" in err


def test_empty_exponent_list_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, DECAY_CFG.replace("s_values = [1.2]", "s_values = []"))
    rc = main(["decay", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert rc == 1
    assert "[sweep] s_values must be a nonempty list" in capsys.readouterr().err


def test_cutoffs_must_increase(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        DECAY_CFG.replace("R_values = [1.0, 1.5, 2.0, 3.0]", "R_values = [2.0, 1.0, 3.0, 4.0]"),
    )
    rc = main(["decay", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert rc == 1
    assert "R_values must be strictly increasing" in capsys.readouterr().err


def test_unknown_family_type_rejected(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        DECAY_CFG.replace('type = "power-law"\np = 2.0', 'type = "gaussian"'),
    )
    rc = main(["decay", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert rc == 1
    assert "unknown [family] type 'gaussian'" in capsys.readouterr().err


def test_exponent_below_half_dimension_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, DECAY_CFG.replace("s_values = [1.2]", "s_values = [0.4]"))
    rc = main(["decay", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert rc == 1
    assert "violates s > d/2" in capsys.readouterr().err


def test_exponent_beyond_certifiable_range_rejected(tmp_path, capsys):
    # p = 2 power-law tails carry no finite moment at s = 1.6 >= p - d/2
    cfg = write_config(tmp_path, DECAY_CFG.replace("s_values = [1.2]", "s_values = [1.6]"))
    rc = main(["decay", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "family not s-localized" in err
    assert "need s < p - d/2" in err


def test_too_few_cutoffs_surface_the_offending_exponent(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        DECAY_CFG.replace("R_values = [1.0, 1.5, 2.0, 3.0]", "R_values = [1.0, 2.0, 3.0]"),
    )
    rc = main(["decay", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "decay fit at s = 1.2" in err
    assert "four cutoffs" in err


def test_overstrong_deformation_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, PIPELINE_CFG.replace("amplitude = 0.05", "amplitude = 0.6"))
    rc = main(["model-pipeline", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "invalid [deformation]" in err
    assert "must stay below 1/2" in err


# ---------------------------------------------------------------------------
# lemma sweep


def test_lemma_sweep_passes_and_writes_reports(tmp_path, capsys):
    cfg = write_config(tmp_path, LEMMA_CFG)
    out = tmp_path / "out"
    rc = main(["lemma-sweep", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    assert "lemma-sweep: PASS" in capsys.readouterr().out

    resolved = tomllib.loads((out / "resolved_config.toml").read_text())
    assert resolved["experiment"] == "lemma-sweep"
    assert resolved["seed"] == 0
    assert resolved["set"] == {"d": 1, "extent": 200}
    assert resolved["sweep"]["samples_per_cell"] == 3

    rows = read_rows(out / "lemma_sweep.csv")
    assert len(rows) == 3 * 1 * 2  # samples_per_cell * |s_values| * |R_values|
    assert all(row["pass"] == "1" for row in rows)
    assert all(row["hypothesis_ok"] == "1" for row in rows)
    assert {row["R"] for row in rows} == {"1", "2"}

    summary = read_json(out / "summary.json")
    assert summary["passed"] is True
    assert summary["pass_rate"] == 1.0
    assert summary["rows"] == 6
    assert summary["rows_flagged"] == 0
    assert summary["worst_slack"] > 0

    meta = read_json(out / "run_metadata.json")
    assert meta["experiment"] == "lemma-sweep"
    assert meta["seed"] == 0
    assert meta["passed"] is True
    assert meta["version"] == wannloc.__version__
    assert "created" in meta


def test_lemma_sweep_flags_impossible_exponent(tmp_path, capsys):
    # s = 0.3 < d/2: the tail bound hypothesis fails, rows get flagged
    cfg = write_config(tmp_path, LEMMA_CFG.replace("s_values = [1.0]", "s_values = [0.3]"))
    out = tmp_path / "out"
    rc = main(["lemma-sweep", "--config", str(cfg), "--out", str(out)])
    assert rc == 2
    assert "lemma-sweep: FAIL" in capsys.readouterr().out

    summary = read_json(out / "summary.json")
    assert summary["passed"] is False
    assert summary["pass_rate"] is None
    assert summary["rows_flagged"] == summary["rows"]
    assert summary["rows_hypothesis_ok"] == 0


def test_reruns_reproduce_deterministic_artifacts(tmp_path):
    # run_metadata.json carries a timestamp; everything else is byte-stable
    cfg = write_config(tmp_path, LEMMA_CFG)
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["lemma-sweep", "--config", str(cfg), "--out", str(first)]) == 0
    assert main(["lemma-sweep", "--config", str(cfg), "--out", str(second)]) == 0
    for name in ("resolved_config.toml", "lemma_sweep.csv", "summary.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_seed_flag_overrides_config_seed(tmp_path):
    cfg = write_config(tmp_path, LEMMA_CFG)
    base, reseeded = tmp_path / "a", tmp_path / "b"
    assert main(["lemma-sweep", "--config", str(cfg), "--out", str(base)]) == 0
    assert main(["lemma-sweep", "--config", str(cfg), "--out", str(reseeded), "--seed", "7"]) == 0
    resolved = tomllib.loads((reseeded / "resolved_config.toml").read_text())
    assert resolved["seed"] == 7
    assert (base / "lemma_sweep.csv").read_bytes() != (reseeded / "lemma_sweep.csv").read_bytes()


# ---------------------------------------------------------------------------
# decay study


def test_decay_run_bounds_and_fits_every_exponent(tmp_path, capsys):
    cfg = write_config(tmp_path, DECAY_CFG)
    out = tmp_path / "out"
    rc = main(["decay", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    assert "decay: PASS" in capsys.readouterr().out

    rows = read_rows(out / "decay.csv")
    assert list(rows[0].keys()) == ["s", "R", "norm", "norm_sq", "bound", "bound_ok"]
    assert len(rows) == 4
    assert all(row["bound_ok"] == "1" for row in rows)
    norms = [float(row["norm"]) for row in rows]
    assert norms == sorted(norms, reverse=True)

    summary = read_json(out / "summary.json")
    assert summary["passed"] is True
    assert summary["family"] == "power-law(p=2.0)"
    assert summary["n_centers"] == 9
    report = summary["per_s"][0]
    assert report["status"] == "fit"
    assert report["slope_target"] == pytest.approx(-0.7)
    assert report["slope"] < -2  # measured decay is much steeper than required
    assert report["slope_pass"] and report["bound_pass"] and report["passed"]


def test_compactly_supported_family_reports_exact_tails(tmp_path):
    # every cutoff clears the support radius, so tails vanish identically
    # and no regression is attempted
    cfg = write_config(
        tmp_path,
        DECAY_CFG.replace('type = "power-law"\np = 2.0', 'type = "extremely-localized"').replace(
            "R_values = [1.0, 1.5, 2.0, 3.0]", "R_values = [1.0, 2.0, 3.0, 4.0]"
        ),
    )
    out = tmp_path / "out"
    assert main(["decay", "--config", str(cfg), "--out", str(out)]) == 0

    summary = read_json(out / "summary.json")
    assert summary["passed"] is True
    assert summary["family"] == "extremely-localized"
    assert summary["per_s"][0]["status"] == "exact"
    assert all(float(row["norm"]) == 0.0 for row in read_rows(out / "decay.csv"))


# ---------------------------------------------------------------------------
# model pipeline


def test_model_pipeline_report_chain(tmp_path, capsys):
    cfg = write_config(tmp_path, PIPELINE_CFG)
    out = tmp_path / "out"
    rc = main(["model-pipeline", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    assert "model-pipeline: PASS" in capsys.readouterr().out

    names = sorted(p.name for p in out.iterdir())
    assert names == [
        "decay.csv",
        "gwb_manifest.json",
        "islands.csv",
        "resolved_config.toml",
        "run_metadata.json",
        "spectrum.csv",
        "summary.json",
    ]

    summary = read_json(out / "summary.json")
    assert summary["passed"] is True
    assert all(summary["stages"].values())
    assert summary["beta"] == pytest.approx(0.9)  # alpha * (1 - 2 xi)
    assert summary["center_deviation"] < 0.1
    assert summary["discreteness_radius"] >= summary["discreteness_bound"]
    assert all(report["passed"] for report in summary["per_s"])

    manifest = read_json(out / "gwb_manifest.json")
    assert manifest["kind"] == "model-gwb"
    assert manifest["n_members"] == 9
    assert len(manifest["centers"]) == 9
    assert manifest["orthonormality_residual"] < 1e-8
    assert manifest["dropped_edge_members"] > 0


# ---------------------------------------------------------------------------
# propagation and compactness probes


def test_probe_windows_all_pass(tmp_path, capsys):
    cfg = write_config(tmp_path, PROBES_CFG)
    out = tmp_path / "out"
    rc = main(["probes", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    assert "probes: PASS" in capsys.readouterr().out

    summary = read_json(out / "summary.json")
    assert summary["passed"] is True
    assert [entry["operator"] for entry in summary["operators"]] == [
        "multiplication",
        "convolution",
        "projection",
        "truncated-intertwiner",
        "composed",
    ]
    for entry in summary["operators"]:
        assert entry["passed"] is True
        assert entry["measured_propagation"] <= entry["upper"]

    # each operator is probed at every separation
    rows = read_rows(out / "propagation.csv")
    assert len(rows) == 5 * 17
    compact = read_rows(out / "compactness.csv")
    assert all(row["within_cap"] == "1" for row in compact)


# ---------------------------------------------------------------------------
# console script


def test_console_script_runs_from_the_shell(tmp_path):
    cfg = write_config(tmp_path, LEMMA_CFG)
    out = tmp_path / "out"
    proc = subprocess.run(
        ["wannloc", "lemma-sweep", "--config", str(cfg), "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "lemma-sweep: PASS" in proc.stdout
    assert (out / "summary.json").exists()
