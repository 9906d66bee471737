import json
from pathlib import Path

import pytest

from tangent_tomography.cli import main
from tangent_tomography.config import load_config, parse_config
from tangent_tomography.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE = """body: {type: ball, dim: 2}
family: {constant: 0.5}
experiment: {mode: sections, k: 1, l: 1, directions: 8}
"""


@pytest.mark.parametrize("text,field,line", [
    ("body: {type: ball, dim: 3}\nfamily: {constant: 1.0}\nexperiment:\n  mode: sections\n  k: 2\n  l: 1\n",
     "experiment.k", 5),
    (BASE + "epsilon: {start: -1}\n", "epsilon.start", 4),
    ("body: {type: cube, dim: 2}\n", "body.type", 1),
    ("body: {type: ball, dim: 2}\nfamily: {constant: 0.5}\nexperiment: {mode: cap_volume, k: 3}\n",
     "experiment.k", 3),
    (BASE + "bogus: 3\n", "bogus", 4),
])
def test_config_errors_carry_field_and_line(text, field, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text, Path("."))
    assert info.value.field == field and info.value.line == line
    assert f"line {line}" in str(info.value)


def test_invalid_yaml_and_missing_file(tmp_path):
    with pytest.raises(ConfigError) as info:
        parse_config("body: [\n", Path("."))
    assert info.value.line is not None
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")


def test_valid_config_round_trip():
    cfg = load_config(CONFIGS / "ball2d_sections.yaml")
    assert (cfg.d, cfg.l, cfg.k) == (2, 1, 1)
    assert cfg.with_seed(9).seed == 9 and cfg.seed == 0
    family = cfg.build_family(cfg.build_body())
    assert float(family.speed([[1.0, 0.0]])[0]) == 0.5


def run(args, tmp_path, name="out"):
    out = tmp_path / name
    code = main(list(args) + ["--out", str(out)])
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, out, report


def test_verify_theorem1_passes(tmp_path):
    code, out, rep = run(["verify-theorem1", "--config", str(CONFIGS / "ball2d_sections.yaml")], tmp_path)
    assert code == 0 and rep["passed"] and rep["rms_rel_error"] < 0.01
    for f in ("measurements.csv", "plot_data.csv", "limits.csv", "field.csv", "flats.csv"):
        assert (out / f).stat().st_size > 0


def test_verify_theorem4_uses_cap_exponent(tmp_path):
    code, _, rep = run(["verify-theorem4", "--config", str(CONFIGS / "ball2d_cap_volume.yaml")], tmp_path)
    assert code == 0 and rep["alpha"] == 1.5


def test_config_error_exit_code(tmp_path, capsys):
    code, _, _ = run(["recover", "--config", str(CONFIGS / "bad_k_gt_l.yaml")], tmp_path)
    assert code == 2
    assert "experiment.k" in capsys.readouterr().err


def test_wrong_command_for_mode(tmp_path):
    code, _, _ = run(["verify-theorem4", "--config", str(CONFIGS / "ball2d_sections.yaml")], tmp_path)
    assert code == 2


def test_odd_symmetry_exit_code(tmp_path):
    code, out, rep = run(["symmetry", "--config", str(CONFIGS / "symmetry_odd.yaml")], tmp_path)
    assert code == 1 and not rep["certificate"]["passed"]
    assert (out / "symmetry_pairs.csv").exists()


def test_bit_identical_outputs(tmp_path):
    cfg = str(CONFIGS / "ball2d_cap_volume.yaml")
    run(["recover", "--config", cfg], tmp_path, "a")
    run(["recover", "--config", cfg, "--jobs", "2"], tmp_path, "b")
    for f in ("measurements.csv", "plot_data.csv", "limits.csv", "field.csv", "report.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_seed_override(tmp_path):
    _, _, rep = run(["recover", "--config", str(CONFIGS / "ball2d_sections.yaml"), "--seed", "17"],
                    tmp_path)
    assert rep["seed"] == 17
    code, _, _ = run(["recover", "--config", str(CONFIGS / "ball2d_sections.yaml"), "--seed", "-1"],
                     tmp_path, "neg")
    assert code == 2


def test_santalo_demo(tmp_path):
    code, _, rep = run(["santalo-demo", "--config", str(CONFIGS / "ball2d_sections.yaml")], tmp_path)
    assert code == 0 and rep["applicable"]
    assert rep["synthetic_field_min"] == pytest.approx(0.5) and rep["synthetic_field_max"] == pytest.approx(0.5)


def test_properties_single_suite(tmp_path, capsys):
    code, _, rep = run(["properties", "--suite", "paraboloid", "--suite", "embedding"], tmp_path)
    assert code == 0 and set(rep["suites"]) == {"paraboloid cap / cylinder = 2/(d+1)",
                                                 "embedding invariance"}
    assert "PASS embedding invariance" in capsys.readouterr().out
