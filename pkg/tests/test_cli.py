import json

import pytest

from pnvcauchy.cli import main
from pnvcauchy.scenario import bundled_scenarios


def _write(tmp_path, name, text):
    p = tmp_path / f"{name}.toml"
    p.write_text(text)
    return str(p)


CIRCLE = """schema_version = 1
name = "{name}"
checks = [{checks}]

[chart]
extents = [[0, "2*pi"]]
points = 32
boundary = "periodic"

[generator]
kind = "circle_codazzi"
w = "{w}"
{extra}
"""


@pytest.mark.parametrize("name", bundled_scenarios())
def test_bundled_scenarios_verify(name, tmp_path):
    out = tmp_path / name
    assert main(["verify", "--scenario", name, "--out", str(out), "--threads", "1"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] and rep["exit_code"] == 0
    assert (out / "timings.json").exists()


def test_report_is_byte_stable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["evolve", "--scenario", "circle_codazzi_oracle", "--out", str(a)]) == 0
    assert main(["evolve", "--scenario", "circle_codazzi_oracle", "--out", str(b)]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "monitor.csv").read_bytes() == (b / "monitor.csv").read_bytes()


def test_spin_verb_rejects_one_dimension(tmp_path, capsys):
    path = _write(tmp_path, "c1", CIRCLE.format(name="c1", checks='"constraints"', w="0", extra=""))
    assert main(["spin", "--scenario", path, "--out", str(tmp_path / "o")]) == 2
    assert "chart" in capsys.readouterr().err


def test_spin_check_in_file_is_config_error(tmp_path, capsys):
    path = _write(tmp_path, "c2", CIRCLE.format(name="c2", checks='"spin"', w="0", extra=""))
    assert main(["check", "--scenario", path, "--out", str(tmp_path / "o")]) == 2
    assert "checks" in capsys.readouterr().err


def test_bad_toml_is_config_error(tmp_path, capsys):
    path = _write(tmp_path, "bad", "schema_version = 1\n[chart\n")
    assert main(["check", "--scenario", path, "--out", str(tmp_path / "o")]) == 2
    assert "bad.toml" in capsys.readouterr().err


def test_nonzero_mean_is_config_error(tmp_path):
    path = _write(tmp_path, "m", CIRCLE.format(name="m", checks='"constraints"', w="0.1 + sin(x1)", extra=""))
    assert main(["check", "--scenario", path, "--out", str(tmp_path / "o")]) == 2


def test_constraint_violation_exit_code(tmp_path):
    extra = "[tolerances]\nC = 1e-9\n"
    path = _write(tmp_path, "v", CIRCLE.format(name="v", checks='"constraints"', w="0.3*sin(x1)", extra=extra))
    assert main(["check", "--scenario", path, "--out", str(tmp_path / "o")]) == 3


def test_evolution_abort_exit_code(tmp_path):
    extra = "[evolution]\nsystem = \"pnv_a\"\nt_end = 1.0\ndt = 0.01\n"
    path = _write(tmp_path, "f", CIRCLE.format(name="f", checks='"constraints", "evolve"', w="2*sin(x1)",
                                               extra=extra))
    assert main(["evolve", "--scenario", path, "--out", str(tmp_path / "o")]) == 4


def test_verification_failure_exit_code(tmp_path):
    extra = "[evolution]\nt_end = 0.5\ndt = 0.1\n[tolerances]\noracle = 1e-16\n"
    path = _write(tmp_path, "o", CIRCLE.format(name="o", checks='"constraints", "evolve"', w="0.3*sin(x1)",
                                               extra=extra))
    out = tmp_path / "o"
    assert main(["evolve", "--scenario", path, "--out", str(out)]) == 5
    rep = json.loads((out / "report.json").read_text())
    assert rep["exit_code"] == 5 and not rep["passed"]


def test_invalid_flags(tmp_path):
    assert main(["check", "--scenario", "flat_trivial", "--threads", "0", "--out", str(tmp_path)]) == 2
    assert main(["check", "--scenario", "flat_trivial", "--seed", "-3", "--out", str(tmp_path)]) == 2


def test_dump_schema(tmp_path, capsys):
    assert main(["dump-schema"]) == 0
    schema = json.loads(capsys.readouterr().out)
    assert schema
    assert main(["dump-schema", "--out", str(tmp_path / "s.json")]) == 0
    assert json.loads((tmp_path / "s.json").read_text()) == schema


def test_convergence_verb(tmp_path):
    extra = "[convergence]\nladder = [16, 32, 64]\n"
    path = _write(tmp_path, "cv", CIRCLE.format(name="cv", checks='"constraints"', w="0.3*sin(x1)", extra=extra))
    out = tmp_path / "cv"
    assert main(["convergence", "--scenario", path, "--out", str(out)]) == 0
    rows = (out / "convergence.csv").read_text().splitlines()
    assert rows[0] == "residual,N,h,error,order,status"
    assert len(rows) > 3


def test_random_block_check(tmp_path):
    text = "seed = 11\n" + CIRCLE.format(name="rb", checks='"constraints", "random_block"', w="0.3*sin(x1)",
                                         extra="")
    path = _write(tmp_path, "rb", text)
    out = tmp_path / "rb"
    assert main(["verify", "--scenario", path, "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["seed"] == 11
    assert [e["name"] for e in rep["checks"]["random_block_gcm"]["entries"]] == ["gauss", "codazzi", "mainardi"]


def test_dump_output(tmp_path):
    from pnvcauchy.fields import load_field
    text = CIRCLE.format(name="d", checks='"constraints", "evolve"', w="0.3*sin(x1)",
                         extra="[evolution]\nt_end = 0.2\ndt = 0.1\n[output]\ndump = true\n")
    out = tmp_path / "d"
    assert main(["evolve", "--scenario", _write(tmp_path, "d", text), "--out", str(out)]) == 0
    names = sorted(p.name for p in out.glob("*.pnvdump"))
    assert "g0.pnvdump" in names and "g_final.pnvdump" in names
    field, header = load_field(out / "g_final.pnvdump")
    assert header["extra"]["t"] == pytest.approx(0.2)
    assert field.data.shape == (1, 1, 32)
