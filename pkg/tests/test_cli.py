import csv
import io
import re
import shlex
import shutil
from pathlib import Path

import pytest

from ifm import cli
from ifm.optics import build_mzi
from ifm.output import rows_to_svg
from ifm.scenario import dump_scenario

README = Path(__file__).resolve().parent.parent / "README.md"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestRun:
    def test_ev_bomb(self, capsys):
        code, out, _ = run(capsys, "run", "ev", "--R", "0.5", "--bomb")
        assert code == 0
        assert out.strip() == "ev: D1 0.25, D2 0.25, explosion 0.5"

    def test_validation_error(self, capsys):
        code, _, err = run(capsys, "run", "ev", "--R", "1.5")
        assert code == cli.EXIT_VALIDATION
        assert "outside [0, 1]" in err

    def test_unknown_protocol(self, capsys):
        code, _, err = run(capsys, "run", "teleport")
        assert code == cli.EXIT_UNKNOWN_PROTOCOL
        assert "unknown protocol" in err

    def test_unknown_parameter(self, capsys):
        code, _, err = run(capsys, "run", "zeno", "--Q", "3")
        assert code == cli.EXIT_VALIDATION
        assert "unknown parameter" in err

    def test_non_numeric(self, capsys):
        assert run(capsys, "run", "zeno", "--N", "ten")[0] == cli.EXIT_VALIDATION

    def test_conditioning_error_code(self, capsys, monkeypatch):
        from ifm.amplitude import ConditioningError

        def boom(p, seed):
            raise ConditioningError("conditioning on measure-zero event")

        monkeypatch.setattr(cli.PROTOCOLS["dicke"], "run", boom)
        code, _, err = run(capsys, "run", "dicke")
        assert code == cli.EXIT_CONDITIONING
        assert "measure-zero" in err

    @pytest.mark.parametrize("proto", list(cli.PROTOCOLS))
    def test_every_protocol_defaults(self, capsys, proto):
        code, out, _ = run(capsys, "run", proto)
        assert code == 0
        assert out.startswith(f"{proto}: ")

    def test_single_row_csv(self, capsys):
        code, out, _ = run(capsys, "run", "cavity", "--format", "csv")
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "r,M,object,p_reflect,p_transmit,p_absorb"
        assert lines[1].startswith("0.9,3,false,")
        assert lines[2].startswith("cavity: ")

    def test_csv_file_two_lines(self, capsys, tmp_path):
        path = tmp_path / "ev.csv"
        assert run(capsys, "run", "ev", "--bomb", "--format", "csv", "--output", str(path))[0] == 0
        assert len(path.read_text().splitlines()) == 2

    def test_unwritable_path(self, capsys, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        code, _, err = run(capsys, "run", "ev", "--format", "csv", "--output", str(blocker / "sub" / "o.csv"))
        assert code == cli.EXIT_OUTPUT
        assert "cannot write" in err


class TestSweep:
    def test_zeno_monotone(self, capsys):
        code, out, err = run(capsys, "sweep", "zeno", "--N", "1..200", "--format", "csv")
        assert code == 0
        rows = read_csv(out)
        assert [int(r["N"]) for r in rows] == list(range(1, 201))
        succ = [float(r["p_success"]) for r in rows]
        assert all(b > a for a, b in zip(succ, succ[1:]))
        assert "200 points" in err

    def test_float_range(self, capsys):
        code, out, _ = run(capsys, "sweep", "ev-iterated", "--R", "0.1..0.5:0.1", "--format", "csv")
        assert code == 0
        assert [r["R"] for r in read_csv(out)] == ["0.1", "0.2", "0.3", "0.4", "0.5"]

    def test_list(self, capsys):
        code, out, _ = run(capsys, "sweep", "cavity", "--M", "1,10,100", "--format", "csv")
        refl = [float(r["p_reflect"]) for r in read_csv(out)]
        assert code == 0 and refl == sorted(refl, reverse=True)

    def test_needs_one_range(self, capsys):
        assert run(capsys, "sweep", "zeno", "--N", "5")[0] == cli.EXIT_VALIDATION

    def test_deterministic_bytes(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            run(capsys, "sweep", "ev-iterated", "--R", "0.1,0.5", "--trials", "5000", "--seed", "3", "--format", "csv", "--output", str(p))
        assert a.read_bytes() == b.read_bytes()

    def test_svg_stable_and_monotone(self, capsys, tmp_path):
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        for p in (a, b):
            assert run(capsys, "sweep", "zeno", "--N", "1..50", "--format", "svg", "--output", str(p))[0] == 0
        text = a.read_text()
        assert a.read_bytes() == b.read_bytes()
        assert text.startswith("<svg") and "<polyline" in text
        assert ">N<" in text
        # first polyline is p_success; y in SVG coordinates shrinks as the curve rises
        pts = re.search(r'<polyline[^>]*points="([^"]+)"', text).group(1).split()
        ys = [float(p.split(",")[1]) for p in pts]
        assert all(b <= a for a, b in zip(ys, ys[1:]))

    def test_empty_svg_refused(self, capsys, tmp_path):
        code, _, err = run(capsys, "sweep", "zeno", "--N", "5..1", "--format", "svg", "--output", str(tmp_path / "x.svg"))
        assert code == cli.EXIT_VALIDATION
        assert "empty" in err
        with pytest.raises(ValueError):
            rows_to_svg([], "N", ["p_success"])


class TestConfig:
    def test_file_and_override(self, capsys, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text("protocol: ev\nparams: {R: 0.5, bomb: true}\noutput: {format: csv}\n")
        code, out, _ = run(capsys, "run", "--config", str(cfg))
        assert code == 0 and "0.25" in out
        code, out, _ = run(capsys, "run", "--config", str(cfg), "--R", "0.1")
        assert read_csv(out.split("ev:")[0])[0]["R"] == "0.1"

    def test_malformed(self, capsys, tmp_path):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("protocol: ev\ncolour: blue\n")
        assert run(capsys, "run", "--config", str(cfg))[0] == cli.EXIT_MALFORMED
        cfg.write_text("protocol: [ev\n")
        assert run(capsys, "run", "--config", str(cfg))[0] == cli.EXIT_MALFORMED
        assert run(capsys, "run", "--config", str(tmp_path / "missing.yaml"))[0] == cli.EXIT_MALFORMED

    def test_env_output_dir(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path))
        assert run(capsys, "run", "zeno", "--N", "10", "--format", "csv")[0] == 0
        assert (tmp_path / "zeno.csv").read_text().startswith("N,object,p_success")


class TestTrace:
    def scenario(self, tmp_path, **kw):
        circuit, _ = build_mzi(0.5, **kw)
        path = tmp_path / "mzi.yaml"
        dump_scenario(circuit, path)
        return path

    def test_bomb_trace(self, capsys, tmp_path):
        path = self.scenario(tmp_path, object_t=0.0)
        code, out, _ = run(capsys, "trace", str(path), "--postselect", "D2")
        assert code == 0
        rows = {r["mode"]: r for r in read_csv(out)}
        assert all(float(v) == 0 for k, v in rows["lower"].items() if k not in ("mode", "slice_0"))

    def test_impossible_postselection(self, capsys, tmp_path):
        path = self.scenario(tmp_path)
        code, _, err = run(capsys, "trace", str(path), "--postselect", "D2")
        assert code == cli.EXIT_POSTSELECTION
        assert "post-selection impossible" in err

    def test_missing_postselect(self, capsys, tmp_path):
        assert run(capsys, "trace", str(self.scenario(tmp_path)))[0] == cli.EXIT_MALFORMED

    def test_unknown_detector(self, capsys, tmp_path):
        path = self.scenario(tmp_path, object_t=0.0)
        assert run(capsys, "trace", str(path), "--postselect", "D9")[0] == cli.EXIT_MALFORMED

    def test_written_to_file(self, capsys, tmp_path):
        path = self.scenario(tmp_path, object_t=0.0)
        out_path = tmp_path / "t.csv"
        code, out, _ = run(capsys, "trace", str(path), "--postselect", "D2", "--output", str(out_path))
        assert code == 0 and "zero-trace cells" in out
        assert out_path.read_text().startswith("mode,slice_0")


class TestNested:
    def test_report(self, capsys):
        code, out, _ = run(capsys, "nested", "--R", "0.5")
        assert code == 0
        assert out.strip() == "nested: P(D2,D2) 0.0625, explosion 0.25, ABL object 1, photon 1, both 0"

    def test_no_interaction_undefined_abl(self, capsys):
        code, out, _ = run(capsys, "nested", "--no_interaction")
        assert code == 0
        assert "P(D2,D2) 0," in out and "nan" in out

    def test_bad_R(self, capsys):
        assert run(capsys, "nested", "--R", "1")[0] == cli.EXIT_VALIDATION


def _readme_commands():
    if not README.exists():
        return []
    cmds = []
    for block in re.findall(r"```(?:sh|bash|console)\n(.*?)```", README.read_text(), re.S):
        for line in block.splitlines():
            line = line.strip().removeprefix("$ ")
            if re.match(r"^(\w+=\S+ )*ifm ", line):
                cmds.append(line)
    return cmds


@pytest.mark.parametrize("command", _readme_commands())
def test_readme_commands_run(command, capsys, tmp_path, monkeypatch):
    # run in a scratch copy so README examples that write files leave the repo clean
    shutil.copytree(README.parent / "scenarios", tmp_path / "scenarios")
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(cli.OUTPUT_DIR_ENV, raising=False)
    env, _, rest = command.partition("ifm ")
    for assignment in shlex.split(env):
        key, _, value = assignment.partition("=")
        monkeypatch.setenv(key, value)
        Path(value).mkdir(parents=True, exist_ok=True)
    assert cli.main(shlex.split(rest)) == 0, command
