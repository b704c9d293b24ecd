import csv
import io
import json
import subprocess
import sys

import jsonschema
import pytest

from gqgames import cli, geometry


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--format", "json")
    report = json.loads(out)
    jsonschema.validate(report, cli.load_schema())
    return code, report


def test_schema_is_valid_draft_2020():
    jsonschema.Draft202012Validator.check_schema(cli.load_schema())


def test_geometry_report(capsys):
    code, report = run_json(capsys, "geometry")
    assert code == 0 and report["status"] == "ok"
    r = report["result"]
    assert (r["points"], r["lines"], r["negative_lines"]) == (27, 45, 9)
    assert r["negative_spread"] is True
    assert r["subgeometries"] == {"grid": 120, "doily": 36}
    assert report["config"] == {
        "geometry": "eloily", "players": 2, "seed": 0, "shots": 1000, "workers": 1, "format": "json",
    }
    assert "timing" not in report


def test_contextuality_report(capsys):
    code, report = run_json(capsys, "contextuality", "--geometry", "doily", "--workers", "3")
    r = report["result"]
    assert code == 0
    assert (r["d"], r["hv_bound"], r["assignments"]) == (3, 9, 32768)
    assert len(r["witness"]) == 15 and len(r["violated_lines"]) == 3


@pytest.mark.parametrize(
    "argv, value",
    [
        (("game", "classical", "--geometry", "grid"), "8/9"),
        (("game", "classical", "--geometry", "doily"), "13/15"),
        (("game", "classical"), "13/15"),
        (("game", "classical", "--players", "4"), "11/15"),
        (("game", "quantum", "--geometry", "doily-2q"), "1/1"),
        (("game", "quantum", "--shots", "200", "--protocol", "delegation"), "1/1"),
    ],
)
def test_game_values(capsys, argv, value):
    code, report = run_json(capsys, *argv, "--shots", "500")
    assert code == 0
    assert report["result"]["value"]["rational"] == value
    assert report["result"]["sampled"]["within_3_sigma"]


def test_classical_advantage_and_transcripts(capsys):
    _, report = run_json(capsys, "game", "classical", "--geometry", "doily", "--transcripts", "3")
    r = report["result"]
    assert r["advantage"]["rational"] == "2/15"
    assert r["sampled"]["transcripts"][0] == "point\tlines\tresponses\twin"
    assert len(r["sampled"]["transcripts"]) == 4


def test_json_is_deterministic(capsys):
    argv = ("game", "quantum", "--shots", "300", "--seed", "17", "--format", "json")
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second


def test_seed_changes_samples(capsys):
    _, a = run_json(capsys, "game", "classical", "--geometry", "doily", "--seed", "1")
    _, b = run_json(capsys, "game", "classical", "--geometry", "doily", "--seed", "2")
    assert a["result"]["sampled"]["wins"] != b["result"]["sampled"]["wins"]


def test_timing_flag(capsys):
    _, report = run_json(capsys, "contextuality", "--geometry", "grid", "--timing")
    assert "search" in report["timing"]


def test_csv_output(capsys):
    code, out, _ = run(capsys, "contextuality", "--geometry", "grid", "--format", "csv")
    rows = dict(csv.reader(io.StringIO(out)))
    assert code == 0
    assert rows["result.d"] == "1"
    assert rows["config.geometry"] == "grid"


def test_text_output_lists_defaults(capsys):
    code, out, _ = run(capsys, "contextuality", "--geometry", "grid")
    first = out.splitlines()[0]
    assert code == 0
    assert "seed=0" in first and "workers=1" in first
    assert "result.d: 1" in out


def test_output_file(tmp_path, capsys):
    target = tmp_path / "report.json"
    code, out, _ = run(capsys, "geometry", "--geometry", "doily", "--format", "json", "--output", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["result"]["points"] == 15


def test_invariant_report(capsys):
    code, report = run_json(capsys, "invariant", "--shots", "200")
    r = report["result"]
    assert code == 0
    assert {k: v["max"] for k, v in r["max_i3"].items()} == {"grid": 4, "doily": 9, "eloily": 27}
    assert r["i3_equals_chi"] == {"samples": 200, "passed": 200}


def test_geometry_file_input(tmp_path, capsys):
    path = tmp_path / "doily.txt"
    geometry.save(geometry.build_doily(), path)
    code, report = run_json(capsys, "contextuality", "--geometry", str(path))
    assert code == 0 and report["result"]["d"] == 3


@pytest.mark.parametrize(
    "argv",
    [
        ("geometry", "--geometry", "nowhere"),
        ("game", "classical", "--geometry", "doily", "--players", "4"),
        ("contextuality", "--geometry", "w52"),
        ("game", "quantum", "--geometry", "mermin", "--protocol", "delegation"),
        ("game", "classical", "--protocol", "delegation"),
        ("verify-all", "--only", "0"),
        ("verify-all", "--only", "x"),
        ("verify-all", "--geometry", "doily"),
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and out == ""
    assert err.startswith("gqgames: error:")


def test_corrupted_geometry_file_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("XXI IXX XIX +1\nXXI IXQ XIX +1\n")
    code, _, err = run(capsys, "geometry", "--geometry", str(path))
    assert code == 2 and "line 2" in err


@pytest.mark.parametrize("flag", [["--shots", "0"], ["--workers", "-1"], ["--players", "3"], ["--seed", "-5"]])
def test_argparse_rejects_bad_numbers(flag):
    with pytest.raises(SystemExit) as exc:
        cli.main(["geometry", *flag])
    assert exc.value.code == 2


def test_verify_all_subset(capsys):
    code, report = run_json(capsys, "verify-all", "--only", "1,2", "--quiet")
    assert code == 0
    assert (report["result"]["passed"], report["result"]["total"]) == (2, 2)


def test_verify_all_reports_corrupted_golden_file(tmp_path, capsys):
    good = geometry.data_path("eloily_yyy.txt").read_text().splitlines()
    # flip one stored sign
    k = next(i for i, row in enumerate(good) if row.endswith("+1"))
    good[k] = good[k][:-2] + "-1"
    path = tmp_path / "corrupt.txt"
    path.write_text("\n".join(good) + "\n")
    code, out, err = run(capsys, "verify-all", "--only", "1", "--geometry", str(path), "--format", "json")
    report = json.loads(out)
    assert code == 1 and report["status"] == "fail"
    assert "[FAIL] 1.geometry-golden" in err
    assert report["result"]["criteria"][0]["details"]["matches_file"] is False


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "gqgames", "contextuality", "--geometry", "grid", "--format", "json"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["d"] == 1
