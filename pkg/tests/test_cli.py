from __future__ import annotations

import json
import subprocess
import sys

import pytest

from toralmarkov.cli import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, EXIT_VERIFY, RunConfig, cmd_build, main
from toralmarkov.partition import build_partition, partition_to_json, perturb_cell
from toralmarkov.torus import TorusPoint, iterate


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    out = tmp_path_factory.mktemp("build")
    code = cmd_build(RunConfig((2, 1, 1, 1), beta=0.1, seed=42, out=str(out), svg=True))
    return code, out


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_build_succeeds(built):
    code, out = built
    assert code == EXIT_OK
    data = json.loads((out / "partition.json").read_text())
    assert data["matrix"] == [[2, 1], [1, 1]]
    assert set(data["budget"]) == {"rho", "epsilon", "delta", "beta", "alpha", "gamma"}
    assert data["diameter"] < 0.1
    assert all(set(c) >= {"base", "iu", "is", "flags"} for c in data["cells"])
    assert all(data["verification"].values())
    rows = (out / "matrix.csv").read_text().splitlines()
    assert len(rows) == len(data["cells"]) and all(len(r.split(",")) == len(rows) for r in rows)
    report = (out / "report.txt").read_text()
    assert "result: pass" in report
    assert (out / "partition.svg").read_text().startswith("<svg")


def test_build_is_deterministic(built, tmp_path):
    _, first = built
    assert cmd_build(RunConfig((2, 1, 1, 1), beta=0.1, seed=42, out=str(tmp_path))) == EXIT_OK
    for name in ("partition.json", "matrix.csv", "report.txt"):
        assert (first / name).read_bytes() == (tmp_path / name).read_bytes()


@pytest.mark.parametrize("matrix", ["1,0,0,1", "2,0,0,1", "1,1,0,1"])
def test_build_rejects_bad_matrices(capsys, tmp_path, matrix):
    code, _, err = run(capsys, "build", "--matrix", matrix, "--out", str(tmp_path))
    assert code == EXIT_INFEASIBLE and "error" in err


def test_build_rejects_large_beta(capsys, tmp_path):
    code, _, _ = run(capsys, "build", "--matrix", "2,1,1,1", "--beta", "0.7", "--out", str(tmp_path))
    assert code == EXIT_INFEASIBLE


@pytest.mark.parametrize("argv", [
    ["build", "--matrix", "2,1,1"],
    ["build", "--matrix", "2,1,1,1", "--beta", "abc"],
    ["frobnicate"],
])
def test_malformed_arguments(capsys, argv):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == EXIT_INPUT


def test_verify_own_output(built, capsys):
    _, out = built
    code, text, _ = run(capsys, "verify", "--in", str(out / "partition.json"), "--samples", "3")
    assert code == EXIT_OK and "result: pass" in text


def test_verify_catches_tampering(capsys, tmp_path, cat):
    P = perturb_cell(build_partition(cat, target=0.3), 2)
    data = {"matrix": [[2, 1], [1, 1]], **partition_to_json(P)}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    code, text, _ = run(capsys, "verify", "--in", str(path), "--samples", "3")
    assert code == EXIT_VERIFY and "result: FAIL" in text


def test_verify_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "verify", "--in", str(tmp_path / "nope.json"))
    assert code == EXIT_INPUT and "cannot read" in err


def test_code_and_decode(built, capsys, cat):
    _, out = built
    path = str(out / "partition.json")
    x = TorusPoint(0.1234, 0.5678)
    code, word, _ = run(capsys, "code", "--in", path, "--point", "0.1234,0.5678", "--depth", "6")
    assert code == EXIT_OK
    word = word.strip()
    assert len(word.split(",")) == 13
    code, text, _ = run(capsys, "decode", "--in", path, "--word", word, "--matrix-file", str(out / "matrix.csv"))
    assert code == EXIT_OK
    xy, radius = text.split(" +- ")
    px, py = map(float, xy.split(","))
    assert ((px - x.x) ** 2 + (py - x.y) ** 2) ** 0.5 <= 2 * float(radius) + 1e-12


def test_code_of_fixed_point(built, capsys):
    _, out = built
    path = str(out / "partition.json")
    code, text, _ = run(capsys, "code", "--in", path, "--point", "0,0", "--depth", "2", "--all-codes")
    lines = text.strip().splitlines()
    assert code == EXIT_OK and lines[0].startswith("boundary hit at j=0")
    words = lines[1:]
    assert words and all(len(set(w.split(","))) == 1 for w in words)
    code, text, _ = run(capsys, "decode", "--in", path, "--word", words[0])
    xy, radius = text.split(" +- ")
    px, py = map(float, xy.split(","))
    assert min(px, 1 - px) ** 2 + min(py, 1 - py) ** 2 <= float(radius) ** 2 * (1 + 1e-9)


def test_decode_rejects_bad_words(built, capsys):
    _, out = built
    path = str(out / "partition.json")
    assert run(capsys, "decode", "--in", path, "--word", "1,2")[0] == EXIT_INPUT
    assert run(capsys, "decode", "--in", path, "--word", "a,b,c")[0] == EXIT_INPUT
    assert run(capsys, "decode", "--in", path, "--word", "0,99999,0")[0] == EXIT_INPUT
    rows = (out / "matrix.csv").read_text().splitlines()
    j = next(k for k, v in enumerate(rows[0].split(",")) if v == "0")
    code = run(capsys, "decode", "--in", path, "--word", f"0,{j},{j}", "--matrix-file", str(out / "matrix.csv"))[0]
    assert code == EXIT_INPUT


def test_code_rejects_bad_point(built, capsys):
    _, out = built
    assert run(capsys, "code", "--in", str(out / "partition.json"), "--point", "zero")[0] == EXIT_INPUT


def test_shadow_exact_orbit(capsys, tmp_path, cat):
    x = TorusPoint(0.125, 0.375)
    lines = [f"{p.x!r} {p.y!r}" for p in (iterate(cat, x, n) for n in range(-5, 6))]
    path = tmp_path / "orbit.txt"
    path.write_text("# exact orbit\n" + "\n".join(lines) + "\n")
    code, text, _ = run(capsys, "shadow", "--input", str(path), "--matrix", "2,1,1,1")
    assert code == EXIT_OK
    assert text.splitlines()[0] == "point: 0.125,0.375"


def test_shadow_errors(capsys, tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0.1 0.2\n0.3\n0.5 0.5\n")
    assert run(capsys, "shadow", "--input", str(path), "--matrix", "2,1,1,1")[0] == EXIT_INPUT
    path.write_text("0.1 0.2\n0.3 0.4\n")
    assert run(capsys, "shadow", "--input", str(path), "--matrix", "2,1,1,1")[0] == EXIT_INPUT
    path.write_text("0.1 0.2\n0.3 0.4\n0.5 0.6\n")
    assert run(capsys, "shadow", "--input", str(path), "--matrix", "1,0,0,1")[0] == EXIT_INFEASIBLE
    assert run(capsys, "shadow", "--input", str(tmp_path / "missing"), "--matrix", "2,1,1,1")[0] == EXIT_INPUT


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "toralmarkov", "build", "--matrix", "1,0,0,1", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == EXIT_INFEASIBLE and "hyperbolic" in r.stderr.lower()
