import io
import json
import subprocess
import sys

import pytest

from cubeflag import cli

from test_cubes import interval_cube


def invoke(*argv):
    out = io.StringIO()
    code = cli.run(list(argv), out)
    return code, out.getvalue()


@pytest.fixture
def interval_file(tmp_path):
    path = tmp_path / "interval_cube.json"
    path.write_text(json.dumps(interval_cube().to_json()))
    return str(path)


def test_specseq_interval(interval_file):
    code, text = invoke("specseq", "--input", interval_file)
    assert code == 0
    doc = json.loads(text)
    assert doc["command"] == "specseq"
    res = doc["result"]
    assert res["convergence"]["status"] == "PASS"
    E1, E2 = res["pages"][0], res["pages"][1]
    assert E1["r"] == 1 and {(g["p"], g["q"], g["rank"]) for g in E1["groups"]} == {(1, -2, 2), (2, -2, 1)}
    assert [(g["p"], g["q"], g["rank"]) for g in E2["groups"]] == [(1, -2, 1)]
    h = {row["degree"]: row for row in res["cofiber_homology"]}
    assert h[1]["rank"] == 1 and h[0]["rank"] == 0


def test_j_invariant_pgl2():
    code, text = invoke("j-invariant", "--type", "A", "--rank", "1", "--lattice", "adjoint", "--prime", "2")
    assert code == 0
    assert json.loads(text)["result"] == {"r": 1, "degrees": [1], "j": [1]}


def test_unknown_type_exits_1(capsys):
    code, text = invoke("flag-chow", "--type", "Z", "--rank", "9")
    assert code == 1 and text == ""
    assert "Traceback" not in capsys.readouterr().err


def test_weyl_bound_exits_3():
    assert invoke("flag-chow", "--type", "E", "--rank", "8")[0] == 3
    assert invoke("flag-k0", "--type", "B", "--rank", "3", "--weyl-bound", "10")[0] == 3


def test_functoriality_failure_exits_2(tmp_path):
    C = {"lo": 0, "hi": 0, "dims": [1], "differentials": []}
    bad = {"m": 2, "entries": {"[]": C, "[1]": C, "[2]": C, "[1, 2]": C},
           "maps": {"[]->[1]": [[[1]]], "[]->[2]": [[[1]]], "[1]->[1, 2]": [[[1]]], "[2]->[1, 2]": [[[3]]]}}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert invoke("specseq", "--input", str(path))[0] == 2


@pytest.mark.parametrize("content", ["not json", "[1, 2]", '{"m": 1}',
                                     '{"m": 1, "entries": {"[]": {"lo": 0, "hi": 0, "dims": [1]}}}'])
def test_malformed_cube_exits_1(tmp_path, content):
    path = tmp_path / "cube.json"
    path.write_text(content)
    assert invoke("specseq", "--input", str(path))[0] == 1


def test_missing_arguments_exit_1():
    assert invoke("specseq")[0] == 1
    assert invoke("j-invariant", "--type", "A", "--rank", "1")[0] == 1
    assert invoke("j-invariant", "--type", "A", "--rank", "1", "--prime", "6")[0] == 1
    assert invoke("torsion-index")[0] == 1
    with pytest.raises(SystemExit) as err:
        invoke("no-such-command")
    assert err.value.code == 1
    assert invoke("group-ring", "--type", "A", "--rank", "1", "--jobs", "0")[0] == 1


def test_root_datum_from_file(tmp_path):
    path = tmp_path / "rd.json"
    path.write_text(json.dumps({"type": "A", "rank": 1, "lattice": "adjoint"}))
    code, text = invoke("torsion-index", "--input", str(path))
    assert code == 0 and json.loads(text)["result"] == {"per_degree": [1, 2], "tau": 2}
    path.write_text(json.dumps({"type": "A", "rank": 1, "lattice_basis": [[2]]}))
    assert json.loads(invoke("torsion-index", "--input", str(path))[1])["result"]["tau"] == 2
    path.write_text(json.dumps({"type": "A", "rank": 1, "lattice_basis": [[4]]}))
    assert invoke("torsion-index", "--input", str(path))[0] == 1


def test_group_ring_and_hat_ring():
    args = ["--type", "A", "--rank", "1", "--lattice", "adjoint"]
    g = json.loads(invoke("group-ring", *args)[1])["result"]
    h = json.loads(invoke("hat-ring", *args, "--image", "char")[1])["result"]
    assert [(d["d"], d["rank"], d["torsion"]) for d in g["degrees"]] == [(0, 1, []), (1, 0, [2])]
    assert g["degrees"] == h["degrees"] and g["total"] == h["total"]
    k = json.loads(invoke("group-ring", *args, "--theory", "k0")[1])["result"]
    assert k["total"] == {"rank": 1, "torsion": [2]}
    full = json.loads(invoke("hat-ring", *args, "--image", "full")[1])["result"]
    assert full["total"] == {"rank": 1, "torsion": []}


def test_image_files(tmp_path):
    args = ["--type", "A", "--rank", "1", "--lattice", "adjoint"]
    tits = tmp_path / "tits.json"
    tits.write_text(json.dumps({"m": {"s1": 1}}))
    res = json.loads(invoke("hat-ring", *args, "--theory", "k0", "--image", str(tits))[1])["result"]
    assert res["total"] == {"rank": 1, "torsion": []}
    assert invoke("hat-ring", *args, "--image", str(tits))[0] == 1  # Tits diagonal needs K0
    gens = tmp_path / "gens.json"
    gens.write_text(json.dumps({"generators": [[0, 1]]}))
    res = json.loads(invoke("j-invariant", *args, "--prime", "2", "--image", str(gens))[1])["result"]
    assert res["r"] == 0
    gens.write_text(json.dumps({"generators": [[0, 1, 0]]}))
    assert invoke("j-invariant", *args, "--prime", "2", "--image", str(gens))[0] == 1


def test_shape_failure_is_reported_not_raised():
    code, text = invoke("j-invariant", "--type", "A", "--rank", "2", "--prime", "2", "--image", "scalar")
    assert code == 0
    assert "shape_failure" in json.loads(text)["result"]


def test_tits_and_flag_commands():
    m = json.loads(invoke("tits-indexes", "--type", "A", "--rank", "1", "--lattice", "adjoint")[1])["result"]
    assert m == {"m": {"e": 1, "s1": 2}}
    k = json.loads(invoke("flag-k0", "--type", "A", "--rank", "2")[1])["result"]
    assert k["rank"] == 6 and abs(k["gram_determinant"]) == 1
    c = json.loads(invoke("flag-chow", "--type", "B", "--rank", "2")[1])["result"]
    assert c["ranks"] == [1, 2, 2, 2, 1]


def test_output_is_deterministic(interval_file):
    runs = [invoke("specseq", "--input", interval_file)[1] for _ in range(3)]
    assert runs[0] == runs[1] == runs[2]
    runs = [invoke("group-ring", "--type", "G", "--rank", "2", "--theory", "k0")[1] for _ in range(2)]
    assert runs[0] == runs[1]


def test_pretty_output(interval_file):
    plain = invoke("specseq", "--input", interval_file)[1]
    pretty = invoke("specseq", "--input", interval_file, "--pretty")[1]
    assert json.loads(plain) == json.loads(pretty) and "\n  " in pretty


def test_console_entry_point(interval_file):
    proc = subprocess.run([sys.executable, "-m", "cubeflag.cli", "specseq", "--input", interval_file],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["convergence"]["status"] == "PASS"
    bad = subprocess.run([sys.executable, "-m", "cubeflag.cli", "flag-chow", "--type", "Z", "--rank", "9"],
                         capture_output=True, text=True, check=False)
    assert bad.returncode == 1 and "Traceback" not in bad.stderr
