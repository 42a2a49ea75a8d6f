import json

import pytest

from torelli_fiber.cli import _cache_dir, main
from torelli_fiber.serialize import dumps, stratum_to_json


@pytest.fixture
def forked_file(tmp_path, forked):
    path = tmp_path / "forked.json"
    path.write_text(dumps(stratum_to_json(forked)))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_strata_json(capsys):
    code, out, _ = run(capsys, "strata", "--g", "3", "--parts", "2,1")
    body = json.loads(out)
    assert code == 0
    assert body["parts"] == [1, 2] and len(body["strata"]) == 3


def test_strata_other_formats(capsys):
    code, out, _ = run(capsys, "strata", "--g", "2", "--parts", "1,1", "--format", "tsv")
    assert code == 0 and out.splitlines()[0] == "index\tedges\tvertices\tcanonical"
    assert len(out.splitlines()) == 2
    code, out, _ = run(capsys, "strata", "--g", "2", "--parts", "1,1", "--format", "dot")
    assert out.startswith("graph S0 {")


def test_strata_rejects_bad_parts(capsys):
    code, _, err = run(capsys, "strata", "--g", "4", "--parts", "1,2")
    assert code == 2 and "sum" in err
    with pytest.raises(SystemExit) as exc:
        main(["strata", "--g", "3", "--parts", "0,3"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        main(["strata", "--g", "3", "--parts", "x"])


def test_local_ring(capsys, forked_file):
    code, out, _ = run(capsys, "local-ring", forked_file)
    body = json.loads(out)
    assert code == 0
    assert body["ideal"]["gens"] == [["f1"], ["f2", "f3"], ["f2", "f4"]]
    assert body["primes"] == [{"cover": ["f1", "f2"], "dimension": 7}, {"cover": ["f1", "f3", "f4"], "dimension": 6}]
    assert body["reduced"] is True and len(body["components"]) == 2
    code, out, _ = run(capsys, "local-ring", forked_file, "--format", "tsv")
    assert "prime\tf1,f2\t7" in out.splitlines()


def test_local_ring_bad_input(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "local-ring", str(bad))
    assert code == 2 and "JSON" in err
    neg = tmp_path / "neg.json"
    neg.write_text('{"vertices": [{"id": "a", "genus": -1}], "edges": []}')
    assert run(capsys, "local-ring", str(neg))[0] == 2
    assert run(capsys, "local-ring", str(tmp_path / "missing.json"))[0] == 2


def test_expand(capsys, forked_file):
    code, out, _ = run(capsys, "expand", forked_file, "--source", "u1", "--target", "u3", "--order", "4")
    assert code == 0 and out.rstrip().endswith("PASS")
    code, out, _ = run(
        capsys, "expand", forked_file, "--source", "u2", "--target", "u4", "--order", "2", "--format", "json"
    )
    body = json.loads(out)
    assert body["passed"] and body["geodesic"] == ["f2", "f4"]


def test_expand_positions(capsys, forked_file):
    code, out, _ = run(
        capsys, "expand", forked_file, "--source", "u2", "--target", "u4", "--order", "2",
        "--positions", '{"f4": "5/2"}', "--format", "json",
    )
    body = json.loads(out)
    assert code == 0 and body["passed"]
    # beta(-f2, f4) = 1 / (0 - 5/2)^2
    assert body["orders"][1]["leading"][0]["coeff"] == "4/25*b[u2;f2](z)*xi[-f4]"


def test_expand_errors(capsys, forked_file):
    assert run(capsys, "expand", forked_file, "--source", "u1", "--target", "u1", "--order", "2")[0] == 2
    assert run(capsys, "expand", forked_file, "--source", "u1", "--target", "w", "--order", "2")[0] == 2
    assert run(capsys, "expand", forked_file, "--source", "u1", "--target", "u3", "--order", "0")[0] == 2
    assert run(capsys, "expand", forked_file, "--source", "u1", "--target", "u3", "--order", "3", "--max-degree", "1")[0] == 2
    code, _, err = run(
        capsys, "expand", forked_file, "--source", "u2", "--target", "u4", "--order", "2", "--positions", '{"f4": 0}'
    )
    assert code == 2 and "share position" in err
    assert run(capsys, "expand", forked_file, "--source", "u1", "--target", "zz", "--order", "2")[0] == 2


def test_tuples(capsys):
    code, out, _ = run(capsys, "tuples", "--g-max", "6", "--check")
    lines = out.splitlines()
    assert code == 0 and lines[-1] == "# check: PASS"
    assert "6\t3,3\t9\t9\t15\tPOSSIBLY_NONZERO" in lines
    code, out, _ = run(capsys, "tuples", "--g-max", "3", "--check", "--format", "json")
    body = json.loads(out)
    assert body["check"] == "PASS" and [r["tuple"] for r in body["rows"]] == [[1, 1], [1, 1, 1], [1, 2]]
    assert run(capsys, "tuples", "--g-max", "1")[0] == 2


def test_poset(capsys):
    code, out, _ = run(capsys, "poset", "--g", "3", "--parts", "1,2")
    assert code == 0
    body = json.loads(out)
    assert len(body["nodes"]) == 3
    assert sum(n["irreducible"] for n in body["nodes"]) == 2
    code, out, _ = run(capsys, "poset", "--g", "3", "--parts", "1,2", "--format", "dot")
    assert out.startswith("digraph")


def test_output_is_deterministic_and_cached(capsys, forked_file):
    first = run(capsys, "--no-cache", "local-ring", forked_file)
    second = run(capsys, "local-ring", forked_file)
    third = run(capsys, "local-ring", forked_file)
    assert first == second == third
    assert list(_cache_dir().glob("*.json"))


def test_manifest(capsys, tmp_path, forked_file):
    path = tmp_path / "m.json"
    run(capsys, "--manifest", str(path), "strata", "--g", "3", "--parts", "1,2")
    one = json.loads(path.read_text())
    run(capsys, "--manifest", str(path), "strata", "--parts", "2,1", "--g", "3")
    two = json.loads(path.read_text())
    assert one["digest"] == two["digest"] and one["output_digest"] == two["output_digest"]
    assert one["command"] == "strata" and one["params"]["parts"] == [1, 2]
    run(capsys, "--manifest", str(path), "local-ring", forked_file)
    assert forked_file in json.loads(path.read_text())["inputs"]


def test_strata_json_round_trips(capsys):
    from torelli_fiber.serialize import stratum_from_json
    from torelli_fiber.strata import enumerate_strata

    _, out, _ = run(capsys, "strata", "--g", "3", "--parts", "1,2")
    parsed = [stratum_from_json(d) for d in json.loads(out)["strata"]]
    assert [s.canonical for s in parsed] == [s.canonical for s in enumerate_strata(3, (1, 2))]
    _, again, _ = run(capsys, "strata", "--g", "2", "--parts", "2")
    assert len(json.loads(again)["strata"]) == 1


def test_expand_chain_and_below_distance(capsys, tmp_path):
    chain = {
        "vertices": [{"id": "a", "genus": 1}, {"id": "w", "genus": 0}, {"id": "x", "genus": 1}, {"id": "b", "genus": 1}],
        "edges": [["a", "w"], ["w", "x"], ["w", "b"]],
        "edgeIds": ["e1", "y", "e2"],
    }
    path = tmp_path / "chain.json"
    path.write_text(json.dumps(chain))
    code, out, _ = run(capsys, "expand", str(path), "--source", "a", "--target", "b", "--order", "3")
    assert code == 0 and "order 1: zero" in out and out.rstrip().endswith("PASS")
    assert "s[e1]*s[e2] : b[a;e1](z)*xi[-e2]" in out


def test_poset_examples(capsys):
    _, out, _ = run(capsys, "poset", "--g", "2", "--parts", "1,1")
    (node,) = json.loads(out)["nodes"]
    assert node["irreducible"]
    with pytest.raises(SystemExit) as exc:
        main(["poset", "--g", "2", "--parts", ""])
    assert exc.value.code == 2
