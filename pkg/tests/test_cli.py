import json

import pytest

from graphtalk.cli import main


@pytest.fixture
def S(fix):
    return ["--schema", str(fix / "schema" / "schema.json")]


HOS = '[ head_of_state ] of @entity() filter id == "Q30"'


def test_compile(S, capsys):
    assert main(S + ["compile", HOS]) == 0
    assert "wdt:P35" in capsys.readouterr().out


def test_compile_decompile_pipe(S, capsys, monkeypatch):
    import io

    main(S + ["compile", HOS])
    sparql = capsys.readouterr().out
    monkeypatch.setattr("sys.stdin", io.StringIO(sparql))
    assert main(S + ["decompile"]) == 0
    assert capsys.readouterr().out.strip() == HOS


def test_parse_error_exit_1(S, capsys):
    assert main(S + ["parse", "@city() filter"]) == 1
    assert "1:15" in capsys.readouterr().err


def test_parse_json(S, capsys):
    assert main(S + ["parse", "--compact", "@city()"]) == 0
    assert json.loads(capsys.readouterr().out) == {"type": "DomainScan", "domain": "city"}


def test_usage_error(S):
    with pytest.raises(SystemExit) as err:
        main(S + ["frobnicate"])
    assert err.value.code == 1


def test_missing_schema(capsys, tmp_path):
    assert main(["--schema", str(tmp_path / "nope.json"), "parse", "@city()"]) == 1


def test_exec_local_graph(S, fix, capsys):
    assert main(S + ["exec", "--graph", str(fix / "graph" / "world.jsonl"), HOS]) == 0
    assert capsys.readouterr().out.strip() == "Joe Biden (Q6279)"


def test_exec_cache_miss_exit_2(S, tmp_path, capsys):
    assert main(S + ["exec", "--offline", "--cache", str(tmp_path), "@city()"]) == 2


def test_resolve_with_candidates(S, fix, capsys):
    rc = main(S + ["resolve", "--candidates", str(fix / "el" / "europe.json"),
                   '@human() filter contains ( residence , "Paris" ) && contains ( residence , "Gotham" )'])
    out = capsys.readouterr()
    assert rc == 0 and '"Q90"' in out.out and "Gotham" in out.err


def test_resolve_offline_cache(S, fix, capsys):
    rc = main(S + ["resolve", "--offline", "--cache", str(fix / "cache"),
                   '@film() filter contains ( cast_member , "Selena Gomez" )'])
    assert rc == 0 and '"Q83287"' in capsys.readouterr().out


def test_evaluate_wwqsp_gold(S, fix, capsys):
    d = fix / "dataset"
    rc = main(S + ["evaluate", "--mode", "wwqsp", "--dataset", str(d / "wwq_test.jsonl"),
                   "--predictions", str(d / "gold_predictions.jsonl")])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["query_em"] == 1.0


def test_evaluate_report(S, fix, tmp_path, capsys):
    d = fix / "dataset"
    rc = main(S + ["evaluate", "--mode", "wwq", "--dataset", str(d / "wwq_test.jsonl"),
                   "--predictions", str(d / "predictions.jsonl"), "--offline", "--cache", str(fix / "cache"),
                   "--report", str(tmp_path / "rep")])
    assert rc == 0
    m = json.loads((tmp_path / "rep" / "metrics.json").read_text())
    assert set(m) == {"mode", "n", "query_em", "answer_em", "answer_f1"}
    assert (tmp_path / "rep" / "metrics.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    rows = (tmp_path / "rep" / "per_example.tsv").read_text().splitlines()
    assert rows[0].split("\t")[0] == "id" and len(rows) == 1 + m["n"]


def test_evaluate_bad_dataset(S, tmp_path, capsys):
    bad = tmp_path / "d.jsonl"
    bad.write_text(json.dumps({"id": "x", "utterance": "u", "gold_thingtalk": "@city( filter"}) + "\n")
    rc = main(S + ["evaluate", "--mode", "wwqsp", "--dataset", str(bad), "--predictions", str(bad)])
    assert rc == 1 and "d.jsonl:1" in capsys.readouterr().err


def test_synthesize(S, fix, tmp_path, capsys):
    out = tmp_path / "s.jsonl"
    rc = main(S + ["synthesize", "--budget", "50", "--seed", "1", "--graph", str(fix / "graph" / "world.jsonl"),
                   "--out", str(out)])
    assert rc == 0 and len(out.read_text().splitlines()) == 50


def test_schema_build(S, fix, tmp_path, capsys):
    out = tmp_path / "schema.json"
    rc = main(S + ["schema-build", "--samples", str(fix / "schema" / "city_sample.json"), "--out", str(out)])
    assert rc == 0
    info = json.loads(capsys.readouterr().out)
    assert info["domain"] == "city" and set(info["skipped"]) <= {"P9001", "P9002", "P9003"}
    assert any(d["name"] == "city" for d in json.loads(out.read_text())["domains"])
