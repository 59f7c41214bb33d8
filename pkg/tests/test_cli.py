import json
import os

import pytest

from divq.cli import main

from conftest import instance_record, write_jsonl
from mockserver import EchoModelServer

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


def eval_args(tmp_path, *extra):
    return [
        "eval",
        "--instances", os.path.join(FIXTURES, "eval_instances.jsonl"),
        "--out-dir", str(tmp_path / "out"),
        *extra,
    ]


def test_eval_writes_reports_and_table(tmp_path, capsys):
    rc = main(eval_args(
        tmp_path, "--k", "3", "--metrics", "diverse", "dist-1", "--alpha", "0.0"
    ))
    assert rc == 0
    out_dir = tmp_path / "out"
    diverse = json.loads((out_dir / "diverse_top3.json").read_text())
    distinct = json.loads((out_dir / "distinct_top3.json").read_text())
    assert diverse["metric_name"] == "diverse@3"
    assert diverse["params"] == {"k": 3, "alpha": 0.0}
    assert len(diverse["per_instance"]) == 3
    assert 0.0 <= diverse["corpus_value"] <= 1.0
    assert distinct["metric_name"] == "dist-1"
    table = (out_dir / "table.txt").read_text()
    assert capsys.readouterr().out == table
    assert table.splitlines()[0].split() == ["top-k", "diverse@k", "dist-1"]


def test_eval_k1_with_diverse_is_usage_error(tmp_path, capsys):
    rc = main(eval_args(tmp_path, "--k", "1", "--metrics", "diverse", "--alpha", "0.0"))
    assert rc == 2
    assert "k=1" in capsys.readouterr().err


def test_eval_lexical_requires_explicit_alpha(tmp_path, capsys):
    rc = main(eval_args(tmp_path, "--k", "3", "--metrics", "diverse"))
    assert rc == 2
    assert "--alpha" in capsys.readouterr().err


def test_eval_separate_candidates_join(tmp_path, capsys):
    instances = [instance_record("a1", "what team plays here")]
    inst_path = write_jsonl(tmp_path / "inst.jsonl", instances)
    cands = [{
        "instance_id": "a1",
        "k": 3,
        "questions": [
            {"id": "c0", "text": "what team plays here"},
            {"id": "c1", "text": "which squad plays here"},
        ],
    }]
    cand_path = write_jsonl(tmp_path / "cands.jsonl", cands)
    rc = main([
        "eval", "--instances", inst_path, "--candidates", cand_path,
        "--k", "2", "--metrics", "dist-1", "--out-dir", str(tmp_path / "out"),
    ])
    assert rc == 0


def test_eval_candidates_missing_id_names_it(tmp_path, capsys):
    instances = [instance_record("a1", "gold one"), instance_record("a2", "gold two")]
    inst_path = write_jsonl(tmp_path / "inst.jsonl", instances)
    cands = [{
        "instance_id": "a1", "k": 1, "questions": [{"id": "c0", "text": "gold one"}],
    }]
    cand_path = write_jsonl(tmp_path / "cands.jsonl", cands)
    rc = main([
        "eval", "--instances", inst_path, "--candidates", cand_path,
        "--k", "2", "--metrics", "dist-1", "--out-dir", str(tmp_path / "out"),
    ])
    assert rc == 2
    assert "a2" in capsys.readouterr().err


def test_eval_malformed_line_names_file_and_line(tmp_path, capsys):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "x", "subgraph": {"triplets": [["a","b","c"]]}}\n',
                    encoding="utf-8")
    rc = main([
        "eval", "--instances", str(path), "--k", "2", "--metrics", "dist-1",
        "--out-dir", str(tmp_path / "out"),
    ])
    assert rc == 2
    err = capsys.readouterr().err
    assert "bad.jsonl" in err
    assert ":1:" in err


def test_eval_missing_candidates_embedded(tmp_path, capsys):
    inst_path = write_jsonl(tmp_path / "inst.jsonl", [instance_record("a1", "gold")])
    rc = main([
        "eval", "--instances", inst_path, "--k", "2", "--metrics", "dist-1",
        "--out-dir", str(tmp_path / "out"),
    ])
    assert rc == 2
    assert "a1" in capsys.readouterr().err


def test_eval_scorer_failure_exit3(tmp_path, capsys):
    emb_path = tmp_path / "emb.jsonl"
    emb_path.write_text(json.dumps({"text": "never matches", "vector": [1.0]}) + "\n")
    rc = main(eval_args(
        tmp_path, "--k", "3", "--metrics", "relevance",
        "--scorer", "embed-file", "--embeddings", str(emb_path),
    ))
    assert rc == 3
    assert "no embedding" in capsys.readouterr().err


def test_correlate_linear(tmp_path, capsys):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    a.write_text(json.dumps({"x": 1, "y": 2, "z": 3}))
    b.write_text(json.dumps({"x": 2, "y": 4, "z": 6}))
    rc = main(["correlate", str(a), str(b)])
    assert rc == 0
    assert capsys.readouterr().out.strip() == "1.000"


def test_correlate_fixture_value(capsys):
    rc = main([
        "correlate",
        os.path.join(FIXTURES, "correlate_system.json"),
        os.path.join(FIXTURES, "correlate_human.json"),
    ])
    assert rc == 0
    expected = json.load(open(os.path.join(FIXTURES, "correlate_expected.json")))
    printed = float(capsys.readouterr().out.strip())
    assert printed == pytest.approx(expected["pearson"], abs=5e-4)  # 3 printed decimals


def test_correlate_key_mismatch(tmp_path, capsys):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    a.write_text(json.dumps({"x": 1, "y": 2}))
    b.write_text(json.dumps({"x": 2, "extra": 4}))
    rc = main(["correlate", str(a), str(b)])
    assert rc == 2
    err = capsys.readouterr().err
    assert "y" in err and "extra" in err


def test_correlate_constant_scores(tmp_path, capsys):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    a.write_text(json.dumps({"x": 1, "y": 2, "z": 3}))
    b.write_text(json.dumps({"x": 5, "y": 5, "z": 5}))
    rc = main(["correlate", str(a), str(b)])
    assert rc == 3


def test_select_backward_command(tmp_path):
    triples = [
        {"source": "src one", "external": {"id": "e1", "text": "same words"},
         "roundtrip": {"id": "r1", "text": "same words"}},
        {"source": "src two", "external": {"id": "e2", "text": "alpha beta"},
         "roundtrip": {"id": "r2", "text": "gamma delta"}},
    ]
    path = write_jsonl(tmp_path / "triples.jsonl", triples)
    out_dir = tmp_path / "sel"
    rc = main([
        "select-backward", "--triples", path, "--threshold", "0.7",
        "--out-dir", str(out_dir),
    ])
    assert rc == 0
    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary == {"input": 2, "selected": 1, "rejected": 1, "threshold": 0.7}
    selected = (out_dir / "selected.jsonl").read_text().strip().splitlines()
    assert len(selected) == 1
    assert json.loads(selected[0])["origin_id"] == "e1"


def test_select_forward_command(tmp_path):
    instances = [
        instance_record(
            "i0", "alpha beta gamma",
            candidates=["alpha beta gamma", "alpha beta zeta", "omega psi chi"],
        )
    ]
    inst_path = write_jsonl(tmp_path / "inst.jsonl", instances)
    out_dir = tmp_path / "sel"
    rc = main([
        "select-forward", "--instances", inst_path, "--threshold", "0.5",
        "--out-dir", str(out_dir),
    ])
    assert rc == 0
    selected = [json.loads(line)
                for line in (out_dir / "selected.jsonl").read_text().splitlines()]
    assert len(selected) == 1
    # the disjoint candidate fails the gate; the most diverse keeper wins
    assert selected[0]["source"] == "alpha beta zeta"


def test_select_backward_requires_threshold_for_lexical(tmp_path, capsys):
    path = write_jsonl(tmp_path / "t.jsonl", [])
    rc = main(["select-backward", "--triples", path, "--out-dir", str(tmp_path / "o")])
    assert rc == 2
    assert "--threshold" in capsys.readouterr().err


def orchestrate_config(tmp_path, forward_url, backward_url):
    instances = [
        instance_record(
            f"i{n}", f"what is group{n} leader{n} ?",
            triplets=[[f"group{n}", "leads", f"leader{n}"]],
        )
        for n in range(3)
    ]
    inst_path = write_jsonl(tmp_path / "instances.jsonl", instances)
    ext_path = write_jsonl(
        tmp_path / "external.jsonl",
        [{"id": f"q{n}", "text": f"who runs the place{n} now"} for n in range(4)],
    )
    config = {
        "instances_path": inst_path,
        "external_questions_path": ext_path,
        "run_dir": str(tmp_path / "run"),
        "forward_url": forward_url,
        "backward_url": backward_url,
        "iterations": 1,
        "epochs_per_phase": 1,
        "k_generate": 2,
        "seed": 5,
        "timeout": 5.0,
        "retry_limit": 0,
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config, indent=2))
    return str(config_path), config


def test_orchestrate_and_resume(tmp_path, capsys):
    with EchoModelServer("forward") as fwd, EchoModelServer("backward") as bwd:
        config_path, config = orchestrate_config(tmp_path, fwd.url, bwd.url)
        rc = main(["orchestrate", "--config", config_path])
        assert rc == 0
        run_dir = config["run_dir"]
        assert os.path.isfile(os.path.join(run_dir, "state.json"))
        assert os.path.isfile(os.path.join(run_dir, "iter0", "forward_epoch0.jsonl"))
        assert os.path.isfile(os.path.join(run_dir, "iter0", "backward_epoch0.jsonl"))
        state = json.loads(open(os.path.join(run_dir, "state.json")).read())
        assert state["phase"] == "done"
        capsys.readouterr()
        rc = main(["resume", "--run-dir", run_dir])
        assert rc == 0
        assert "already done" in capsys.readouterr().out


def test_orchestrate_unreachable_endpoint_exit4(tmp_path, capsys):
    config_path, config = orchestrate_config(
        tmp_path, "http://127.0.0.1:9", "http://127.0.0.1:9"
    )
    rc = main(["orchestrate", "--config", config_path])
    assert rc == 4
    assert not os.path.exists(config["run_dir"])


def test_unknown_flag_is_an_error(capsys):
    with pytest.raises(SystemExit) as err:
        main(["eval", "--instances", "x", "--out-dir", "y", "--mystery"])
    assert err.value.code == 2


def test_unknown_metric_is_usage_error(tmp_path, capsys):
    rc = main(eval_args(tmp_path, "--metrics", "rouge"))
    assert rc == 2
    assert "rouge" in capsys.readouterr().err


def test_resolved_config_printed_before_acting(tmp_path, capsys):
    main(eval_args(tmp_path, "--k", "3", "--metrics", "dist-1"))
    assert capsys.readouterr().err.startswith("resolved config:")


@pytest.mark.parametrize(
    "name,argv",
    [
        ("help_main", ["--help"]),
        ("help_eval", ["eval", "--help"]),
        ("help_correlate", ["correlate", "--help"]),
        ("help_select_backward", ["select-backward", "--help"]),
        ("help_select_forward", ["select-forward", "--help"]),
        ("help_orchestrate", ["orchestrate", "--help"]),
        ("help_resume", ["resume", "--help"]),
    ],
)
def test_help_matches_golden(name, argv, capsys, monkeypatch):
    monkeypatch.setenv("COLUMNS", "100")
    with pytest.raises(SystemExit) as err:
        main(argv)
    assert err.value.code == 0
    got = capsys.readouterr().out
    golden_path = os.path.join(GOLDEN, f"{name}.txt")
    assert got == open(golden_path, encoding="utf-8").read()
