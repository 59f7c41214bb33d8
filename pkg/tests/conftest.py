import json
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from mockserver import CannedModelServer, EchoModelServer  # noqa: E402


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    return str(path)


@pytest.fixture
def jsonl_writer(tmp_path):
    def write(name, records):
        return write_jsonl(tmp_path / name, records)

    return write


@pytest.fixture
def echo_pair(tmp_path):
    """(forward, backward) echo servers with spool dirs under tmp_path."""
    fwd_spool = tmp_path / "spool_forward"
    bwd_spool = tmp_path / "spool_backward"
    fwd_spool.mkdir()
    bwd_spool.mkdir()
    with EchoModelServer("forward", str(fwd_spool)) as forward:
        with EchoModelServer("backward", str(bwd_spool)) as backward:
            yield forward, backward


@pytest.fixture
def canned_server_factory():
    servers = []

    def make(outputs, spool_dir=None):
        server = CannedModelServer(outputs, spool_dir)
        server.__enter__()
        servers.append(server)
        return server

    yield make
    for server in servers:
        server.__exit__(None, None, None)


def instance_record(
    iid,
    gold_text,
    triplets=None,
    candidates=None,
    answer=None,
    k=None,
):
    """Build one instance JSONL record; candidates is a list of texts."""
    if triplets is None:
        triplets = [["subject " + iid, "related to", "object " + iid]]
    record = {
        "id": iid,
        "subgraph": {"triplets": triplets, "answer": answer},
        "gold": {"id": f"{iid}-gold", "text": gold_text},
        "candidates": None,
    }
    if candidates is not None:
        record["candidates"] = {
            "k": k if k is not None else max(len(candidates), 1),
            "questions": [
                {"id": f"{iid}-c{j}", "text": text} for j, text in enumerate(candidates)
            ],
        }
    return record
