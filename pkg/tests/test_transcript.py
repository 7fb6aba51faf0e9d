import struct

import pytest

from sskmeans.averaging import SyncConsensus
from sskmeans.kmeans import Dataset, SecureConfig, run_kmeans
from sskmeans.topology import ring
from sskmeans.transcript import PUBLIC_FILE, TranscriptError, TranscriptStore, node_file


@pytest.fixture(scope="module")
def run():
    data = Dataset.from_rows([1, 2, 3, 6, 7, 8], x_max=9)
    return run_kmeans(ring(6), data, [[0], [9]], 10, SecureConfig(seed=3))


def test_frozen_after_run(run):
    assert run.transcripts.frozen
    with pytest.raises(TranscriptError):
        run.transcripts.record(0, "label", 0, label=1)


def test_replay_reproduces_shares(run):
    store = run.transcripts
    p = store.setup()["p"]
    for i in range(store.n):
        for t in store.iterations():
            (inp,) = [r["values"] for r in store.node_records(i, "input") if r["t"] == t]
            sent = {r["peer"]: r["values"] for r in store.node_records(i, "sent") if r["t"] == t}
            recv = {r["peer"]: r["values"] for r in store.node_records(i, "recv") if r["t"] == t}
            assert set(sent) == set(recv) == set(ring(6).neighbors(i))
            share = list(inp)
            for k in sent:
                share = [a - (x - y) for a, x, y in zip(share, sent[k], recv[k])]
            (own,) = [r["values"] for r in store.node_records(i, "share") if r["t"] == t]
            assert [v % p for v in share] == own
            assert store.public_records("shares")[t]["values"][i] == own


def test_save_load_round_trip(run, tmp_path):
    store = run.transcripts
    store.save(tmp_path)
    assert (tmp_path / PUBLIC_FILE).exists() and (tmp_path / node_file(5)).exists()
    back = TranscriptStore.load(tmp_path)
    assert back.public_records() == store.public_records()
    assert all(back.node_records(i) == store.node_records(i) for i in range(6))
    partial = TranscriptStore.load(tmp_path, nodes={2})
    assert partial.node_records(0) == [] and partial.node_records(2) == store.node_records(2)


def test_file_layout_is_length_prefixed_json(run, tmp_path):
    run.transcripts.save(tmp_path)
    blob = (tmp_path / node_file(0)).read_bytes()
    (size,) = struct.unpack(">I", blob[:4])
    assert blob[4:4 + size].startswith(b"{") and blob[4 + size - 1:4 + size] == b"}"


def test_truncated_file_rejected(run, tmp_path):
    run.transcripts.save(tmp_path)
    path = tmp_path / node_file(1)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(TranscriptError):
        TranscriptStore.load(tmp_path)
    (tmp_path / node_file(1)).unlink()
    with pytest.raises(TranscriptError):
        TranscriptStore.load(tmp_path)


def test_tracing_logs_averaging_messages():
    data = Dataset.from_rows([1, 2, 8], x_max=9)
    cfg = SecureConfig(protocol=SyncConsensus(), trace_averaging=True)
    res = run_kmeans(ring(3), data, [[0], [9]], 3, cfg)
    avg = res.transcripts.node_records(0, "avg")
    assert avg and {r["peer"] for r in avg} == {1, 2}
    quiet = run_kmeans(ring(3), data, [[0], [9]], 3, SecureConfig(protocol=SyncConsensus()))
    assert quiet.transcripts.node_records(0, "avg") == []
