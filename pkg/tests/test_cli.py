import json
import shutil
from pathlib import Path

import pytest

from timedrelease.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, main

GOLDEN = Path(__file__).parent / "fixtures" / "golden"
BALLOTS = Path(__file__).parent / "fixtures" / "small.soi"


def test_keygen_encrypt_match_golden(tmp_path):
    assert main(["keygen", "--n", "4", "--sk", "3,4,5,6", "--out", str(tmp_path)]) == EXIT_OK
    for name in ["manifest.json"] + [f"key_{i}.json" for i in range(1, 5)]:
        assert (tmp_path / name).read_bytes() == (GOLDEN / name).read_bytes()
    req = tmp_path / "request.json"
    assert main(["encrypt", "--message", str(GOLDEN / "message.txt"), "--manifest", str(tmp_path / "manifest.json"),
                 "--threshold", "3", "--decrypt-time", "1000", "--k", "22", "--r", "7", "--out", str(req)]) == EXIT_OK
    assert req.read_bytes() == (GOLDEN / "request.json").read_bytes()
    data = json.loads(req.read_text())
    assert data["commitment_a"] == "07" and data["masks"] == [[3, "18"], [4, "11"]]


def test_share_verify_decrypt(tmp_path, capsys):
    share = tmp_path / "s1.json"
    assert main(["share", "--request", str(GOLDEN / "request.json"), "--key", str(GOLDEN / "key_1.json"),
                 "--out", str(share)]) == EXIT_OK
    assert share.read_bytes() == (GOLDEN / "share_1.json").read_bytes()
    assert [json.loads((GOLDEN / f"share_{i}.json").read_text())["value"] for i in range(1, 5)] == \
        ["15", "09", "11", "04"]
    args = ["--request", str(GOLDEN / "request.json"), "--manifest", str(GOLDEN / "manifest.json")]
    assert main(["verify", *args, "--share", str(GOLDEN / "share_2.json")]) == EXIT_OK
    bad = tmp_path / "bad.json"
    bad.write_text('{"holder_index":2,"value":"0a"}')
    assert main(["verify", *args, "--share", str(bad)]) == EXIT_VALIDATION
    out = tmp_path / "plain.txt"
    shares = [str(GOLDEN / f"share_{i}.json") for i in (2, 3, 4)]
    assert main(["decrypt", *args, *shares, "--out", str(out)]) == EXIT_OK
    assert out.read_bytes() == b"worked message"
    assert main(["decrypt", *args, *shares[:2]]) == EXIT_VALIDATION
    assert "NotEnoughShares" in capsys.readouterr().err


def test_seeded_keygen_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["keygen", "--n", "3", "--seed", "7", "--out", str(d)]) == EXIT_OK
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()


def test_curve_keygen_roundtrip(tmp_path):
    assert main(["keygen", "--n", "3", "--backend", "curve", "--seed", "1", "--out", str(tmp_path)]) == EXIT_OK
    msg = tmp_path / "m.txt"
    msg.write_bytes(b"on the curve")
    req = tmp_path / "r.json"
    assert main(["encrypt", "--message", str(msg), "--manifest", str(tmp_path / "manifest.json"),
                 "--threshold", "2", "--decrypt-time", "5", "--seed", "2", "--out", str(req)]) == EXIT_OK
    shares = []
    for i in (1, 3):
        s = tmp_path / f"s{i}.json"
        main(["share", "--request", str(req), "--key", str(tmp_path / f"key_{i}.json"), "--out", str(s)])
        shares.append(str(s))
    out = tmp_path / "out.txt"
    assert main(["decrypt", "--request", str(req), "--manifest", str(tmp_path / "manifest.json"),
                 *shares, "--out", str(out)]) == EXIT_OK
    assert out.read_bytes() == b"on the curve"


def test_exit_codes(tmp_path):
    assert main(["keygen", "--n", "3", "--out", str(tmp_path)]) == EXIT_VALIDATION  # no seed
    assert main(["replay", str(tmp_path / "missing.jsonl")]) == EXIT_IO
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["scenario", str(bad), "--seed", "1", "--out", str(tmp_path)]) == EXIT_VALIDATION
    bad.write_text('{"n": 2}')
    assert main(["scenario", str(bad), "--seed", "1", "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert main(["scenario", "no-such-scenario", "--seed", "1", "--out", str(tmp_path)]) == EXIT_IO
    with pytest.raises(SystemExit):
        main(["vote"])


def test_scenario_outputs_and_replay(tmp_path):
    assert main(["scenario", "early_submitter", "--seed", "1", "--out", str(tmp_path)]) == EXIT_OK
    for name in ("report.json", "requests.csv", "ledger.jsonl", "deviation.csv", "deviation.png"):
        assert (tmp_path / name).stat().st_size > 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert [e["holder"] for e in report["slashing_events"]] == [4]
    assert main(["replay", str(tmp_path / "ledger.jsonl")]) == EXIT_OK
    again = tmp_path / "again"
    main(["scenario", "early_submitter", "--seed", "1", "--out", str(again), "--no-plot"])
    assert (again / "report.json").read_bytes() == (tmp_path / "report.json").read_bytes()
    assert (again / "ledger.jsonl").read_bytes() == (tmp_path / "ledger.jsonl").read_bytes()


def test_sweep_scenario(tmp_path):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"sweep": [3, 5], "requests_per_duration": 2}))
    assert main(["scenario", str(cfg), "--seed", "0", "--out", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "scalability.csv").read_text().splitlines()
    assert lines[0] == "n,t,publish_latency_s,verifications_per_holder,local_verification_latency_s"
    assert len(lines) == 3 and (tmp_path / "scalability.png").exists()


def test_vote(tmp_path):
    ballots = tmp_path / "b.soi"
    shutil.copy(BALLOTS, ballots)
    assert main(["vote", str(ballots), "--seed", "3", "--iterations", "10", "--out", str(tmp_path / "o")]) == EXIT_OK
    first = (tmp_path / "o" / "sweep.csv").read_text()
    assert first.splitlines()[0] == "l,iterations,changes,probability" and len(first.splitlines()) == 101
    assert (tmp_path / "o" / "sweep.png").exists()
    main(["vote", str(ballots), "--seed", "3", "--iterations", "10", "--out", str(tmp_path / "p"), "--no-plot",
          "--rule", "plurality"])
    assert (tmp_path / "p" / "sweep.csv").read_text() == first
    ballots.write_text("# NUMBER ALTERNATIVES: 2\n1: 1,1\n")
    assert main(["vote", str(ballots), "--seed", "3", "--out", str(tmp_path / "q")]) == EXIT_VALIDATION
