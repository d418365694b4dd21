"""Command-line entry point.

Exit codes: 0 success, 2 validation error, 3 I/O error.
"""
import argparse
import json
import random
import sys
from importlib import resources
from pathlib import Path

from . import agents, plotting, voting
from .group import GroupError, from_description, make_params
from .ledger import Ledger, LedgerError
from .protocol import (
    KeyPair,
    ProtocolError,
    SecretShare,
    TimelockRequest,
    build_request,
    canonical_json,
    derive_share,
    keygen,
    open_request,
    share_from_dict,
    share_to_dict,
    verify_share,
)

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 2, 3


class CliError(Exception):
    pass


def _group_from_args(args):
    if args.backend == "toy":
        return make_params("toy", p=args.p, g=args.g)
    return make_params("curve")


def _write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _read_json(path):
    return json.loads(Path(path).read_text())


def _load_manifest(path):
    data = _read_json(path)
    group = from_description(data["group"])
    pks = [group.deserialize(bytes.fromhex(h["pk"]), "G1") for h in sorted(data["holders"], key=lambda h: h["index"])]
    return group, pks


def _load_key(path):
    data = _read_json(path)
    group = from_description(data["group"])
    sk = int(data["sk"], 16)
    return group, KeyPair(sk, group.deserialize(bytes.fromhex(data["pk"]), "G1"), int(data["index"]))


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


# -- commands ------------------------------------------------------------------

def cmd_keygen(args):
    group = _group_from_args(args)
    forced = _int_list(args.sk) if args.sk else None
    if forced is not None and len(forced) != args.n:
        raise CliError(f"--sk lists {len(forced)} keys for n={args.n}")
    if forced is None and args.seed is None:
        raise CliError("--seed is required unless --sk is given")
    if args.n < 1:
        raise CliError("n must be at least 1")
    out = Path(args.out)
    holders = []
    for i in range(1, args.n + 1):
        if forced is not None:
            kp = keygen(group, sk=forced[i - 1], index=i)
        else:
            kp = keygen(group, sk=random.Random(f"{args.seed}:key:{i}").randrange(1, group.order), index=i)
        pk_hex = group.serialize(kp.pk).hex()
        _write(out / f"key_{i}.json", canonical_json(
            {"group": group.describe(), "index": i, "sk": format(kp.sk, "x"), "pk": pk_hex}) + "\n")
        holders.append({"index": i, "pk": pk_hex})
    _write(out / "manifest.json", canonical_json({"group": group.describe(), "holders": holders}) + "\n")
    print(f"wrote {args.n} key files and manifest.json to {out}")


def cmd_encrypt(args):
    group, pks = _load_manifest(args.manifest)
    message = Path(args.message).read_bytes()
    if (args.k is None or args.r is None) and args.seed is None:
        raise CliError("--seed is required unless both --k and --r are given")
    rng = random.Random(f"{args.seed}:encrypt")
    k = args.k if args.k is not None else rng.randrange(1, group.field_modulus)
    r = args.r if args.r is not None else rng.randrange(1, group.order)
    req = build_request(group, k, r, message, args.decrypt_time, pks, args.threshold)
    _write(args.out, req.to_json(group) + "\n")
    print(f"request {req.request_id} -> {args.out}")


def cmd_share(args):
    data = _read_json(args.request)
    group, kp = _load_key(args.key)
    req = TimelockRequest.from_dict(data, group)
    share = derive_share(group, req, kp)
    _write(args.out, canonical_json(share_to_dict(group, share)) + "\n")
    print(f"share of holder {kp.index} -> {args.out}")


def cmd_verify(args):
    group, pks = _load_manifest(args.manifest)
    req = TimelockRequest.from_dict(_read_json(args.request), group)
    data = _read_json(args.share)
    try:
        share = share_from_dict(group, data)
    except GroupError:
        share = SecretShare(int(data["holder_index"]), bytes.fromhex(data["value"]))
    status = verify_share(group, share, pks[share.holder_index - 1], req)
    print(status.value)
    return EXIT_OK if status.value == "valid" else EXIT_VALIDATION


def cmd_decrypt(args):
    group, pks = _load_manifest(args.manifest)
    req = TimelockRequest.from_dict(_read_json(args.request), group)
    shares = [share_from_dict(group, _read_json(p)) for p in args.shares]
    message = open_request(group, req, shares, pks)
    if args.out:
        Path(args.out).write_bytes(message)
    else:
        sys.stdout.buffer.write(message)


def _scenario_text(spec):
    path = Path(spec)
    if path.exists():
        return path.read_text()
    bundled = resources.files("timedrelease") / "scenarios" / f"{spec.removesuffix('.json')}.json"
    if bundled.is_file():
        return bundled.read_text()
    raise FileNotFoundError(f"scenario file not found: {spec}")


def cmd_scenario(args):
    try:
        data = json.loads(_scenario_text(args.scenario))
    except json.JSONDecodeError as exc:
        raise agents.ConfigInvalid(f"scenario is not valid JSON: {exc}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sweep_ns = data.pop("sweep", None)
    if sweep_ns is not None:
        requests = data.pop("requests_per_duration", 5)
        rows = agents.scalability_sweep(sweep_ns, args.seed, requests=requests, base=data)
        _write(out / "scalability.csv", agents.sweep_csv(rows))
        if not args.no_plot:
            plotting.plot_scalability(rows, out / "scalability.png")
        print(agents.sweep_csv(rows), end="")
        return
    cfg = agents.ScenarioConfig.from_dict(data)
    report = agents.run_scenario(cfg, args.seed)
    _write(out / "report.json", report.to_json() + "\n")
    _write(out / "requests.csv", agents.deviation_rows(report))
    report.ledger.export_log(out / "ledger.jsonl")
    try:
        stats = agents.measure_deviation(report)
    except agents.EmptyReport:
        stats = None
    if stats is not None:
        _write(out / "deviation.csv", stats.to_csv())
        if not args.no_plot:
            plotting.plot_deviation(stats, out / "deviation.png")
    done = sum(r.reconstructed for r in report.requests)
    print(f"{cfg.name}: {done}/{len(report.requests)} reconstructed, "
          f"{len(report.slashing_events)} slashed, {len(report.disputes)} disputes, "
          f"state {report.state_hash[:16]}")


def cmd_vote(args):
    profile = voting.parse_ballot_file(Path(args.ballots).read_bytes())
    results = voting.sweep(profile, args.rule, args.seed, args.iterations,
                           exhaustive=args.exhaustive, workers=args.workers)
    out = Path(args.out)
    _write(out / "sweep.csv", voting.sweep_csv(results))
    if not args.no_plot:
        plotting.plot_vote_sweep(results, out / "sweep.png", label=Path(args.ballots).stem)
    print(f"{profile.n_voters} voters, {profile.n_alternatives} alternatives, "
          f"winner {voting.winner(profile, args.rule)}; wrote {out / 'sweep.csv'}")


def cmd_replay(args):
    ledger = Ledger.import_log(args.log)
    print(f"replayed {len(ledger.log)} transactions, state {ledger.state_hash()}")


def build_parser():
    p = argparse.ArgumentParser(prog="timedrelease", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def backend_opts(sp):
        sp.add_argument("--backend", choices=["toy", "curve"], default="toy")
        sp.add_argument("--p", type=int, default=23, help="toy modulus")
        sp.add_argument("--g", type=int, default=11, help="toy generator")

    sp = sub.add_parser("keygen", help="generate holder key files and a public-key manifest")
    sp.add_argument("--n", type=int, required=True)
    backend_opts(sp)
    sp.add_argument("--seed")
    sp.add_argument("--sk", help="comma-separated secret keys instead of random ones")
    sp.add_argument("--out", default="keys")
    sp.set_defaults(func=cmd_keygen)

    sp = sub.add_parser("encrypt", help="build a timelock request")
    sp.add_argument("--message", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--threshold", type=int, required=True)
    sp.add_argument("--decrypt-time", type=int, required=True)
    sp.add_argument("--seed")
    sp.add_argument("--k", type=int, help="force the symmetric key")
    sp.add_argument("--r", type=int, help="force the commitment exponent")
    sp.add_argument("--out", default="request.json")
    sp.set_defaults(func=cmd_encrypt)

    sp = sub.add_parser("share", help="derive a holder's share of a request")
    sp.add_argument("--request", required=True)
    sp.add_argument("--key", required=True)
    sp.add_argument("--out", default="share.json")
    sp.set_defaults(func=cmd_share)

    sp = sub.add_parser("verify", help="check a revealed share")
    sp.add_argument("--request", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--share", required=True)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("decrypt", help="reconstruct the key from shares and decrypt")
    sp.add_argument("--request", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("shares", nargs="+")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_decrypt)

    sp = sub.add_parser("scenario", help="run a simulated scenario (file or bundled name)")
    sp.add_argument("scenario")
    sp.add_argument("--seed", required=True)
    sp.add_argument("--out", default="out")
    sp.add_argument("--no-plot", action="store_true")
    sp.set_defaults(func=cmd_scenario)

    sp = sub.add_parser("vote", help="strategic-voting sweep over l = 1..100")
    sp.add_argument("ballots")
    sp.add_argument("--rule", choices=voting.RULES, default="plurality")
    sp.add_argument("--seed", required=True)
    sp.add_argument("--iterations", type=int, default=100)
    sp.add_argument("--exhaustive", action="store_true", help="enumerate all malicious sets")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", default="out")
    sp.add_argument("--no-plot", action="store_true")
    sp.set_defaults(func=cmd_vote)

    sp = sub.add_parser("replay", help="replay a ledger JSON-lines log and check state hashes")
    sp.add_argument("log")
    sp.set_defaults(func=cmd_replay)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CliError, ProtocolError, GroupError, LedgerError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
