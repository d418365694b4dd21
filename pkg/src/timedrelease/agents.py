"""Discrete-event scenario engine.

Clients and holders are small state machines driven by a single priority
queue of timestamped events.  Blocks are produced on a fixed slot grid, but
only while something needs them (pending transactions or a request near its
decryption time), so a week-long encryption costs the same as a minute-long
one.

Times inside the engine are reference (wall) seconds as floats; the ledger
only ever sees integer block timestamps.
"""
from __future__ import annotations

import csv
import heapq
import io
import json
import math
import random
import time
from dataclasses import asdict, dataclass, field

from .group import Group, make_params
from .ledger import (
    DisputeOutcome,
    Ledger,
    LedgerError,
    LedgerParams,
    SubmissionStatus,
    SubmitOutcome,
)
from .protocol import (
    ShareStatus,
    TimelockRequest,
    build_request,
    decrypt_message,
    derive_share,
    keygen,
    prove_possession,
    reconstruct_key,
    verify_share,
)

HOLDER_BEHAVIORS = ("honest", "early_submitter", "wrong_share", "silent")
CLIENT_BEHAVIORS = ("honest", "framing_client")

# event priorities for events sharing a timestamp
_POST, _ARRIVE, _WAKE, _FINALIZE, _SLOT = range(5)


class ConfigInvalid(ValueError):
    pass


class EmptyReport(ValueError):
    pass


@dataclass
class LatencyModel:
    mean_s: float = 2.0
    jitter_s: float = 0.5
    kind: str = "lognormal"  # lognormal | exponential | constant

    def sample(self, rng: random.Random) -> float:
        if self.mean_s <= 0:
            return 0.0
        if self.kind == "constant" or (self.kind == "lognormal" and self.jitter_s <= 0):
            return self.mean_s
        if self.kind == "exponential":
            return rng.expovariate(1.0 / self.mean_s)
        sigma2 = math.log1p((self.jitter_s / self.mean_s) ** 2)
        return rng.lognormvariate(math.log(self.mean_s) - sigma2 / 2, math.sqrt(sigma2))


@dataclass
class AgentConfig:
    role: str
    behavior: str = "honest"
    clock_offset_s: float = 0.0
    latency: LatencyModel = field(default_factory=LatencyModel)


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    group: dict = field(default_factory=lambda: {"backend": "toy", "p": 65537, "g": 3})
    n: int = 4
    t: int | None = None
    holders: list[str] | None = None
    client: str = "honest"
    clock_offsets_s: list[float] | None = None
    ntp_bound_s: float = 1.0
    # honest holders act on the chain clock alone (failed local clocks)
    trust_chain_clock: bool = False
    latency: LatencyModel = field(default_factory=LatencyModel)
    block_interval_s: int = 1
    validators: int = 5
    adversarial_validators: int = 0
    durations_s: list[int] = field(default_factory=lambda: [600])
    requests_per_duration: int = 1
    request_spacing_s: int = 30
    early_lead_s: float = 30.0
    verification_cost_s: float = 0.5
    message_size: int = 32
    active_window_s: int = 120
    start_time: int = 1_700_000_000
    ledger: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigInvalid(f"unknown scenario keys: {sorted(unknown)}")
        if "latency" in data:
            try:
                data["latency"] = LatencyModel(**data["latency"])
            except TypeError as exc:
                raise ConfigInvalid(f"latency: {exc}") from None
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"scenario is not valid JSON: {exc}") from None

    @property
    def threshold(self) -> int:
        return self.t if self.t is not None else self.n // 2 + 1

    def behaviors(self) -> list[str]:
        return list(self.holders) if self.holders is not None else ["honest"] * self.n

    def ledger_params(self) -> LedgerParams:
        return LedgerParams(**{"genesis_time": self.start_time, **self.ledger})

    def validate(self) -> None:
        if self.n < 3:
            raise ConfigInvalid("need at least 3 holders")
        if not self.n / 2 < self.threshold <= self.n:
            raise ConfigInvalid(f"threshold {self.threshold} must satisfy n/2 < t <= n for n={self.n}")
        behaviors = self.behaviors()
        if len(behaviors) != self.n:
            raise ConfigInvalid(f"{len(behaviors)} holder behaviors for n={self.n}")
        bad = [b for b in behaviors if b not in HOLDER_BEHAVIORS]
        if bad:
            raise ConfigInvalid(f"unknown holder behaviors {bad}")
        if self.client not in CLIENT_BEHAVIORS:
            raise ConfigInvalid(f"unknown client behavior {self.client!r}")
        if self.clock_offsets_s is not None:
            if len(self.clock_offsets_s) != self.n:
                raise ConfigInvalid("one clock offset per holder")
            for b, off in zip(behaviors, self.clock_offsets_s):
                if b == "honest" and abs(off) > self.ntp_bound_s:
                    raise ConfigInvalid(f"honest clock offset {off} exceeds bound {self.ntp_bound_s}")
        if self.block_interval_s < 1:
            raise ConfigInvalid("block interval must be a positive integer")
        if not 0 <= self.adversarial_validators <= self.validators or self.validators < 1:
            raise ConfigInvalid("bad validator counts")
        if not self.durations_s or min(self.durations_s) <= 0 or self.requests_per_duration < 1:
            raise ConfigInvalid("need positive durations and at least one request per duration")
        try:
            group = make_params(self.group.get("backend", "toy"),
                                **{k: v for k, v in self.group.items() if k != "backend"})
            self.ledger_params()
        except Exception as exc:
            raise ConfigInvalid(f"{type(exc).__name__}: {exc}") from None
        if self.n >= min(group.field_modulus, group.order):
            raise ConfigInvalid(f"{self.n} holders do not fit in {group!r}")


@dataclass
class RequestOutcome:
    request_id: str
    duration_s: int
    requested_time: int
    reveal_time: float | None = None
    reveal_block_time: int | None = None
    decrypted_at: float | None = None
    deviation_s: float | None = None
    reconstructed: bool = False
    message_ok: bool = False
    voided: bool = False
    rewards: dict[int, int] = field(default_factory=dict)


@dataclass
class ScenarioReport:
    name: str
    seed: object
    n: int
    t: int
    requests: list[RequestOutcome]
    slashing_events: list[dict]
    disputes: list[dict]
    rewards: dict[int, int]
    verifications: dict[int, int]
    # wall-clock timings: excluded from equality and JSON so reports stay reproducible
    measured_verification_s: dict[int, float] = field(compare=False)
    behaviors: list[str] = field(default_factory=list)
    rejected_blocks: int = 0
    reverted: list[dict] = field(default_factory=list)
    state_hash: str = ""
    ledger: Ledger | None = field(default=None, repr=False, compare=False)

    @property
    def honest_slashed(self) -> list[int]:
        return [e["holder"] for e in self.slashing_events if self.behaviors[e["holder"] - 1] == "honest"]

    def to_dict(self) -> dict:
        d = asdict(self) if self.ledger is None else asdict(_without_ledger(self))
        d.pop("ledger", None)
        d.pop("measured_verification_s", None)
        for key in ("rewards", "verifications"):
            d[key] = {str(k): v for k, v in d[key].items()}
        for r in d["requests"]:
            r["rewards"] = {str(k): v for k, v in r["rewards"].items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _without_ledger(report: ScenarioReport) -> ScenarioReport:
    return ScenarioReport(**{**report.__dict__, "ledger": None})


@dataclass
class _Holder:
    index: int
    cfg: AgentConfig
    kp: object
    rng: random.Random
    submitted: set = field(default_factory=set)
    woke: set = field(default_factory=set)
    # per request: ids already verified, count of valid ones
    seen: dict = field(default_factory=dict)
    valid_seen: dict = field(default_factory=dict)
    verifications: int = 0
    verify_seconds: float = 0.0

    def local_time(self, ref: float) -> float:
        return ref + self.cfg.clock_offset_s


@dataclass
class _ClientRequest:
    request: TimelockRequest
    message: bytes
    duration_s: int
    outcome: RequestOutcome
    posted: bool = False
    finalize_scheduled_at: float | None = None
    subs_seen: int = -1


def adversary_step(agent, ledger: Ledger, local_time: float, request: TimelockRequest | None = None,
                   *, group: Group | None = None, early_lead_s: float = 30.0) -> list[dict]:
    """Transactions an adversarial agent wants to send now.

    Holders: ``early_submitter`` reveals ``early_lead_s`` before the decryption
    time, ``wrong_share`` reveals a perturbed share once the chain allows it,
    ``silent`` never reveals.  For a ``framing_client`` see ``framing_request``.
    """
    group = group or ledger.group
    behavior = agent.cfg.behavior
    if behavior == "honest":
        raise ValueError("adversary_step called for an honest agent")
    if behavior == "silent" or request is None or request.request_id in agent.submitted:
        return []
    if ledger.requests.get(request.request_id) is None or ledger.requests[request.request_id].status != "open":
        return []
    share = derive_share(group, request, agent.kp)
    if behavior == "early_submitter":
        if local_time < request.decrypt_time - early_lead_s:
            return []
        value = share.value
    elif behavior == "wrong_share":
        if local_time < request.decrypt_time or ledger.now < request.decrypt_time:
            return []
        value = group.mul(share.value, group.g1)
    else:
        raise ValueError(f"unknown behavior {behavior!r}")
    agent.submitted.add(request.request_id)
    return [{"op": "submit", "holder": agent.index, "request_id": request.request_id,
             "share": group.serialize(value).hex()}]


def framing_request(group: Group, k: int, r: int, message: bytes, decrypt_time: int, pks, t: int) -> TimelockRequest:
    """A request whose ``g2`` commitment uses an exponent other than ``r``."""
    r_other = r % (group.order - 1) + 1
    if r_other % group.order == r % group.order:
        r_other += 1
    return build_request(group, k, r, message, decrypt_time, pks, t, commitment_r=r_other)


class Engine:
    def __init__(self, config: ScenarioConfig, seed):
        config.validate()
        self.cfg = config
        self.seed = seed
        gcfg = dict(config.group)
        self.group = make_params(gcfg.pop("backend", "toy"), **gcfg)
        self.params = config.ledger_params()
        self.ledger = Ledger(self.group, self.params)
        self.t = config.threshold
        self._events: list = []
        self._seq = 0
        self.now = float(config.start_time)
        self.mempool: list[tuple[float, int, dict]] = []
        self._next_slot: int | None = None
        self._slot_scheduled: set[int] = set()
        self.requests: dict[str, _ClientRequest] = {}
        self._pending: list[tuple[int, str]] = []
        self._live: dict[str, None] = {}  # insertion-ordered set
        self._verify_cache: dict[int, tuple[ShareStatus, float]] = {}
        self._disputed: set = set()  # sub ids, or request ids for client faults
        self.slashing_events: list[dict] = []
        self.disputes: list[dict] = []
        self.reverted: list[dict] = []
        self.rejected_blocks = 0
        self._rng_client = random.Random(f"{seed}:client")
        self._build_holders()

    # -- setup -----------------------------------------------------------------

    def _build_holders(self) -> None:
        cfg = self.cfg
        key_rng = random.Random(f"{self.seed}:keys")
        offsets_rng = random.Random(f"{self.seed}:clocks")
        self.holders: list[_Holder] = []
        used = set()
        for i, behavior in enumerate(cfg.behaviors(), start=1):
            while True:
                sk = key_rng.randrange(1, self.group.order)
                kp = keygen(self.group, sk=sk, index=i)
                enc = self.group.serialize(kp.pk)
                if enc not in used:
                    used.add(enc)
                    break
            if cfg.clock_offsets_s is not None:
                offset = cfg.clock_offsets_s[i - 1]
            elif behavior == "honest":
                offset = offsets_rng.uniform(-cfg.ntp_bound_s, cfg.ntp_bound_s)
            else:
                offset = 0.0
            agent_cfg = AgentConfig("holder", behavior, offset, cfg.latency)
            self.holders.append(_Holder(i, agent_cfg, kp, random.Random(f"{self.seed}:lat:{i}")))
            self.ledger.register_holder(kp.pk, self.params.deposit_min, prove_possession(self.group, kp))

    def _schedule(self, when: float, prio: int, kind: str, payload=None) -> None:
        heapq.heappush(self._events, (when, prio, self._seq, kind, payload))
        self._seq += 1

    def _slot_time(self, k: int) -> int:
        return self.cfg.start_time + k * self.cfg.block_interval_s

    def _ensure_slot(self, at: float) -> None:
        k = max(0, math.ceil((at - self.cfg.start_time) / self.cfg.block_interval_s))
        if k not in self._slot_scheduled:
            self._slot_scheduled.add(k)
            self._schedule(self._slot_time(k), _SLOT, "slot", k)

    def _send(self, tx: dict, latency_rng: random.Random) -> None:
        arrival = self.now + self.cfg.latency.sample(latency_rng)
        self._schedule(arrival, _ARRIVE, "arrive", tx)

    def _plan_requests(self) -> None:
        cfg = self.cfg
        pks = [h.kp.pk for h in self.holders]
        idx = 0
        for duration in cfg.durations_s:
            for _ in range(cfg.requests_per_duration):
                post_time = cfg.start_time + 10 + idx * cfg.request_spacing_s
                decrypt_time = post_time + int(duration)
                k = self._rng_client.randrange(1, self.group.field_modulus)
                r = self._rng_client.randrange(1, self.group.order)
                message = self._rng_client.randbytes(cfg.message_size)
                if cfg.client == "framing_client":
                    req = framing_request(self.group, k, r, message, decrypt_time, pks, self.t)
                else:
                    req = build_request(self.group, k, r, message, decrypt_time, pks, self.t)
                cr = _ClientRequest(req, message, int(duration),
                                    RequestOutcome(req.request_id, int(duration), decrypt_time))
                self.requests[req.request_id] = cr
                heapq.heappush(self._pending, (decrypt_time, req.request_id))
                self._schedule(post_time, _POST, "post", cr)
                self._schedule(decrypt_time - self.params.max_forward_drift_s - 5, _WAKE, "hot", cr)
                for h in self.holders:
                    if h.cfg.behavior == "early_submitter":
                        wake = decrypt_time - cfg.early_lead_s - h.cfg.clock_offset_s
                    else:
                        wake = decrypt_time - h.cfg.clock_offset_s
                    self._schedule(wake, _WAKE, "wake", (h.index, req.request_id))
                self._schedule(decrypt_time + self.params.reveal_timeout_s + 1, _FINALIZE, "finalize", req.request_id)
                idx += 1

    # -- main loop -------------------------------------------------------------

    def run(self) -> ScenarioReport:
        self._plan_requests()
        self._ensure_slot(self.now)
        while self._events:
            when, _prio, _seq, kind, payload = heapq.heappop(self._events)
            self.now = when
            getattr(self, "_on_" + kind)(payload)
        return self._report()

    def _on_post(self, cr: _ClientRequest) -> None:
        fee = self.t * self.params.reward_per_share
        self._send({"op": "post_request", "request": cr.request.to_dict(self.group), "fee": fee}, self._rng_client)

    def _on_arrive(self, tx: dict) -> None:
        self.mempool.append((self.now, self._seq, tx))
        self._ensure_slot(self.now)

    def _on_hot(self, cr: _ClientRequest) -> None:
        self._ensure_slot(self.now)

    def _on_wake(self, payload) -> None:
        index, rid = payload
        self.holders[index - 1].woke.add(rid)
        self._holder_act(self.holders[index - 1], rid)
        self._ensure_slot(self.now)

    def _on_finalize(self, rid: str) -> None:
        rec = self.ledger.requests.get(rid)
        if rec is not None and rec.status == "open":
            self.mempool.append((self.now, self._seq, {"op": "finalize", "request_id": rid}))
            self._ensure_slot(self.now)

    def _needs_blocks(self) -> bool:
        if self.mempool:
            return True
        lead = self.params.max_forward_drift_s + 5
        if self._pending:
            decrypt = self._pending[0][0]
            if decrypt - lead <= self.now <= decrypt + self.cfg.active_window_s:
                return True
        for rid in self._live:
            rec = self.ledger.requests.get(rid)
            if rec is not None and rec.status == "open" and \
                    self.now <= self.requests[rid].request.decrypt_time + self.cfg.active_window_s:
                return True
        return False

    def _proposer(self, k: int) -> int:
        v = random.Random(f"{self.seed}:slot:{k}").randrange(self.cfg.validators)
        return -(v + 1)

    def _on_slot(self, k: int) -> None:
        slot_time = self._slot_time(k)
        proposer = self._proposer(k)
        adversarial = -proposer <= self.cfg.adversarial_validators
        claimed = slot_time + (self.params.max_forward_drift_s if adversarial else 0)
        block = self.ledger.advance_block(proposer, claimed, slot_time)
        if block is None:
            self.rejected_blocks += 1
        else:
            self._include_transactions(slot_time)
            self._after_block(block)
        if self._needs_blocks():
            self._ensure_slot(slot_time + self.cfg.block_interval_s)

    def _include_transactions(self, slot_time: int) -> None:
        ready = [m for m in self.mempool if m[0] <= slot_time]
        self.mempool = [m for m in self.mempool if m[0] > slot_time]
        for _, _, tx in sorted(ready, key=lambda m: (m[0], m[1])):
            try:
                result = self.ledger.apply(tx)
            except LedgerError as exc:
                self.reverted.append({"tx": tx["op"], "error": type(exc).__name__, "time": slot_time})
                continue
            self._record(tx, result)

    def _record(self, tx: dict, result) -> None:
        op = tx["op"]
        if op == "submit" and result is SubmitOutcome.SLASHED_EARLY:
            self.slashing_events.append({"holder": tx["holder"], "reason": "early_submission",
                                         "request_id": tx["request_id"], "time": self.now})
        elif op == "dispute":
            sub = self.ledger.submissions[tx["submission"]]
            self.disputes.append({"challenger": tx["challenger"], "submitter": sub.holder_index,
                                  "request_id": sub.request_id, "outcome": result.value, "time": self.now})
            if result is DisputeOutcome.UPHELD:
                self.slashing_events.append({"holder": sub.holder_index, "reason": "invalid_share",
                                             "request_id": sub.request_id, "time": self.now})
            if result is DisputeOutcome.CLIENT_FAULT:
                self.requests[sub.request_id].outcome.voided = True
        elif op == "finalize":
            cr = self.requests[tx["request_id"]]
            cr.outcome.rewards = dict(result.rewards)

    def _after_block(self, block) -> None:
        # requests past their decryption time join the live set in decrypt order
        while self._pending and self._pending[0][0] <= self.ledger.now:
            _, rid = heapq.heappop(self._pending)
            self._live[rid] = None
        for rid in list(self._live):
            cr = self.requests[rid]
            rec = self.ledger.requests.get(rid)
            if rec is None:
                continue
            if rec.status != "open":
                del self._live[rid]
                continue
            n_subs = len(self.ledger.submissions_for(rid))
            if self.now > cr.request.decrypt_time + self.cfg.active_window_s and n_subs == cr.subs_seen:
                continue
            cr.subs_seen = n_subs
            for h in self.holders:
                self._holder_act(h, rid)
            self._observe(cr)
            self._maybe_schedule_finalize(cr)

    # -- agents ----------------------------------------------------------------

    def _verify(self, sub) -> tuple[ShareStatus, float]:
        cached = self._verify_cache.get(sub.sub_id)
        if cached is None:
            rec = self.ledger.requests[sub.request_id]
            pk = self.ledger.holder(sub.holder_index).pk
            start = time.perf_counter()
            status = verify_share(self.group, sub.share, pk, rec.request)
            cached = (status, time.perf_counter() - start)
            self._verify_cache[sub.sub_id] = cached
        return cached

    def _holder_act(self, h: _Holder, rid: str) -> None:
        rec = self.ledger.requests.get(rid)
        if rec is None or rec.status != "open" or not self.ledger.holder(h.index).active:
            return
        request = rec.request
        local = h.local_time(self.now)
        if h.cfg.behavior != "honest":
            if rid in h.woke:
                for tx in adversary_step(h, self.ledger, local, request, group=self.group,
                                         early_lead_s=self.cfg.early_lead_s):
                    self._send(tx, h.rng)
            return
        if rid not in h.submitted and self.ledger.now >= request.decrypt_time:
            if self.cfg.trust_chain_clock or local >= request.decrypt_time:
                share = derive_share(self.group, request, h.kp)
                h.submitted.add(rid)
                self._send({"op": "submit", "holder": h.index, "request_id": rid,
                            "share": self.group.serialize(share.value).hex()}, h.rng)
        self._holder_verify(h, rid)

    def _holder_verify(self, h: _Holder, rid: str) -> None:
        # verifications up to the t-th valid share are the work needed to decrypt and
        # are counted; later submissions are still audited so bad shares get disputed
        seen = h.seen.setdefault(rid, set())
        for sub in self.ledger.submissions_for(rid):
            if sub.sub_id in seen or sub.status is SubmissionStatus.REJECTED:
                continue
            seen.add(sub.sub_id)
            status, secs = self._verify(sub)
            if h.valid_seen.get(rid, 0) < self.t:
                h.verifications += 1
                h.verify_seconds += secs
            if status is ShareStatus.VALID:
                h.valid_seen[rid] = h.valid_seen.get(rid, 0) + 1
            elif status is ShareStatus.DISHONEST_CLIENT:
                # one client-fault dispute voids the whole request
                if rid not in self._disputed:
                    self._disputed.add(rid)
                    self._send({"op": "dispute", "challenger": h.index, "submission": sub.sub_id}, h.rng)
            elif sub.sub_id not in self._disputed and sub.holder_index != h.index:
                self._disputed.add(sub.sub_id)
                self._send({"op": "dispute", "challenger": h.index, "submission": sub.sub_id}, h.rng)

    def _observe(self, cr: _ClientRequest) -> None:
        """Reconstruct as soon as ``t`` verified shares are on the ledger."""
        out = cr.outcome
        if out.reconstructed:
            return
        valid = []
        for sub in self.ledger.submissions_for(cr.request.request_id):
            if sub.status is SubmissionStatus.REJECTED:
                continue
            if self._verify(sub)[0] is ShareStatus.VALID:
                valid.append(sub)
            if len(valid) == self.t:
                break
        if len(valid) < self.t:
            return
        pks = {h.index: h.kp.pk for h in self.holders}
        k = reconstruct_key(self.group, cr.request, [s.share for s in valid], pks, verify=False)
        last = valid[-1]
        block = self.ledger.blocks[last.block_height]
        out.reconstructed = True
        out.reveal_block_time = block.timestamp
        out.reveal_time = float(block.reference_time)
        out.deviation_s = out.reveal_time - out.requested_time
        out.decrypted_at = out.reveal_time + self.t * self.cfg.verification_cost_s
        try:
            out.message_ok = decrypt_message(k, cr.request.ciphertext) == cr.message
        except Exception:
            out.message_ok = False

    def _maybe_schedule_finalize(self, cr: _ClientRequest) -> None:
        subs = [s for s in self.ledger.submissions_for(cr.request.request_id)
                if s.status is not SubmissionStatus.REJECTED]
        if len(subs) < self.t:
            return
        when = max(s.dispute_deadline for s in subs) + 1
        # the chain may run ahead of reference time by up to the drift bound
        when = max(when - self.params.max_forward_drift_s, self.now)
        if cr.finalize_scheduled_at is None or cr.finalize_scheduled_at < when:
            cr.finalize_scheduled_at = when
            self._schedule(when, _FINALIZE, "finalize_retry", cr.request.request_id)

    def _on_finalize_retry(self, rid: str) -> None:
        cr = self.requests[rid]
        if cr.finalize_scheduled_at is not None and self.now < cr.finalize_scheduled_at:
            return
        rec = self.ledger.requests.get(rid)
        if rec is None or rec.status != "open":
            return
        pending = [s for s in self.ledger.submissions_for(rid)
                   if s.status is SubmissionStatus.PROVISIONAL and s.dispute_deadline >= self.ledger.now]
        if pending:
            # retry one slot after the chain passes the latest deadline
            self._schedule(self.now + self.cfg.block_interval_s, _FINALIZE, "finalize_retry", rid)
            cr.finalize_scheduled_at = self.now + self.cfg.block_interval_s
            self._ensure_slot(self.now)
            return
        self._on_finalize(rid)

    # -- report ----------------------------------------------------------------

    def _report(self) -> ScenarioReport:
        rewards = {h.index: h.rewards_earned for h in self.ledger.holders}
        return ScenarioReport(
            name=self.cfg.name,
            seed=self.seed,
            n=self.cfg.n,
            t=self.t,
            requests=[cr.outcome for cr in self.requests.values()],
            slashing_events=self.slashing_events,
            disputes=self.disputes,
            rewards=rewards,
            verifications={h.index: h.verifications for h in self.holders},
            measured_verification_s={h.index: h.verify_seconds for h in self.holders},
            behaviors=self.cfg.behaviors(),
            rejected_blocks=self.rejected_blocks,
            reverted=self.reverted,
            state_hash=self.ledger.state_hash(),
            ledger=self.ledger,
        )


def run_scenario(config, seed) -> ScenarioReport:
    """Run one scenario end to end.  ``config`` is a ScenarioConfig or a dict."""
    if isinstance(config, dict):
        config = ScenarioConfig.from_dict(config)
    return Engine(config, seed).run()


# -- metrics -------------------------------------------------------------------

@dataclass
class DeviationStats:
    mean: float
    min: float
    max: float
    count: int
    series: list[dict]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["duration_s", "count", "mean_deviation_s", "min_deviation_s", "max_deviation_s"])
        for row in self.series:
            w.writerow([row["duration_s"], row["count"], f"{row['mean']:.6f}",
                        f"{row['min']:.6f}", f"{row['max']:.6f}"])
        return buf.getvalue()


def measure_deviation(reports) -> DeviationStats:
    if isinstance(reports, ScenarioReport):
        reports = [reports]
    by_duration: dict[int, list[float]] = {}
    for report in reports:
        for out in report.requests:
            if out.reconstructed and out.deviation_s is not None:
                by_duration.setdefault(out.duration_s, []).append(out.deviation_s)
    if not by_duration:
        raise EmptyReport("no completed requests")
    series = [
        {"duration_s": d, "count": len(v), "mean": sum(v) / len(v), "min": min(v), "max": max(v)}
        for d, v in sorted(by_duration.items())
    ]
    values = [x for v in by_duration.values() for x in v]
    return DeviationStats(sum(values) / len(values), min(values), max(values), len(values), series)


def deviation_rows(report: ScenarioReport) -> str:
    """Per-request CSV with stable column names."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["request_id", "duration_s", "requested_time", "reveal_time", "deviation_s",
                "decrypted_at", "reconstructed", "message_ok", "voided"])
    for r in report.requests:
        w.writerow([r.request_id, r.duration_s, r.requested_time,
                    "" if r.reveal_time is None else f"{r.reveal_time:.3f}",
                    "" if r.deviation_s is None else f"{r.deviation_s:.3f}",
                    "" if r.decrypted_at is None else f"{r.decrypted_at:.3f}",
                    int(r.reconstructed), int(r.message_ok), int(r.voided)])
    return buf.getvalue()


@dataclass
class SweepRow:
    n: int
    t: int
    publish_latency_s: float
    verifications_per_holder: float
    local_verification_latency_s: float
    measured_verification_s: float = field(default=0.0, compare=False)


def scalability_sweep(n_list=(3, 10, 20, 30, 40), seed=0, *, requests: int = 5,
                      base: dict | None = None) -> list[SweepRow]:
    """All-honest runs at each holder count with ``t = n//2 + 1``."""
    rows = []
    for n in n_list:
        cfg = {"name": f"sweep-n{n}", "n": n, "t": n // 2 + 1, "requests_per_duration": requests,
               "durations_s": [600], **(base or {})}
        cfg["n"], cfg["t"] = n, n // 2 + 1
        cfg.pop("holders", None)
        cfg.pop("clock_offsets_s", None)
        report = run_scenario(ScenarioConfig.from_dict(cfg), f"{seed}:{n}")
        done = [r for r in report.requests if r.reconstructed]
        if not done:
            raise EmptyReport(f"no request completed at n={n}")
        honest = [i for i, b in enumerate(report.behaviors, start=1) if b == "honest"]
        per_holder = sum(report.verifications[i] for i in honest) / len(honest) / len(report.requests)
        measured = sum(report.measured_verification_s[i] for i in honest) / len(honest) / len(report.requests)
        cost = ScenarioConfig.from_dict(cfg).verification_cost_s
        rows.append(SweepRow(
            n=n,
            t=report.t,
            publish_latency_s=sum(r.deviation_s for r in done) / len(done),
            verifications_per_holder=per_holder,
            local_verification_latency_s=per_holder * cost,
            measured_verification_s=measured,
        ))
    return rows


def sweep_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "t", "publish_latency_s", "verifications_per_holder", "local_verification_latency_s"])
    for r in rows:
        w.writerow([r.n, r.t, f"{r.publish_latency_s:.6f}", f"{r.verifications_per_holder:.6f}",
                    f"{r.local_verification_latency_s:.6f}"])
    return buf.getvalue()


def linear_fit(xs, ys) -> tuple[float, float, float]:
    """Least-squares slope, intercept and R^2."""
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = my - slope * mx
    ss_res = sum((y - (intercept + slope * x)) ** 2 for x, y in zip(xs, ys))
    ss_tot = sum((y - my) ** 2 for y in ys)
    r2 = 1.0 if ss_tot == 0 else 1 - ss_res / ss_tot
    return slope, intercept, r2
