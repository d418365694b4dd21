"""In-memory model of the coordinating contract and its block clock.

Every mutation is a JSON-serializable transaction applied through
``Ledger.apply``; the accepted transactions form a log that replays to the
same state hash.  Token flows are tracked so that

    deposits + escrow + paid + burned + refunded == inflow

holds after every transaction.
"""
from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .group import Group, MalformedEncoding, from_description
from .protocol import (
    MalformedRequest,
    SecretShare,
    ShareStatus,
    TimelockRequest,
    canonical_json,
    check_request,
    verify_possession,
    verify_share,
)


class LedgerError(Exception):
    pass


class InsufficientDeposit(LedgerError):
    pass


class BadPossessionProof(LedgerError):
    pass


class DuplicateKey(LedgerError):
    pass


class InsufficientFee(LedgerError):
    pass


class UnknownRequest(LedgerError):
    pass


class UnknownHolder(LedgerError):
    pass


class InactiveHolder(LedgerError):
    pass


class DuplicateSubmission(LedgerError):
    pass


class UnknownSubmission(LedgerError):
    pass


class NotProvisional(LedgerError):
    pass


class NotReady(LedgerError):
    pass


class RequestClosed(LedgerError):
    pass


class ReplayMismatch(LedgerError):
    pass


class HolderStatus(str, enum.Enum):
    ACTIVE = "active"
    SLASHED = "slashed"          # submitted before the decryption time
    BLACKLISTED = "blacklisted"  # a dispute against its share was upheld


class SubmissionStatus(str, enum.Enum):
    PROVISIONAL = "provisional"
    FINALIZED = "finalized"
    REJECTED = "rejected"


class SubmitOutcome(str, enum.Enum):
    PROVISIONAL = "provisional"
    SLASHED_EARLY = "slashed_early"
    REJECTED_INACTIVE = "rejected_inactive"


class DisputeOutcome(str, enum.Enum):
    UPHELD = "upheld"
    DISMISSED = "dismissed"
    CLIENT_FAULT = "client_fault"


@dataclass
class LedgerParams:
    deposit_min: int = 100
    reward_per_share: int = 10
    dispute_window_s: int = 3600
    max_forward_drift_s: int = 15
    # after decrypt_time + reveal_timeout_s an under-subscribed request may be closed
    reveal_timeout_s: int = 86400
    genesis_time: int = 0


@dataclass
class HolderRecord:
    index: int
    pk: object
    deposit: int
    status: HolderStatus = HolderStatus.ACTIVE
    rewards_earned: int = 0

    @property
    def active(self) -> bool:
        return self.status is HolderStatus.ACTIVE


@dataclass(frozen=True)
class Block:
    height: int
    timestamp: int
    proposer: int
    reference_time: int


@dataclass
class ShareSubmission:
    sub_id: int
    request_id: str
    holder_index: int
    share: SecretShare
    block_time: int
    block_height: int
    dispute_deadline: int
    status: SubmissionStatus = SubmissionStatus.PROVISIONAL


@dataclass
class RequestRecord:
    request: TimelockRequest
    fee: int
    escrow: int
    status: str = "open"  # open | finalized | voided


@dataclass
class RewardReport:
    request_id: str
    rewards: dict[int, int]
    unrewarded: list[int]
    reveal_time: int | None
    reveal_height: int | None
    reconstructable: bool
    refunded: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rewards"] = {str(k): v for k, v in self.rewards.items()}
        return d


@dataclass
class LogEntry:
    seq: int
    tx: dict
    result: object
    state_hash: str | None = None

    def to_dict(self) -> dict:
        d = {"seq": self.seq, "tx": self.tx, "result": _jsonable(self.result)}
        if self.state_hash is not None:
            d["state_hash"] = self.state_hash
        return d


def _jsonable(result):
    if isinstance(result, enum.Enum):
        return result.value
    if isinstance(result, RewardReport):
        return result.to_dict()
    if isinstance(result, Block):
        return asdict(result)
    return result


class Ledger:
    def __init__(self, group: Group, params: LedgerParams | None = None):
        self.group = group
        self.params = params or LedgerParams()
        self.holders: list[HolderRecord] = []
        self.requests: dict[str, RequestRecord] = {}
        self.submissions: list[ShareSubmission] = []
        self.blocks: list[Block] = []
        self.log: list[LogEntry] = []
        self.inflow = 0
        self.burned = 0
        self.refunded = 0
        self._pk_index: dict[bytes, int] = {}
        self._subs_by_request: dict[str, list[ShareSubmission]] = {}

    # -- views ---------------------------------------------------------------

    @property
    def now(self) -> int:
        return self.blocks[-1].timestamp if self.blocks else self.params.genesis_time

    @property
    def height(self) -> int:
        return len(self.blocks)

    def holder(self, index: int) -> HolderRecord:
        if not 1 <= index <= len(self.holders):
            raise UnknownHolder(f"no holder {index}")
        return self.holders[index - 1]

    def request(self, request_id: str) -> RequestRecord:
        try:
            return self.requests[request_id]
        except KeyError:
            raise UnknownRequest(request_id) from None

    def submissions_for(self, request_id: str) -> list[ShareSubmission]:
        return list(self._subs_by_request.get(request_id, ()))

    def inactive_holders(self) -> set[int]:
        return {h.index for h in self.holders if not h.active}

    def balances(self) -> dict[str, int]:
        return {
            "deposits": sum(h.deposit for h in self.holders),
            "escrow": sum(r.escrow for r in self.requests.values()),
            "paid": sum(h.rewards_earned for h in self.holders),
            "burned": self.burned,
            "refunded": self.refunded,
            "inflow": self.inflow,
        }

    def conserved(self) -> bool:
        b = self.balances()
        return b["deposits"] + b["escrow"] + b["paid"] + b["burned"] + b["refunded"] == b["inflow"]

    def snapshot(self) -> dict:
        ser = self.group.serialize
        return {
            "params": asdict(self.params),
            "holders": [[h.index, ser(h.pk).hex(), h.deposit, h.status.value, h.rewards_earned]
                        for h in self.holders],
            "requests": {rid: [r.fee, r.escrow, r.status] for rid, r in self.requests.items()},
            "submissions": [
                [s.sub_id, s.request_id, s.holder_index, _share_hex(self.group, s.share),
                 s.block_time, s.block_height, s.dispute_deadline, s.status.value]
                for s in self.submissions
            ],
            "blocks": [[b.height, b.timestamp, b.proposer, b.reference_time] for b in self.blocks],
            "accounts": [self.inflow, self.burned, self.refunded],
        }

    def state_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.snapshot()).encode()).hexdigest()

    # -- public transaction API ------------------------------------------------

    def register_holder(self, pk, deposit: int, possession_sig) -> int:
        return self.apply({"op": "register", "pk": self.group.serialize(pk).hex(),
                           "deposit": int(deposit), "sig": self.group.serialize(possession_sig).hex()})

    def advance_block(self, proposer: int, claimed_timestamp: int, reference_time: int) -> Block | None:
        """Returns the accepted block, or None when the proposal is rejected."""
        return self.apply({"op": "block", "proposer": int(proposer),
                           "timestamp": int(claimed_timestamp), "reference_time": int(reference_time)})

    def post_request(self, request: TimelockRequest, fee: int) -> str:
        return self.apply({"op": "post_request", "request": request.to_dict(self.group), "fee": int(fee)})

    def submit_share(self, holder_index: int, request_id: str, share: SecretShare) -> SubmitOutcome:
        return self.apply({"op": "submit", "holder": int(holder_index), "request_id": request_id,
                           "share": _share_hex(self.group, share)})

    def raise_dispute(self, challenger_index: int, sub_id: int) -> DisputeOutcome:
        return self.apply({"op": "dispute", "challenger": int(challenger_index), "submission": int(sub_id)})

    def finalize_request(self, request_id: str) -> RewardReport:
        return self.apply({"op": "finalize", "request_id": request_id})

    def apply(self, tx: dict):
        """Apply one transaction.  Errors leave state untouched and are not logged."""
        handler = getattr(self, "_tx_" + tx["op"], None)
        if handler is None:
            raise LedgerError(f"unknown op {tx['op']!r}")
        result = handler(tx)
        self.log.append(LogEntry(len(self.log), tx, result))
        return result

    # -- handlers: validate fully, then mutate -----------------------------------

    def _tx_register(self, tx):
        try:
            pk = self.group.deserialize(bytes.fromhex(tx["pk"]), "G1")
            sig = self.group.deserialize(bytes.fromhex(tx["sig"]), "G2")
        except MalformedEncoding as exc:
            raise BadPossessionProof(str(exc)) from None
        key = self.group.serialize(pk)
        if key in self._pk_index:
            raise DuplicateKey(f"key already registered as holder {self._pk_index[key]}")
        if tx["deposit"] < self.params.deposit_min:
            raise InsufficientDeposit(f"{tx['deposit']} < {self.params.deposit_min}")
        if not verify_possession(self.group, pk, sig):
            raise BadPossessionProof("possession signature does not verify")
        index = len(self.holders) + 1
        self.holders.append(HolderRecord(index, pk, tx["deposit"]))
        self._pk_index[key] = index
        self.inflow += tx["deposit"]
        return index

    def _tx_block(self, tx):
        proposer, ts, ref = tx["proposer"], tx["timestamp"], tx["reference_time"]
        if proposer > 0 and (proposer > len(self.holders) or not self.holders[proposer - 1].active):
            # holder-proposers must be active; ids <= 0 are external validators
            return None
        if self.blocks and ts <= self.blocks[-1].timestamp:
            return None
        if ts > ref + self.params.max_forward_drift_s:
            return None
        block = Block(len(self.blocks), ts, proposer, ref)
        self.blocks.append(block)
        return block

    def _tx_post_request(self, tx):
        req = TimelockRequest.from_dict(tx["request"], self.group)
        check_request(req)
        if not req.request_id:
            raise MalformedRequest("missing request id")
        if req.request_id in self.requests:
            raise MalformedRequest(f"request {req.request_id} already posted")
        if req.n > len(self.holders):
            raise MalformedRequest(f"request addresses {req.n} holders, only {len(self.holders)} registered")
        needed = req.threshold * self.params.reward_per_share
        if tx["fee"] < needed:
            raise InsufficientFee(f"fee {tx['fee']} < {needed}")
        self.requests[req.request_id] = RequestRecord(req, tx["fee"], tx["fee"])
        self.inflow += tx["fee"]
        return req.request_id

    def _tx_submit(self, tx):
        rec = self.request(tx["request_id"])
        holder_index = tx["holder"]
        if not 1 <= holder_index <= rec.request.n:
            raise UnknownHolder(f"holder {holder_index} is not addressed by request")
        holder = self.holder(holder_index)
        if rec.status != "open":
            raise RequestClosed(f"request {tx['request_id']} is {rec.status}")
        if not holder.active:
            return SubmitOutcome.REJECTED_INACTIVE
        for s in self._subs_by_request.get(tx["request_id"], ()):
            if s.holder_index == holder_index and s.status is not SubmissionStatus.REJECTED:
                raise DuplicateSubmission(f"holder {holder_index} already submitted")
        if self.now < rec.request.decrypt_time:
            self.burned += holder.deposit
            holder.deposit = 0
            holder.status = HolderStatus.SLASHED
            return SubmitOutcome.SLASHED_EARLY
        raw = bytes.fromhex(tx["share"])
        try:
            value = self.group.deserialize(raw, "G1")
        except MalformedEncoding:
            value = raw
        sub = ShareSubmission(
            sub_id=len(self.submissions),
            request_id=tx["request_id"],
            holder_index=holder_index,
            share=SecretShare(holder_index, value),
            block_time=self.now,
            block_height=self.height - 1,
            dispute_deadline=self.now + self.params.dispute_window_s,
        )
        self.submissions.append(sub)
        self._subs_by_request.setdefault(sub.request_id, []).append(sub)
        return SubmitOutcome.PROVISIONAL

    def _tx_dispute(self, tx):
        sub_id = tx["submission"]
        if not 0 <= sub_id < len(self.submissions):
            raise UnknownSubmission(str(sub_id))
        sub = self.submissions[sub_id]
        challenger = self.holder(tx["challenger"])
        if not challenger.active:
            raise InactiveHolder(f"challenger {challenger.index} is {challenger.status.value}")
        if sub.status is not SubmissionStatus.PROVISIONAL or self.now > sub.dispute_deadline:
            raise NotProvisional(f"submission {sub_id} is no longer disputable")
        rec = self.requests[sub.request_id]
        submitter = self.holder(sub.holder_index)
        status = verify_share(self.group, sub.share, submitter.pk, rec.request)
        if status is ShareStatus.VALID:
            return DisputeOutcome.DISMISSED
        if status is ShareStatus.INVALID_SHARE:
            bounty = min(self.params.reward_per_share, submitter.deposit)
            challenger.rewards_earned += bounty
            self.burned += submitter.deposit - bounty
            submitter.deposit = 0
            submitter.status = HolderStatus.BLACKLISTED
            sub.status = SubmissionStatus.REJECTED
            return DisputeOutcome.UPHELD
        # the client published inconsistent commitments: void and pay the submitters
        subs = [s for s in self.submissions_for(sub.request_id) if s.status is not SubmissionStatus.REJECTED]
        each = rec.escrow // len(subs)
        for s in subs:
            self.holders[s.holder_index - 1].rewards_earned += each
            s.status = SubmissionStatus.FINALIZED
        self.burned += rec.escrow - each * len(subs)
        rec.escrow = 0
        rec.status = "voided"
        return DisputeOutcome.CLIENT_FAULT

    def _tx_finalize(self, tx):
        rid = tx["request_id"]
        rec = self.request(rid)
        if rec.status != "open":
            raise RequestClosed(f"request {rid} is {rec.status}")
        subs = self.submissions_for(rid)
        pending = [s for s in subs if s.status is SubmissionStatus.PROVISIONAL and self.now <= s.dispute_deadline]
        if pending:
            raise NotReady(f"{len(pending)} submissions still inside their dispute window")
        valid = [s for s in subs if s.status is not SubmissionStatus.REJECTED]
        t = rec.request.threshold
        timed_out = self.now >= rec.request.decrypt_time + self.params.reveal_timeout_s
        if len(valid) < t and not timed_out:
            raise NotReady(f"{len(valid)} of {t} shares submitted")
        rewards = {}
        for s in valid[:t]:
            amount = min(self.params.reward_per_share, rec.escrow)
            self.holders[s.holder_index - 1].rewards_earned += amount
            rec.escrow -= amount
            rewards[s.holder_index] = amount
        for s in valid:
            s.status = SubmissionStatus.FINALIZED
        refund = rec.escrow
        self.refunded += refund
        rec.escrow = 0
        rec.status = "finalized"
        reveal = valid[t - 1] if len(valid) >= t else None
        return RewardReport(
            request_id=rid,
            rewards=rewards,
            unrewarded=[s.holder_index for s in valid[t:]],
            reveal_time=reveal.block_time if reveal else None,
            reveal_height=reveal.block_height if reveal else None,
            reconstructable=reveal is not None,
            refunded=refund,
        )

    # -- log export / replay -------------------------------------------------

    def export_log(self, path) -> None:
        """Write the transaction log as JSON lines, one state hash per entry."""
        replayed = Ledger(self.group, self.params)
        with open(path, "w") as fh:
            fh.write(canonical_json({"header": {"group": self.group.describe(),
                                                "params": asdict(self.params)}}) + "\n")
            for entry in self.log:
                result = replayed.apply(entry.tx)
                out = LogEntry(entry.seq, entry.tx, result, replayed.state_hash())
                fh.write(canonical_json(out.to_dict()) + "\n")

    @classmethod
    def replay(cls, group: Group, params: LedgerParams, entries, *, verify: bool = True) -> "Ledger":
        ledger = cls(group, params)
        for entry in entries:
            tx = entry["tx"] if isinstance(entry, dict) else entry.tx
            result = ledger.apply(tx)
            if not verify or not isinstance(entry, dict):
                continue
            if "result" in entry and _jsonable(result) != entry["result"]:
                raise ReplayMismatch(f"entry {entry['seq']}: result {_jsonable(result)!r} != {entry['result']!r}")
            if "state_hash" in entry and ledger.state_hash() != entry["state_hash"]:
                raise ReplayMismatch(f"entry {entry['seq']}: state hash differs")
        return ledger

    @classmethod
    def import_log(cls, path, *, verify: bool = True) -> "Ledger":
        lines = Path(path).read_text().splitlines()
        header = json.loads(lines[0])["header"]
        group = from_description(header["group"])
        params = LedgerParams(**header["params"])
        return cls.replay(group, params, (json.loads(line) for line in lines[1:]), verify=verify)


def _share_hex(group: Group, share: SecretShare) -> str:
    v = share.value
    if isinstance(v, (bytes, bytearray)):
        return bytes(v).hex()
    return group.serialize(v).hex()
