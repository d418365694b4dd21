"""Reveal-verifiable secret sharing for timed-release messages.

A client hides a symmetric key ``k`` in a degree ``t-1`` polynomial whose
first ``t-1`` non-zero evaluations are the holders' Diffie-Hellman shares
``s_i = pk_i^r``.  The remaining holders get their evaluation masked with
their own share.  Any revealed share can be checked against the public
commitments ``g1^r`` / ``g2^r`` with one pairing equation.
"""
from __future__ import annotations

import enum
import hashlib
import hmac
import json
import random
import secrets
from dataclasses import dataclass, field

from .group import Group, MalformedEncoding, from_description


class ProtocolError(Exception):
    pass


class ThresholdOutOfRange(ProtocolError):
    pass


class DuplicateHolderKey(ProtocolError):
    pass


class IndexOutOfRange(ProtocolError):
    pass


class DuplicateX(ProtocolError):
    pass


class NotEnoughShares(ProtocolError):
    pass


class InvalidShareIncluded(ProtocolError):
    pass


class MalformedRequest(ProtocolError):
    pass


class AuthenticationFailed(ProtocolError):
    pass


class ShareStatus(enum.Enum):
    VALID = "valid"
    INVALID_SHARE = "invalid_share"
    DISHONEST_CLIENT = "dishonest_client"


@dataclass(frozen=True)
class KeyPair:
    sk: int
    pk: object
    index: int = 1


@dataclass(frozen=True)
class SecretShare:
    holder_index: int
    value: object


@dataclass(frozen=True)
class Polynomial:
    coefficients: tuple[int, ...]
    modulus: int

    def __call__(self, x: int) -> int:
        return poly_eval(self, x)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1


@dataclass(frozen=True)
class TimelockRequest:
    ciphertext: bytes
    decrypt_time: int
    commitment_a: object
    commitment_b: object
    masks: tuple[tuple[int, bytes], ...]
    threshold: int
    n: int
    request_id: str = field(default="")

    def mask_for(self, index: int) -> bytes:
        for i, alpha in self.masks:
            if i == index:
                return alpha
        raise IndexOutOfRange(f"no mask for holder {index}")

    def to_dict(self, group: Group) -> dict:
        return {
            "group": group.describe(),
            "request_id": self.request_id,
            "ciphertext": self.ciphertext.hex(),
            "decrypt_time": self.decrypt_time,
            "commitment_a": group.serialize(self.commitment_a).hex(),
            "commitment_b": group.serialize(self.commitment_b).hex(),
            "masks": [[i, alpha.hex()] for i, alpha in self.masks],
            "threshold": self.threshold,
            "n": self.n,
        }

    def to_json(self, group: Group) -> str:
        return canonical_json(self.to_dict(group))

    @classmethod
    def from_dict(cls, data: dict, group: Group | None = None) -> "TimelockRequest":
        if group is None:
            group = from_description(data["group"])
        try:
            return cls(
                ciphertext=bytes.fromhex(data["ciphertext"]),
                decrypt_time=int(data["decrypt_time"]),
                commitment_a=group.deserialize(bytes.fromhex(data["commitment_a"]), "G1"),
                commitment_b=group.deserialize(bytes.fromhex(data["commitment_b"]), "G2"),
                masks=tuple((int(i), bytes.fromhex(a)) for i, a in data["masks"]),
                threshold=int(data["threshold"]),
                n=int(data["n"]),
                request_id=data.get("request_id", ""),
            )
        except (KeyError, ValueError, TypeError, MalformedEncoding) as exc:
            raise MalformedRequest(f"bad request encoding: {exc}") from None

    @classmethod
    def from_json(cls, text: str, group: Group | None = None) -> "TimelockRequest":
        return cls.from_dict(json.loads(text), group)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def share_to_dict(group: Group, share: SecretShare) -> dict:
    return {"holder_index": share.holder_index, "value": group.serialize(share.value).hex()}


def share_from_dict(group: Group, data: dict) -> SecretShare:
    return SecretShare(int(data["holder_index"]), group.deserialize(bytes.fromhex(data["value"]), "G1"))


# -- keys -------------------------------------------------------------------

def random_scalar(group: Group, rng: random.Random | None = None) -> int:
    """Uniform in [1, order).  ``rng=None`` draws from the OS CSPRNG."""
    if rng is None:
        return 1 + secrets.randbelow(group.order - 1)
    return rng.randrange(1, group.order)


def keygen(group: Group, seed=None, *, sk: int | None = None, index: int = 1) -> KeyPair:
    """Generate a holder key pair.

    A seed gives a reproducible key (simulation use); ``sk`` forces the
    secret key outright.
    """
    if sk is None:
        if seed is not None and seed == 0:
            raise ValueError("seed must be nonzero")
        rng = None if seed is None else random.Random(seed)
        sk = random_scalar(group, rng)
    sk = group.scalar(sk)
    return KeyPair(sk=sk, pk=group.exp(group.g1, sk), index=index)


def _possession_challenge(group: Group, pk) -> object:
    digest = hashlib.sha256(b"timedrelease/pop" + group.serialize(pk)).digest()
    return group.exp(group.g2, int.from_bytes(digest, "big") % (group.order - 1) + 1)


def prove_possession(group: Group, kp: KeyPair):
    """Signature over a key-derived challenge in G2: ``challenge^sk``."""
    return group.exp(_possession_challenge(group, kp.pk), kp.sk)


def verify_possession(group: Group, pk, sig) -> bool:
    challenge = _possession_challenge(group, pk)
    return group.pairing(group.g1, sig) == group.pairing(pk, challenge)


# -- polynomial arithmetic --------------------------------------------------

def poly_eval(poly: Polynomial, x: int) -> int:
    m = poly.modulus
    acc = 0
    for c in reversed(poly.coefficients):
        acc = (acc * x + c) % m
    return acc


def _poly_mul_linear(coeffs: list[int], root: int, m: int) -> list[int]:
    # multiply by (x - root)
    out = [0] * (len(coeffs) + 1)
    for i, c in enumerate(coeffs):
        out[i] = (out[i] - root * c) % m
        out[i + 1] = (out[i + 1] + c) % m
    return out


def lagrange_interpolate(points, modulus: int) -> Polynomial:
    """Coefficients (lowest degree first) of the unique polynomial of degree
    < len(points) through ``points`` over Z_modulus.  ``modulus`` must be prime."""
    pts = [(x % modulus, y % modulus) for x, y in points]
    if not pts:
        raise ValueError("need at least one point")
    if len(pts) > modulus:
        raise ValueError("more points than field elements")
    xs = [x for x, _ in pts]
    if len(set(xs)) != len(xs):
        raise DuplicateX(f"x values must be distinct: {xs}")
    result = [0] * len(pts)
    for j, (xj, yj) in enumerate(pts):
        basis, denom = [1], 1
        for k, (xk, _) in enumerate(pts):
            if k != j:
                basis = _poly_mul_linear(basis, xk, modulus)
                denom = denom * (xj - xk) % modulus
        scale = yj * pow(denom, -1, modulus) % modulus
        for i, c in enumerate(basis):
            result[i] = (result[i] + scale * c) % modulus
    return Polynomial(tuple(result), modulus)


# -- share bridging and masks -----------------------------------------------

def share_to_scalar(group: Group, s) -> int:
    """Map a share (a G1 element) to an interpolation ordinate.

    Toy groups use the element's integer value; the curve hashes the
    compressed encoding into the scalar field.
    """
    if group.backend_id == "toy":
        return s % group.field_modulus
    digest = hashlib.sha512(b"timedrelease/share" + group.serialize(s)).digest()
    return int.from_bytes(digest, "big") % group.field_modulus


def scalar_width(group: Group) -> int:
    return max(1, ((group.field_modulus - 1).bit_length() + 7) // 8)


def encode_scalar(group: Group, x: int) -> bytes:
    return x.to_bytes(scalar_width(group), "big")


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b, strict=True))


# -- symmetric encryption ---------------------------------------------------

TAG_SIZE = 32


def _key_material(k: int) -> tuple[bytes, bytes]:
    raw = k.to_bytes(32, "big")
    return (hashlib.sha256(b"timedrelease/enc" + raw).digest(),
            hashlib.sha256(b"timedrelease/mac" + raw).digest())


def _keystream(key: bytes, length: int) -> bytes:
    out = bytearray()
    counter = 0
    while len(out) < length:
        out += hashlib.sha256(key + counter.to_bytes(8, "big")).digest()
        counter += 1
    return bytes(out[:length])


def encrypt_message(k: int, message: bytes) -> bytes:
    """SHA-256 counter-mode keystream, then an HMAC-SHA256 tag over the body.

    There is no nonce: every request uses a fresh ``k``.
    """
    enc_key, mac_key = _key_material(k)
    body = _xor(message, _keystream(enc_key, len(message)))
    return body + hmac.new(mac_key, body, hashlib.sha256).digest()


def decrypt_message(k: int, ciphertext: bytes) -> bytes:
    if len(ciphertext) < TAG_SIZE:
        raise AuthenticationFailed("ciphertext shorter than tag")
    enc_key, mac_key = _key_material(k)
    body, tag = ciphertext[:-TAG_SIZE], ciphertext[-TAG_SIZE:]
    if not hmac.compare_digest(tag, hmac.new(mac_key, body, hashlib.sha256).digest()):
        raise AuthenticationFailed("integrity tag mismatch")
    return _xor(body, _keystream(enc_key, len(body)))


# -- client side ------------------------------------------------------------

def client_polynomial(group: Group, k: int, shares: list, t: int) -> Polynomial:
    points = [(0, k)] + [(i, share_to_scalar(group, shares[i - 1])) for i in range(1, t)]
    return lagrange_interpolate(points, group.field_modulus)


def _request_id(group: Group, req: TimelockRequest) -> str:
    body = req.to_dict(group)
    body.pop("request_id")
    return hashlib.sha256(canonical_json(body).encode()).hexdigest()[:32]


def build_request(group: Group, k: int, r: int, message: bytes, decrypt_time: int,
                  holder_pks: list, t: int, *, commitment_r: int | None = None) -> TimelockRequest:
    """Client actions: encrypt, derive shares, mask the tail evaluations.

    ``commitment_r`` publishes ``g2^commitment_r`` instead of ``g2^r``; only
    a dishonest client would do that, and it exists for testing detection.
    """
    n = len(holder_pks)
    if n < 2:
        raise ThresholdOutOfRange("need at least two holders")
    if not 1 <= t <= n:
        raise ThresholdOutOfRange(f"threshold {t} outside 1..{n}")
    if n >= group.field_modulus:
        raise ThresholdOutOfRange(f"{n} holders do not fit in a field of size {group.field_modulus}")
    encoded = [group.serialize(pk) for pk in holder_pks]
    if len(set(encoded)) != n:
        raise DuplicateHolderKey("holder public keys must be distinct")
    if r % group.order == 0:
        raise ValueError("r must be nonzero modulo the group order")
    if not 0 < k < group.field_modulus:
        raise ValueError("k must be a nonzero field element")

    shares = [group.exp(pk, r) for pk in holder_pks]
    poly = client_polynomial(group, k, shares, t)
    masks = tuple(
        (i, _xor(encode_scalar(group, poly_eval(poly, i)),
                 encode_scalar(group, share_to_scalar(group, shares[i - 1]))))
        for i in range(t, n + 1)
    )
    b_exp = r if commitment_r is None else commitment_r
    req = TimelockRequest(
        ciphertext=encrypt_message(k, message),
        decrypt_time=int(decrypt_time),
        commitment_a=group.exp(group.g1, r),
        commitment_b=group.exp(group.g2, b_exp),
        masks=masks,
        threshold=t,
        n=n,
    )
    return TimelockRequest(**{**req.__dict__, "request_id": _request_id(group, req)})


def check_request(req: TimelockRequest) -> None:
    """Structural checks; raises MalformedRequest."""
    if not 1 <= req.threshold <= req.n:
        raise MalformedRequest(f"threshold {req.threshold} outside 1..{req.n}")
    indices = [i for i, _ in req.masks]
    if sorted(indices) != list(range(req.threshold, req.n + 1)):
        raise MalformedRequest(f"mask indices {indices} must be {req.threshold}..{req.n}")


# -- holder side ------------------------------------------------------------

def derive_share(group: Group, request: TimelockRequest, kp: KeyPair) -> SecretShare:
    if not 1 <= kp.index <= request.n:
        raise IndexOutOfRange(f"holder {kp.index} not in 1..{request.n}")
    return SecretShare(kp.index, group.exp(request.commitment_a, kp.sk))


def commitments_consistent(group: Group, request: TimelockRequest) -> bool:
    return group.pairing(request.commitment_a, group.g2) == group.pairing(group.g1, request.commitment_b)


def verify_share(group: Group, share: SecretShare, pk, request: TimelockRequest) -> ShareStatus:
    """Public check of a revealed share.

    The commitment pair is checked first, so a client that published
    mismatched ``g1^r`` / ``g2^r'`` is always blamed, even in toy groups of
    composite order where the share equation can hold by accident.
    """
    if not commitments_consistent(group, request):
        return ShareStatus.DISHONEST_CLIENT
    value = share.value
    if isinstance(value, (bytes, bytearray)):
        try:
            value = group.deserialize(bytes(value), "G1")
        except MalformedEncoding:
            return ShareStatus.INVALID_SHARE
    elif not group.is_element(value):
        return ShareStatus.INVALID_SHARE
    if group.pairing(value, group.g2) == group.pairing(pk, request.commitment_b):
        return ShareStatus.VALID
    return ShareStatus.INVALID_SHARE


def share_point(group: Group, request: TimelockRequest, share: SecretShare) -> tuple[int, int]:
    i = share.holder_index
    y = share_to_scalar(group, share.value)
    if i < request.threshold:
        return i, y
    unmasked = int.from_bytes(_xor(encode_scalar(group, y), request.mask_for(i)), "big")
    if unmasked >= group.field_modulus:
        raise MalformedRequest(f"mask for holder {i} decodes outside the field")
    return i, unmasked


def reconstruct_key(group: Group, request: TimelockRequest, shares, pks, *, verify: bool = True) -> int:
    """Recover ``k`` from at least ``t`` verified shares.

    ``pks`` is indexable by ``holder_index - 1`` (a list) or a mapping from
    holder index to public key.
    """
    by_index = {}
    for s in shares:
        if s.holder_index in by_index:
            raise ProtocolError(f"duplicate share for holder {s.holder_index}")
        if not 1 <= s.holder_index <= request.n:
            raise IndexOutOfRange(f"holder {s.holder_index} not in 1..{request.n}")
        by_index[s.holder_index] = s
    if len(by_index) < request.threshold:
        raise NotEnoughShares(f"have {len(by_index)} shares, need {request.threshold}")
    chosen = [by_index[i] for i in sorted(by_index)][: request.threshold]
    if verify:
        for s in chosen:
            pk = pks[s.holder_index] if isinstance(pks, dict) else pks[s.holder_index - 1]
            status = verify_share(group, s, pk, request)
            if status is not ShareStatus.VALID:
                raise InvalidShareIncluded(f"share of holder {s.holder_index}: {status.value}")
    points = [share_point(group, request, s) for s in chosen]
    return poly_eval(lagrange_interpolate(points, group.field_modulus), 0)


def open_request(group: Group, request: TimelockRequest, shares, pks) -> bytes:
    """Reconstruct ``k`` and decrypt the message."""
    return decrypt_message(reconstruct_key(group, request, shares, pks), request.ciphertext)
