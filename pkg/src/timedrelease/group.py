"""Cyclic groups with a bilinear pairing.

Two backends share one interface:

* ``ToyGroup``: the multiplicative group of integers modulo a small prime.
  G2 is the same group as G1 and the pairing is computed from discrete logs
  found by exhaustive search, so it only works for tiny moduli.
* ``CurveGroup``: BLS12-381 via ``py_arkworks_bls12381``.

Elements are the backend's native values (``int`` for the toy group, arkworks
points for the curve).  Scalars are plain ``int`` reduced modulo the group order.
"""
from __future__ import annotations

from functools import cached_property, lru_cache

import py_arkworks_bls12381 as ark

TOY_PAIRING_BOUND = 2**20

BLS12_381_ORDER = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001

KINDS = ("G1", "G2", "GT")


class GroupError(Exception):
    pass


class NonGenerator(GroupError):
    pass


class UnsupportedCurve(GroupError):
    pass


class ToyGroupTooLarge(GroupError):
    pass


class MalformedEncoding(GroupError):
    pass


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    i = 2
    while i * i <= p:
        if p % i == 0:
            return False
        i += 1
    return True


def _prime_factors(n: int) -> set[int]:
    out, d = set(), 2
    while d * d <= n:
        while n % d == 0:
            out.add(d)
            n //= d
        d += 1
    if n > 1:
        out.add(n)
    return out


def multiplicative_order(g: int, p: int) -> int:
    """Order of ``g`` in (Z/pZ)*."""
    if g % p == 0:
        raise NonGenerator(f"{g} is not a unit modulo {p}")
    if not _is_prime(p):
        x, k = g % p, 1
        while x != 1:
            x = x * g % p
            k += 1
        return k
    # the order divides p - 1: strip prime factors while g^(order/q) stays 1
    order = p - 1
    for q in _prime_factors(p - 1):
        while order % q == 0 and pow(g, order // q, p) == 1:
            order //= q
    return order


class Group:
    """Common interface.  Subclasses fill in the arithmetic."""

    backend_id: str
    order: int
    g1: object
    g2: object

    @property
    def field_modulus(self) -> int:
        """Prime modulus of the field used for share interpolation."""
        raise NotImplementedError

    def scalar(self, x: int) -> int:
        return x % self.order

    def identity(self, kind: str = "G1"):
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def exp(self, base, e: int):
        raise NotImplementedError

    def pairing(self, p, q):
        raise NotImplementedError

    def element_width(self, kind: str = "G1") -> int:
        raise NotImplementedError

    def serialize(self, el) -> bytes:
        raise NotImplementedError

    def deserialize(self, data: bytes, kind: str = "G1"):
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


class ToyGroup(Group):
    backend_id = "toy"

    def __init__(self, p: int, g: int, order: int | None = None):
        if not _is_prime(p):
            raise GroupError(f"toy modulus {p} is not prime")
        declared = p - 1 if order is None else order
        actual = multiplicative_order(g, p)
        if actual != declared:
            raise NonGenerator(f"{g} has order {actual} modulo {p}, expected {declared}")
        self.p = p
        self.order = declared
        self.g1 = g % p
        self.g2 = g % p  # G2 := G1 in toy mode
        self._width = max(1, ((p - 1).bit_length() + 7) // 8)

    def __repr__(self):
        return f"ToyGroup(p={self.p}, g={self.g1}, order={self.order})"

    def __eq__(self, other):
        return isinstance(other, ToyGroup) and (self.p, self.g1, self.order) == (other.p, other.g1, other.order)

    def __hash__(self):
        return hash(("toy", self.p, self.g1, self.order))

    @property
    def field_modulus(self) -> int:
        # Shares are interpolated in Z_p, matching the worked numeric example.
        return self.p

    def identity(self, kind: str = "G1") -> int:
        return 1

    def is_element(self, el) -> bool:
        return isinstance(el, int) and 0 < el < self.p and pow(el, self.order, self.p) == 1

    def mul(self, a: int, b: int) -> int:
        return a * b % self.p

    def exp(self, base: int, e: int) -> int:
        return pow(base, e % self.order, self.p)

    @cached_property
    def _dlog_table(self) -> dict[int, int]:
        if self.p >= TOY_PAIRING_BOUND:
            raise ToyGroupTooLarge(f"exhaustive discrete log needs p < 2^20, got {self.p}")
        table, x = {}, 1
        for k in range(self.order):
            table[x] = k
            x = x * self.g1 % self.p
        return table

    def dlog(self, el: int) -> int:
        try:
            return self._dlog_table[el]
        except KeyError:
            raise MalformedEncoding(f"{el} is not in the subgroup generated by {self.g1}") from None

    def pairing(self, p: int, q: int) -> int:
        return pow(self.g1, self.dlog(p) * self.dlog(q) % self.order, self.p)

    def element_width(self, kind: str = "G1") -> int:
        return self._width

    def serialize(self, el: int) -> bytes:
        return el.to_bytes(self._width, "big")

    def deserialize(self, data: bytes, kind: str = "G1") -> int:
        if len(data) != self._width:
            raise MalformedEncoding(f"expected {self._width} bytes, got {len(data)}")
        el = int.from_bytes(data, "big")
        if not self.is_element(el):
            raise MalformedEncoding(f"{el} is not a group element")
        return el

    def describe(self) -> dict:
        return {"backend": "toy", "p": self.p, "g": self.g1, "order": self.order}


class CurveGroup(Group):
    backend_id = "curve"
    curve_id = "bls12_381"

    _widths = {"G1": 48, "G2": 96}

    def __init__(self):
        self.order = BLS12_381_ORDER
        self.g1 = ark.G1Point()
        self.g2 = ark.G2Point()

    def __repr__(self):
        return "CurveGroup('bls12_381')"

    def __eq__(self, other):
        return isinstance(other, CurveGroup)

    def __hash__(self):
        return hash("bls12_381")

    @property
    def field_modulus(self) -> int:
        return self.order

    def identity(self, kind: str = "G1"):
        if kind == "G1":
            return ark.G1Point.identity()
        if kind == "G2":
            return ark.G2Point.identity()
        return ark.GT.one()

    def is_element(self, el) -> bool:
        return isinstance(el, (ark.G1Point, ark.G2Point))

    def mul(self, a, b):
        if isinstance(a, ark.GT):
            return a * b
        return a + b

    def exp(self, base, e: int):
        if isinstance(base, ark.GT):
            raise TypeError("GT exponentiation is not exposed by the curve backend")
        return base * ark.Scalar(e % self.order)

    def pairing(self, p, q):
        return ark.GT.pairing(p, q)

    def element_width(self, kind: str = "G1") -> int:
        try:
            return self._widths[kind]
        except KeyError:
            raise TypeError(f"{kind} elements have no byte encoding on the curve backend") from None

    def serialize(self, el) -> bytes:
        if not self.is_element(el):
            raise TypeError(f"cannot serialize {type(el).__name__}")
        return bytes(el.to_compressed_bytes())

    def deserialize(self, data: bytes, kind: str = "G1"):
        width = self.element_width(kind)
        if len(data) != width:
            raise MalformedEncoding(f"expected {width} bytes for {kind}, got {len(data)}")
        cls = ark.G1Point if kind == "G1" else ark.G2Point
        try:
            el = cls.from_compressed_bytes(list(data))
        except ValueError as exc:
            raise MalformedEncoding(str(exc)) from None
        if bytes(el.to_compressed_bytes()) != bytes(data):
            raise MalformedEncoding("non-canonical encoding")
        return el

    def describe(self) -> dict:
        return {"backend": "curve", "curve": self.curve_id}


def make_params(backend_id: str, **config) -> Group:
    """Build a validated group.

    ``make_params("toy", p=23, g=11)`` or ``make_params("curve", curve="bls12_381")``.
    """
    if backend_id == "toy":
        return _toy_group(config.get("p", 23), config.get("g", 11), config.get("order"))
    if backend_id == "curve":
        curve = config.get("curve", "bls12_381")
        if curve.lower().replace("-", "_") != "bls12_381":
            raise UnsupportedCurve(curve)
        return CurveGroup()
    raise GroupError(f"unknown backend {backend_id!r}")


@lru_cache(maxsize=32)
def _toy_group(p: int, g: int, order: int | None) -> ToyGroup:
    # groups are immutable; sharing one instance shares its discrete-log table
    return ToyGroup(p, g, order)


def from_description(desc: dict) -> Group:
    backend = desc.get("backend")
    config = {k: v for k, v in desc.items() if k != "backend"}
    return make_params(backend, **config)


def example_group() -> ToyGroup:
    """The mod-23 group with generator 11 used by the worked numeric example."""
    return ToyGroup(23, 11)
