"""Timed-release secret sharing with reveal-verifiable shares, plus a
simulated coordinating ledger and a strategic-voting experiment."""

from .group import CurveGroup, ToyGroup, example_group, make_params
from .protocol import (
    KeyPair,
    SecretShare,
    ShareStatus,
    TimelockRequest,
    build_request,
    decrypt_message,
    derive_share,
    encrypt_message,
    keygen,
    lagrange_interpolate,
    open_request,
    poly_eval,
    reconstruct_key,
    verify_share,
)

__version__ = "0.1.0"
