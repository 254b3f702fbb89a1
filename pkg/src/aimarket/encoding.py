"""Canonical byte encoding and keyed-hash message authentication.

Every signed message and every checkpointed ledger state goes through
:func:`encode`, so two replicas holding equal values always produce equal
bytes.  Each field is written as ``tag (1 byte) | length (u32 BE) | payload``
in declaration order; integers are big-endian, mappings are sorted by the
encoding of their keys.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import struct
from fractions import Fraction
from typing import Any

_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")
_I64 = struct.Struct(">q")

TAG_NONE = b"\x00"
TAG_BOOL = b"\x01"
TAG_INT = b"\x02"
TAG_NEG_INT = b"\x03"
TAG_BYTES = b"\x04"
TAG_STR = b"\x05"
TAG_FRACTION = b"\x06"
TAG_FLOAT = b"\x07"
TAG_LIST = b"\x08"
TAG_MAP = b"\x09"
TAG_RECORD = b"\x0a"

# Floats (reputation only) are quantized before encoding so that replicas on
# different platforms hash identically.
FLOAT_QUANTUM = 10**12


def quantize(x: float) -> int:
    return round(x * FLOAT_QUANTUM)


def _frame(tag: bytes, payload: bytes) -> bytes:
    return tag + _U32.pack(len(payload)) + payload


_U64_FRAME = TAG_INT + _U32.pack(8)


def _encode_int(value: int) -> bytes:
    if 0 <= value < 2**64:
        return _U64_FRAME + _U64.pack(value)
    if value < 0:
        if value >= -(2**63):
            return _frame(TAG_NEG_INT, _I64.pack(value))
        # Below i64: magnitude padded to at least 9 bytes, so it never
        # shares a length with the fixed 8-byte form.
        mag = -value
        return _frame(TAG_NEG_INT, mag.to_bytes(max(9, (mag.bit_length() + 7) // 8), "big"))
    # Beyond u64: big-endian magnitude, always longer than 8 bytes.
    return _frame(TAG_INT, value.to_bytes((value.bit_length() + 7) // 8, "big"))


def encode(value: Any) -> bytes:
    """Encode ``value`` canonically.

    Supports None, bool, int, bytes, str, Fraction, float, Enum, list/tuple,
    set/frozenset (sorted), dict (sorted by encoded key), and any object
    exposing ``canonical_fields()`` returning an ordered tuple of fields.
    """
    t = type(value)
    if t is str:
        raw = value.encode("utf-8")
        return TAG_STR + _U32.pack(len(raw)) + raw
    if t is int:
        return _encode_int(value)
    if value is None:
        return _frame(TAG_NONE, b"")
    if isinstance(value, bool):
        return _frame(TAG_BOOL, b"\x01" if value else b"\x00")
    if isinstance(value, enum.Enum):
        return encode(value.name)
    if isinstance(value, int):
        return _encode_int(value)
    if isinstance(value, (bytes, bytearray)):
        return _frame(TAG_BYTES, bytes(value))
    if isinstance(value, str):
        return _frame(TAG_STR, value.encode("utf-8"))
    if isinstance(value, Fraction):
        return _frame(TAG_FRACTION, encode(value.numerator) + encode(value.denominator))
    if isinstance(value, float):
        return _frame(TAG_FLOAT, _I64.pack(quantize(value)))
    if isinstance(value, (list, tuple)):
        return _frame(TAG_LIST, _U32.pack(len(value)) + b"".join(encode(v) for v in value))
    if isinstance(value, (set, frozenset)):
        items = sorted(encode(v) for v in value)
        return _frame(TAG_LIST, _U32.pack(len(items)) + b"".join(items))
    if isinstance(value, dict):
        pairs = sorted((encode(k), encode(v)) for k, v in value.items())
        return _frame(TAG_MAP, _U32.pack(len(pairs)) + b"".join(k + v for k, v in pairs))
    fields = getattr(value, "canonical_fields", None)
    if fields is not None:
        parts = fields()
        return _frame(TAG_RECORD, _U32.pack(len(parts)) + b"".join(encode(p) for p in parts))
    raise TypeError(f"no canonical encoding for {type(value).__name__}")


def encode_fields(*fields: Any) -> bytes:
    """Encode a message as an ordered record of ``fields``."""
    return _frame(TAG_RECORD, _U32.pack(len(fields)) + b"".join(encode(f) for f in fields))


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def sign(key: bytes, message: bytes) -> bytes:
    return hmac.new(key, message, hashlib.sha256).digest()


def verify_sig(key: bytes, message: bytes, signature: bytes) -> bool:
    return hmac.compare_digest(sign(key, message), signature)


class Keyring:
    """Deterministic per-identity signing keys derived from one master secret.

    Stands in for a PKI: anyone holding the keyring can both sign as and
    verify any identity, which is all a single-process simulation needs.
    """

    def __init__(self, master: bytes) -> None:
        self._master = master
        self._cache: dict[str, bytes] = {}

    def key(self, identity: str) -> bytes:
        k = self._cache.get(identity)
        if k is None:
            k = hashlib.sha256(b"aimarket/key\x00" + self._master + b"\x00" + identity.encode()).digest()
            self._cache[identity] = k
        return k

    def sign(self, identity: str, message: bytes) -> bytes:
        return sign(self.key(identity), message)

    def verify(self, identity: str, message: bytes, signature: bytes) -> bool:
        return hmac.compare_digest(self.sign(identity, message), signature)
