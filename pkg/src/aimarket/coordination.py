"""Coordinator quorum: m-of-c checkpoint certificates and request throttling."""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .encoding import Keyring, sign, verify_sig
from .errors import DuplicateSignature, HeightGap, InvariantViolation, NotAMember

_HEIGHT = struct.Struct(">Q")
_COUNT = struct.Struct(">I")
_IDLEN = struct.Struct(">H")
HASH_LEN = 32
SIG_LEN = 32


@dataclass(frozen=True)
class Coordinator:
    id: str
    stake: int
    key: bytes = field(repr=False)


class CoordinatorSet:
    """Static coordinator membership with an ``m``-of-``c`` signing threshold."""

    def __init__(self, members: list[Coordinator], m: int) -> None:
        if not members:
            raise ValueError("coordinator set needs at least one member")
        if not 1 <= m <= len(members):
            raise ValueError(f"CoordinatorSet requires 1 <= m <= c, got m={m}, c={len(members)}")
        stakes = {c.stake for c in members}
        if len(stakes) != 1:
            raise ValueError("CoordinatorSet requires equal member stakes")
        ids = [c.id for c in members]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate coordinator ids")
        self.members = {c.id: c for c in members}
        self.m = m
        self.committed: dict[int, "Checkpoint"] = {}
        self.last_committed = 0

    @classmethod
    def uniform(cls, c: int, m: int, d: int, keyring: Keyring, prefix: str = "coord") -> "CoordinatorSet":
        width = len(str(c - 1))
        members = [
            Coordinator(f"{prefix}{i:0{width}d}", d, keyring.key(f"{prefix}{i:0{width}d}")) for i in range(c)
        ]
        return cls(members, m)

    @property
    def c(self) -> int:
        return len(self.members)

    @property
    def d(self) -> int:
        return next(iter(self.members.values())).stake

    def commit(self, cp: "Checkpoint") -> None:
        """Append a committed checkpoint; refuses gaps and conflicting heights."""
        if not is_committed(cp, self):
            raise InvariantViolation(f"checkpoint at height {cp.height} lacks a quorum")
        prior = self.committed.get(cp.height)
        if prior is not None:
            if prior.state_hash != cp.state_hash:
                raise InvariantViolation(f"conflicting commits at height {cp.height}")
            return
        if cp.height != self.last_committed + 1:
            raise HeightGap(f"commit at {cp.height}, expected {self.last_committed + 1}")
        self.committed[cp.height] = cp
        self.last_committed = cp.height


@dataclass
class Checkpoint:
    height: int
    state_hash: bytes
    signatures: dict[str, bytes] = field(default_factory=dict)

    def message(self) -> bytes:
        return checkpoint_message(self.height, self.state_hash)


def checkpoint_message(height: int, state_hash: bytes) -> bytes:
    """Bytes a coordinator signs: height (u64 BE) followed by the 32-byte state hash."""
    if len(state_hash) != HASH_LEN:
        raise ValueError("state hash must be 32 bytes")
    return _HEIGHT.pack(height) + state_hash


def propose_checkpoint(cset: CoordinatorSet, ledger, height: int) -> Checkpoint:
    if height != cset.last_committed + 1:
        raise HeightGap(f"proposed height {height}, last committed {cset.last_committed}")
    return Checkpoint(height, ledger.state_hash())


def sign_and_collect(cp: Checkpoint, signer: str, cset: CoordinatorSet) -> Checkpoint:
    member = cset.members.get(signer)
    if member is None:
        raise NotAMember(signer)
    if signer in cp.signatures:
        raise DuplicateSignature(f"{signer} already signed height {cp.height}")
    cp.signatures[signer] = sign(member.key, cp.message())
    return cp


def valid_signers(cp: Checkpoint, cset: CoordinatorSet) -> set[str]:
    msg = cp.message()
    return {
        cid
        for cid, sig in cp.signatures.items()
        if cid in cset.members and verify_sig(cset.members[cid].key, msg, sig)
    }


def is_committed(cp: Checkpoint, cset: CoordinatorSet) -> bool:
    return len(valid_signers(cp, cset)) >= cset.m


def encode_checkpoint(cp: Checkpoint) -> bytes:
    """Wire format: height u64 | state_hash | u32 count | (u16 len, id, sig)* sorted by id."""
    out = [checkpoint_message(cp.height, cp.state_hash), _COUNT.pack(len(cp.signatures))]
    for cid in sorted(cp.signatures):
        raw = cid.encode("utf-8")
        sig = cp.signatures[cid]
        if len(sig) != SIG_LEN:
            raise ValueError("signatures must be 32 bytes")
        out.append(_IDLEN.pack(len(raw)) + raw + sig)
    return b"".join(out)


def decode_checkpoint(data: bytes) -> Checkpoint:
    if len(data) < _HEIGHT.size + HASH_LEN + _COUNT.size:
        raise ValueError("truncated checkpoint")
    (height,) = _HEIGHT.unpack_from(data, 0)
    pos = _HEIGHT.size
    state_hash = data[pos : pos + HASH_LEN]
    pos += HASH_LEN
    (count,) = _COUNT.unpack_from(data, pos)
    pos += _COUNT.size
    sigs: dict[str, bytes] = {}
    for _ in range(count):
        (n,) = _IDLEN.unpack_from(data, pos)
        pos += _IDLEN.size
        cid = data[pos : pos + n].decode("utf-8")
        pos += n
        sig = data[pos : pos + SIG_LEN]
        if len(sig) != SIG_LEN:
            raise ValueError("truncated signature")
        pos += SIG_LEN
        if cid in sigs:
            raise DuplicateSignature(cid)
        sigs[cid] = sig
    if pos != len(data):
        raise ValueError("trailing bytes after checkpoint")
    return Checkpoint(height, state_hash, sigs)


class CoordinatorReplica:
    """An honest coordinator: signs only the hash of its own replica, once per height."""

    def __init__(self, member_id: str, ledger) -> None:
        self.id = member_id
        self.ledger = ledger
        self._signed: dict[int, bytes] = {}

    def endorse(self, cp: Checkpoint, cset: CoordinatorSet) -> bool:
        if cp.state_hash != self.ledger.state_hash():
            return False
        prior = self._signed.get(cp.height)
        if prior is not None and prior != cp.state_hash:
            return False
        if self.id in cp.signatures:
            return True
        sign_and_collect(cp, self.id, cset)
        self._signed[cp.height] = cp.state_hash
        return True


def attack_budget(m: int, d: int) -> int:
    """Minimum stake an attacker must control to own a signing quorum: B(m) = d * m."""
    if m < 1 or d <= 0:
        raise ValueError("need m >= 1 and d > 0")
    return d * m


def quorum_budget_share(m: int, c: int, coordinator_share: Fraction) -> Fraction:
    """Attack budget as a fraction of circulation when the c coordinators hold ``coordinator_share``."""
    return Fraction(m) * Fraction(coordinator_share) / c


@dataclass(frozen=True)
class ThresholdPolicy:
    max_requests: int = 10
    window: int = 100
    freeze: int = 100

    def __post_init__(self) -> None:
        if self.max_requests < 1:
            raise ValueError("max_requests must be >= 1")
        if self.window < 1 or self.freeze < 0:
            raise ValueError("window must be >= 1 and freeze >= 0")


@dataclass(frozen=True)
class Allow:
    pass


@dataclass(frozen=True)
class Frozen:
    until: int


ALLOW = Allow()
Verdict = Union[Allow, Frozen]


class RequestThrottle:
    """Sliding-window request counter per (client, service)."""

    def __init__(self, policy: ThresholdPolicy) -> None:
        self.policy = policy
        self._accepted: dict[tuple[str, str], deque[int]] = {}
        self._frozen: dict[tuple[str, str], int] = {}

    def frozen_until(self, client: str, service_type: str, now: int) -> Optional[int]:
        until = self._frozen.get((client, service_type))
        return until if until is not None and now < until else None

    def enforce(self, client: str, service_type: str, now: int) -> Verdict:
        key = (client, service_type)
        until = self._frozen.get(key)
        if until is not None:
            if now < until:
                return Frozen(until)
            del self._frozen[key]
        times = self._accepted.setdefault(key, deque())
        horizon = now - self.policy.window
        while times and times[0] <= horizon:
            times.popleft()
        if len(times) >= self.policy.max_requests:
            until = now + self.policy.freeze
            self._frozen[key] = until
            return Frozen(until)
        times.append(now)
        return ALLOW


def enforce_threshold(throttle: RequestThrottle, client: str, service_type: str, now: int) -> Verdict:
    return throttle.enforce(client, service_type, now)
