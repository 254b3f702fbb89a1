"""Token units and staked-asset kinds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import AmountOverflow

TOKEN = 10**6  # base units per display token
USD_MICRO = 10**6  # micro-dollars per dollar
MAX_AMOUNT = 2**64 - 1


def tokens(n: int | float) -> int:
    """Display tokens to base units."""
    return round(n * TOKEN)


def check_amount(value: int) -> int:
    """Validate a TokenAmount: a non-negative integer that fits in u64."""
    if not isinstance(value, int) or isinstance(value, bool):
        raise TypeError(f"token amounts are integers, got {type(value).__name__}")
    if value < 0:
        raise AmountOverflow(f"negative token amount {value}")
    if value > MAX_AMOUNT:
        raise AmountOverflow(f"token amount {value} exceeds u64")
    return value


@dataclass(frozen=True)
class AssetKind:
    """Native platform token, or an external asset identified by ``symbol``."""

    symbol: Optional[str] = None

    def __post_init__(self) -> None:
        if self.symbol is not None and not self.symbol:
            raise ValueError("external asset symbol must be non-empty")

    @classmethod
    def native(cls) -> "AssetKind":
        return cls(None)

    @classmethod
    def external(cls, symbol: str) -> "AssetKind":
        if not symbol:
            raise ValueError("external asset symbol must be non-empty")
        return cls(symbol)

    @property
    def is_native(self) -> bool:
        return self.symbol is None

    def canonical_fields(self) -> tuple:
        return ("Native",) if self.symbol is None else ("External", self.symbol)

    def __str__(self) -> str:
        return "Native" if self.symbol is None else f"External({self.symbol})"


NATIVE = AssetKind.native()
