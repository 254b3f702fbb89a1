from __future__ import annotations

import pytest

from aimarket.assets import NATIVE, TOKEN, USD_MICRO
from aimarket.encoding import Keyring
from aimarket.ledger import GlobalLedger

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def _criterion_order(key: str):
    digits = "".join(ch for ch in key if ch.isdigit())
    return int(digits), key


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS, key=_criterion_order):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:>3}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def keyring() -> Keyring:
    return Keyring(b"test-master-secret")


@pytest.fixture
def ledger(keyring) -> GlobalLedger:
    return GlobalLedger(keyring, min_collateral=100 * TOKEN)


def fund(ledger: GlobalLedger, account: str, tokens: int) -> None:
    ledger.mint_genesis(account, tokens * TOKEN)


def staked_client(ledger: GlobalLedger, client: str, tokens: int = 100, usd: int = 100, asset=NATIVE):
    if asset.is_native:
        fund(ledger, client, tokens)
    return ledger.stake_tokens(client, asset, tokens * TOKEN, usd * USD_MICRO)


def miner(ledger: GlobalLedger, name: str, services=("text", "image"), collateral: int = 100):
    fund(ledger, name, collateral)
    return ledger.register_miner(name, collateral * TOKEN, services)
