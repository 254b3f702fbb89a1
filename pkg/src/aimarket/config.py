"""Scenario configuration: TOML loading and validation.

Token quantities in config files are display tokens; USD values are whole
dollars.  Both are converted to integer base units / micro-dollars here so
nothing downstream sees a float amount.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .assets import TOKEN, USD_MICRO
from .coordination import ThresholdPolicy
from .errors import ConfigInvalid
from .reputation import ReputationParams
from .rewards import as_fraction

CLIENT_BEHAVIORS = ("honest", "deviant_reviewer", "sybil_flooder")
MINER_BEHAVIORS = ("honest", "dos", "self_dealing")
DOS_MODES = ("silent", "withhold", "low_quality")


@dataclass(frozen=True)
class ServiceSpec:
    name: str
    weight: Fraction
    latency: int
    price: int


@dataclass(frozen=True)
class MinerGroup:
    name: str
    count: int = 1
    behavior: str = "honest"
    collateral: int = 1000 * TOKEN
    services: tuple[str, ...] = ("text",)
    dos_mode: str = "silent"
    # self-dealing only
    sybils: int = 0
    sybil_stake: int = 100 * TOKEN
    sybil_stake_usd: int = 100 * USD_MICRO
    sybil_burst: int = 1

    def ids(self) -> list[str]:
        return _ids(self.name, self.count)

    def sybil_ids(self) -> list[str]:
        return [f"{self.name}-sybil{i:02d}" for i in range(self.sybils)]

    @property
    def adversarial(self) -> bool:
        return self.behavior != "honest"


@dataclass(frozen=True)
class ClientGroup:
    name: str
    count: int = 1
    behavior: str = "honest"
    asset: str = "native"
    stake: int = 100 * TOKEN
    stake_usd: int = 100 * USD_MICRO
    balance: int = 0
    demand: float = 0.05
    burst: int = 1
    services: tuple[str, ...] = ("text",)
    mode: str = "uncharged"
    p_rate: float = 1.0

    def ids(self) -> list[str]:
        return _ids(self.name, self.count)

    @property
    def adversarial(self) -> bool:
        return self.behavior != "honest"


def _ids(name: str, count: int) -> list[str]:
    if count == 1:
        return [name]
    width = max(2, len(str(count - 1)))
    return [f"{name}{i:0{width}d}" for i in range(count)]


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    seed: int = 42
    ticks: int = 2000
    ticks_per_epoch: int = 100
    epochs_per_year: int = 100
    inflation_rate: Fraction = Fraction(5, 100)
    inflation_override: bool = False
    q: Fraction = Fraction(1, 10)
    min_collateral: int = 100 * TOKEN
    genesis_supply: int = 1_000_000 * TOKEN
    expiry: int = 100
    link_delay: int = 1
    late_after: int = 50
    check_every_tick: bool = True
    coordinator_m: int = 18
    coordinator_c: int = 30
    coordinator_d: int = 1000 * TOKEN
    equivocators: int = 0
    services: tuple[ServiceSpec, ...] = (
        ServiceSpec("text", Fraction(1), 2, 5 * TOKEN),
        ServiceSpec("image", Fraction(4), 5, 20 * TOKEN),
    )
    threshold: ThresholdPolicy = ThresholdPolicy()
    reputation: ReputationParams = ReputationParams()
    fee_rate: Fraction = Fraction(2, 100)
    listing_weights: Mapping[str, float] = field(
        default_factory=lambda: {"rating": 0.5, "subscribers": 0.2, "staked": 0.3}
    )
    miners: tuple[MinerGroup, ...] = ()
    clients: tuple[ClientGroup, ...] = ()

    def service(self, name: str) -> ServiceSpec:
        for s in self.services:
            if s.name == name:
                return s
        raise KeyError(name)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)

    def baseline(self) -> "ScenarioConfig":
        """Same shape with the adversary roster removed.

        Adversarial miners become honest (and lose their sybils); adversarial
        client groups are dropped.
        """
        miners = tuple(
            replace(g, behavior="honest", sybils=0, dos_mode="silent") if g.adversarial else g for g in self.miners
        )
        clients = tuple(g for g in self.clients if not g.adversarial)
        return replace(self, miners=miners, clients=clients, equivocators=0)

    def adversarial_miners(self) -> list[str]:
        return [m for g in self.miners if g.adversarial for m in g.ids()]


# -- parsing --------------------------------------------------------------

_TOP_KEYS = {
    "name", "seed", "ticks", "ticks_per_epoch", "epochs_per_year", "inflation_rate",
    "inflation_override", "q", "min_collateral", "genesis_supply", "expiry", "link_delay",
    "late_after", "check_every_tick", "coordinator", "services", "threshold", "reputation",
    "fee", "listing", "miners", "clients",
}


def _need(cond: bool, loc: str, msg: str) -> None:
    if not cond:
        raise ConfigInvalid(msg, loc)


def _int(d: Mapping, key: str, loc: str, default: int, minimum: Optional[int] = None) -> int:
    v = d.get(key, default)
    _need(isinstance(v, int) and not isinstance(v, bool), f"{loc}{key}", f"expected integer, got {v!r}")
    if minimum is not None:
        _need(v >= minimum, f"{loc}{key}", f"must be >= {minimum}, got {v}")
    return v


def _num(d: Mapping, key: str, loc: str, default) -> Fraction:
    v = d.get(key, default)
    _need(isinstance(v, (int, float, str, Fraction)) and not isinstance(v, bool), f"{loc}{key}", f"expected number, got {v!r}")
    try:
        return as_fraction(v)
    except (ValueError, ZeroDivisionError):
        raise ConfigInvalid(f"not a number: {v!r}", f"{loc}{key}") from None


def _tokens(d: Mapping, key: str, loc: str, default: Fraction | int) -> int:
    f = _num(d, key, loc, default)
    _need(f >= 0, f"{loc}{key}", "must be non-negative")
    units = f * TOKEN
    _need(units.denominator == 1, f"{loc}{key}", "finer than one base unit")
    return int(units)


def _usd(d: Mapping, key: str, loc: str, default) -> int:
    f = _num(d, key, loc, default)
    _need(f >= 0, f"{loc}{key}", "must be non-negative")
    return int(f * USD_MICRO)


def _strs(d: Mapping, key: str, loc: str, default: tuple[str, ...]) -> tuple[str, ...]:
    v = d.get(key, list(default))
    _need(isinstance(v, list) and v and all(isinstance(s, str) for s in v), f"{loc}{key}", "expected non-empty list of strings")
    return tuple(v)


def _check_keys(d: Mapping, allowed: set[str], loc: str) -> None:
    extra = sorted(set(d) - allowed)
    _need(not extra, f"{loc}{extra[0]}" if extra else loc, "unknown key")


def parse_config(raw: Mapping[str, Any]) -> ScenarioConfig:
    """Validate a parsed TOML mapping; raises ConfigInvalid naming the first bad key."""
    _check_keys(raw, _TOP_KEYS, "")
    dflt = ScenarioConfig()
    kw: dict[str, Any] = {}
    kw["name"] = str(raw.get("name", dflt.name))
    kw["seed"] = _int(raw, "seed", "", dflt.seed)
    _need(0 <= kw["seed"] < 2**64, "seed", "must be a 64-bit unsigned integer")
    kw["ticks"] = _int(raw, "ticks", "", dflt.ticks, 1)
    kw["ticks_per_epoch"] = _int(raw, "ticks_per_epoch", "", dflt.ticks_per_epoch, 1)
    kw["epochs_per_year"] = _int(raw, "epochs_per_year", "", dflt.epochs_per_year, 1)
    kw["inflation_override"] = bool(raw.get("inflation_override", False))
    rate = _num(raw, "inflation_rate", "", dflt.inflation_rate)
    if kw["inflation_override"]:
        _need(0 <= rate <= 1, "inflation_rate", "must lie in [0, 1]")
    else:
        _need(Fraction(5, 100) <= rate <= Fraction(10, 100), "inflation_rate",
              "must lie in [0.05, 0.10] unless inflation_override = true")
    kw["inflation_rate"] = rate
    q = _num(raw, "q", "", dflt.q)
    _need(0 < q <= 1, "q", "must lie in (0, 1]")
    kw["q"] = q
    kw["min_collateral"] = _tokens(raw, "min_collateral", "", Fraction(dflt.min_collateral, TOKEN))
    kw["genesis_supply"] = _tokens(raw, "genesis_supply", "", Fraction(dflt.genesis_supply, TOKEN))
    kw["expiry"] = _int(raw, "expiry", "", dflt.expiry, 1)
    kw["link_delay"] = _int(raw, "link_delay", "", dflt.link_delay, 1)
    kw["late_after"] = _int(raw, "late_after", "", dflt.late_after, 0)
    kw["check_every_tick"] = bool(raw.get("check_every_tick", True))

    co = raw.get("coordinator", {})
    _need(isinstance(co, dict), "coordinator", "expected a table")
    _check_keys(co, {"m", "c", "d", "equivocators"}, "coordinator.")
    c = _int(co, "c", "coordinator.", dflt.coordinator_c, 1)
    m = _int(co, "m", "coordinator.", dflt.coordinator_m, 1)
    _need(m <= c, "coordinator.m", f"CoordinatorSet invariant 1 <= m <= c violated (m={m}, c={c})")
    kw["coordinator_c"], kw["coordinator_m"] = c, m
    kw["coordinator_d"] = _tokens(co, "d", "coordinator.", Fraction(dflt.coordinator_d, TOKEN))
    _need(kw["coordinator_d"] > 0, "coordinator.d", "must be positive")
    eq = _int(co, "equivocators", "coordinator.", 0, 0)
    _need(eq <= c - m, "coordinator.equivocators", f"at most c - m = {c - m} faulty coordinators are tolerated")
    kw["equivocators"] = eq

    services_raw = raw.get("services")
    if services_raw is None:
        services = dflt.services
    else:
        _need(isinstance(services_raw, dict) and services_raw, "services", "expected a non-empty table")
        services = []
        for sname in sorted(services_raw):
            s = services_raw[sname]
            loc = f"services.{sname}."
            _need(isinstance(s, dict), loc[:-1], "expected a table")
            _check_keys(s, {"weight", "latency", "price"}, loc)
            w = _num(s, "weight", loc, 1)
            _need(w > 0, f"{loc}weight", "must be positive")
            services.append(ServiceSpec(sname, w, _int(s, "latency", loc, 1, 1), _tokens(s, "price", loc, 1)))
        services = tuple(services)
    kw["services"] = services
    names = {s.name for s in services}

    th = raw.get("threshold", {})
    _check_keys(th, {"max_requests", "window", "freeze"}, "threshold.")
    kw["threshold"] = ThresholdPolicy(
        _int(th, "max_requests", "threshold.", 10, 1),
        _int(th, "window", "threshold.", 100, 1),
        _int(th, "freeze", "threshold.", 100, 0),
    )

    rp = raw.get("reputation", {})
    _check_keys(rp, {"theta", "deviation_window", "deviation_fraction", "min_samples", "base_restriction", "min_raters"}, "reputation.")
    theta = float(_num(rp, "theta", "reputation.", 0.1))
    _need(theta > 0, "reputation.theta", "must be positive")
    frac = float(_num(rp, "deviation_fraction", "reputation.", 0.6))
    _need(0 < frac <= 1, "reputation.deviation_fraction", "must lie in (0, 1]")
    kw["reputation"] = ReputationParams(
        theta=theta,
        deviation_window=_int(rp, "deviation_window", "reputation.", 50, 1),
        deviation_fraction=frac,
        min_samples=_int(rp, "min_samples", "reputation.", 10, 1),
        base_restriction=_int(rp, "base_restriction", "reputation.", 100, 1),
        min_raters=_int(rp, "min_raters", "reputation.", 3, 1),
    )

    fee = raw.get("fee", {})
    _check_keys(fee, {"coordinator_fee_rate"}, "fee.")
    fr = _num(fee, "coordinator_fee_rate", "fee.", dflt.fee_rate)
    _need(0 <= fr < 1, "fee.coordinator_fee_rate", "must lie in [0, 1)")
    kw["fee_rate"] = fr

    listing = raw.get("listing", dict(dflt.listing_weights))
    _check_keys(listing, {"rating", "subscribers", "staked"}, "listing.")
    lw = {k: float(_num(listing, k, "listing.", 0)) for k in ("rating", "subscribers", "staked")}
    _need(all(v >= 0 for v in lw.values()) and any(v > 0 for v in lw.values()), "listing", "weights must be non-negative and not all zero")
    kw["listing_weights"] = lw

    miners = []
    for i, g in enumerate(raw.get("miners", [])):
        loc = f"miners[{i}]."
        _check_keys(g, {"name", "count", "behavior", "collateral", "services", "dos_mode", "sybils",
                        "sybil_stake", "sybil_stake_usd", "sybil_burst"}, loc)
        _need(isinstance(g.get("name"), str) and g["name"], f"{loc}name", "required")
        behavior = g.get("behavior", "honest")
        _need(behavior in MINER_BEHAVIORS, f"{loc}behavior", f"one of {MINER_BEHAVIORS}")
        svcs = _strs(g, "services", loc, ("text",))
        _need(set(svcs) <= names, f"{loc}services", f"unknown service in {list(svcs)}")
        mg = MinerGroup(
            name=g["name"],
            count=_int(g, "count", loc, 1, 1),
            behavior=behavior,
            collateral=_tokens(g, "collateral", loc, 1000),
            services=svcs,
            dos_mode=g.get("dos_mode", "silent"),
            sybils=_int(g, "sybils", loc, 0, 0),
            sybil_stake=_tokens(g, "sybil_stake", loc, 100),
            sybil_stake_usd=_usd(g, "sybil_stake_usd", loc, 100),
            sybil_burst=_int(g, "sybil_burst", loc, 1, 1),
        )
        _need(mg.dos_mode in DOS_MODES, f"{loc}dos_mode", f"one of {DOS_MODES}")
        _need(mg.collateral >= kw["min_collateral"], f"{loc}collateral", "below min_collateral")
        _need(mg.sybils == 0 or behavior == "self_dealing", f"{loc}sybils", "only self_dealing miners control sybils")
        miners.append(mg)
    kw["miners"] = tuple(miners)

    clients = []
    for i, g in enumerate(raw.get("clients", [])):
        loc = f"clients[{i}]."
        _check_keys(g, {"name", "count", "behavior", "asset", "stake", "stake_usd", "balance", "demand",
                        "burst", "services", "mode", "p_rate"}, loc)
        _need(isinstance(g.get("name"), str) and g["name"], f"{loc}name", "required")
        behavior = g.get("behavior", "honest")
        _need(behavior in CLIENT_BEHAVIORS, f"{loc}behavior", f"one of {CLIENT_BEHAVIORS}")
        mode = g.get("mode", "uncharged")
        _need(mode in ("uncharged", "charged"), f"{loc}mode", "uncharged or charged")
        svcs = _strs(g, "services", loc, ("text",))
        _need(set(svcs) <= names, f"{loc}services", f"unknown service in {list(svcs)}")
        demand = float(_num(g, "demand", loc, 0.05))
        _need(0 <= demand <= 1, f"{loc}demand", "probability in [0, 1]")
        p_rate = float(_num(g, "p_rate", loc, 1))
        _need(0 <= p_rate <= 1, f"{loc}p_rate", "probability in [0, 1]")
        asset = g.get("asset", "native")
        _need(isinstance(asset, str) and asset, f"{loc}asset", "non-empty asset symbol or 'native'")
        cg = ClientGroup(
            name=g["name"],
            count=_int(g, "count", loc, 1, 1),
            behavior=behavior,
            asset=asset,
            stake=_tokens(g, "stake", loc, 100),
            stake_usd=_usd(g, "stake_usd", loc, 100),
            balance=_tokens(g, "balance", loc, 0),
            demand=demand,
            burst=_int(g, "burst", loc, 1, 1),
            services=svcs,
            mode=mode,
            p_rate=p_rate,
        )
        if mode == "uncharged":
            _need(cg.stake > 0 and cg.stake_usd > 0, f"{loc}stake", "uncharged clients need a positive stake")
        clients.append(cg)
    kw["clients"] = tuple(clients)

    ids: list[str] = []
    for mg in kw["miners"]:
        ids += mg.ids() + mg.sybil_ids()
    for cg in kw["clients"]:
        ids += cg.ids()
    dupes = sorted({x for x in ids if ids.count(x) > 1})
    _need(not dupes, "miners/clients", f"duplicate actor ids {dupes[:3]}")

    cfg = ScenarioConfig(**kw)
    _need(genesis_needed(cfg) <= cfg.genesis_supply, "genesis_supply", "smaller than the actors' initial holdings")
    return cfg


def genesis_needed(cfg: ScenarioConfig) -> int:
    total = 0
    for g in cfg.miners:
        total += g.count * g.collateral + g.sybils * g.sybil_stake
    for g in cfg.clients:
        native = g.stake if (g.asset == "native" and g.mode == "uncharged") else 0
        total += g.count * (native + g.balance)
    return total


def loads(text: str) -> ScenarioConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid(f"TOML syntax error: {exc}", "file") from None
    return parse_config(raw)


def load(path: str | Path) -> ScenarioConfig:
    """Load a scenario file.  Raises FileNotFoundError or ConfigInvalid."""
    return loads(Path(path).read_text(encoding="utf-8"))


def bundled(name: str) -> ScenarioConfig:
    """A scenario shipped with the package, e.g. ``bundled("default")``."""
    return loads(bundled_path(name).read_text(encoding="utf-8"))


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("aimarket") / "scenarios" / f"{name}.toml"))
