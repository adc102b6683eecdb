"""Scenario data model: servers, devices, blockchain parameters and cost table.

All types are frozen dataclasses. ``validate_instance`` collects every
violation before failing so a scenario file can be fixed in one pass.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence


class DeviceClass(str, enum.Enum):
    IOT_SENSOR = "IoTSensor"
    MOBILE_USER = "MobileUser"


class FunctionKind(enum.IntEnum):
    """Blockchain functions in pipeline order."""

    TX_GENERATION = 0
    TX_BROADCAST = 1
    AUTHENTICATION = 2
    VERIFICATION = 3
    BLOCK_GENERATION = 4
    MINING = 5
    BLOCK_BROADCAST = 6
    BLOCK_VERIFICATION = 7
    CHAIN_APPEND = 8

    @property
    def is_broadcast(self) -> bool:
        return self in (FunctionKind.TX_BROADCAST, FunctionKind.BLOCK_BROADCAST)


TX_GENERATOR_KINDS = (FunctionKind.TX_GENERATION, FunctionKind.TX_BROADCAST)
MINER_KINDS = (
    FunctionKind.AUTHENTICATION,
    FunctionKind.VERIFICATION,
    FunctionKind.BLOCK_GENERATION,
    FunctionKind.MINING,
    FunctionKind.BLOCK_BROADCAST,
)
RECEIVER_KINDS = (FunctionKind.BLOCK_VERIFICATION, FunctionKind.CHAIN_APPEND)

# Table I server and device figures.
SERVER_CAPACITY_HZ = 5e9
SERVER_POWER_W = 125.0
DEFAULT_SERVER_COUNT = 50
IOT_CAPACITY_HZ = 0.01e9
MOBILE_CAPACITY_HZ = 0.1e9
TX_POWER_W = 0.2

# Not in Table I; modeling assumptions.
DEFAULT_LOCAL_POWER_W = {DeviceClass.MOBILE_USER: 1.0, DeviceClass.IOT_SENSOR: 0.1}
DEFAULT_UPLINK_RATE_BPS = 1e7


@dataclass(frozen=True)
class Server:
    id: int
    capacity_hz: float = SERVER_CAPACITY_HZ
    power_w: float = SERVER_POWER_W


@dataclass(frozen=True)
class Link:
    src: int
    dst: int
    delay_s: float = 0.0


@dataclass(frozen=True)
class ServerGraph:
    servers: tuple[Server, ...]
    links: tuple[Link, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "servers", tuple(self.servers))
        object.__setattr__(self, "links", tuple(self.links))

    @property
    def server_ids(self) -> list[int]:
        return [s.id for s in self.servers]

    def server(self, server_id: int) -> Server:
        for s in self.servers:
            if s.id == server_id:
                return s
        raise KeyError(server_id)

    @classmethod
    def uniform(cls, count: int = DEFAULT_SERVER_COUNT, capacity_hz: float = SERVER_CAPACITY_HZ,
                power_w: float = SERVER_POWER_W) -> "ServerGraph":
        return cls(tuple(Server(i, capacity_hz, power_w) for i in range(count)))


@dataclass(frozen=True)
class UserDevice:
    id: int
    device_class: DeviceClass = DeviceClass.MOBILE_USER
    local_capacity_hz: Optional[float] = None
    local_power_w: Optional[float] = None
    tx_power_w: float = TX_POWER_W
    uplink_rate_bps: float = DEFAULT_UPLINK_RATE_BPS
    is_miner: bool = True
    is_tx_generator: bool = False
    is_receiver: bool = False

    def __post_init__(self):
        cls = DeviceClass(self.device_class)
        object.__setattr__(self, "device_class", cls)
        if self.local_capacity_hz is None:
            cap = IOT_CAPACITY_HZ if cls is DeviceClass.IOT_SENSOR else MOBILE_CAPACITY_HZ
            object.__setattr__(self, "local_capacity_hz", cap)
        if self.local_power_w is None:
            object.__setattr__(self, "local_power_w", DEFAULT_LOCAL_POWER_W[cls])


@dataclass(frozen=True)
class BlockchainParams:
    t_th_s: float = 1.0
    z_s_per_tx: float = 2e-5
    n_trans: int = 5000
    tx_size_bytes: int = 200
    r_const: float = 12.5
    r_trans: float = 1e-3
    header_bytes: int = 80

    @property
    def block_body_bytes(self) -> int:
        return self.n_trans * self.tx_size_bytes


@dataclass(frozen=True)
class CostTable:
    """Per-algorithm CPU cycle costs. Defaults are the Table I figures."""

    sha256_cycles_per_byte: float = 15.8
    rsa_cycles: float = 36e6
    ecdsa_cycles: float = 5.27e6
    block_auth_cycles_per_byte: float = 15.61
    merkle_multiplier: float = 15.0
    mining_cycles: float = 0.25e9
    gossip_energy_j: float = 12.5


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class ValidationError(ValueError):
    """Raised with the complete list of violations found in a scenario."""

    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(frozen=True)
class Instance:
    """A validated scenario.

    ``chains`` overrides the function chains normally derived from the
    users' role flags; it is how hand-built or stripped workloads are fed to
    the solvers.
    """

    graph: ServerGraph
    users: tuple[UserDevice, ...]
    params: BlockchainParams = field(default_factory=BlockchainParams)
    costs: CostTable = field(default_factory=CostTable)
    chains: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        if self.chains is not None:
            object.__setattr__(self, "chains", tuple(self.chains))

    @property
    def miners(self) -> list[UserDevice]:
        return [u for u in self.users if u.is_miner]

    def user(self, user_id: int) -> UserDevice:
        for u in self.users:
            if u.id == user_id:
                return u
        raise KeyError(user_id)


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _check(out: list, where: str, name: str, value: Any, *, strict: bool = True) -> None:
    if not _is_number(value):
        out.append(Violation("NonNumeric", f"{where}.{name} is not a finite number: {value!r}"))
    elif strict and value <= 0:
        out.append(Violation("NonPositiveQuantity", f"{where}.{name} must be > 0, got {value!r}"))
    elif not strict and value < 0:
        out.append(Violation("NegativeQuantity", f"{where}.{name} must be >= 0, got {value!r}"))


def find_violations(graph: Any, users: Any, params: Any, costs: Any) -> list[Violation]:
    """Return every invariant violation in the inputs. Never raises."""
    out: list[Violation] = []
    try:
        servers = list(getattr(graph, "servers", None) or [])
        links = list(getattr(graph, "links", None) or [])
    except TypeError:
        servers, links = [], []
    if not servers:
        out.append(Violation("NonPositiveQuantity", "server graph is empty (need at least one server)"))

    seen: set = set()
    for k, s in enumerate(servers):
        sid = getattr(s, "id", None)
        if sid in seen:
            out.append(Violation("DuplicateId", f"server id {sid!r} appears more than once"))
        seen.add(sid)
        _check(out, f"servers[{k}]", "capacity_hz", getattr(s, "capacity_hz", None))
        _check(out, f"servers[{k}]", "power_w", getattr(s, "power_w", None))

    for k, ln in enumerate(links):
        src, dst = getattr(ln, "src", None), getattr(ln, "dst", None)
        for end in (src, dst):
            if end not in seen:
                out.append(Violation("DanglingLinkEndpoint", f"links[{k}] references unknown server {end!r}"))
        if src == dst:
            out.append(Violation("SelfLoop", f"links[{k}] has src == dst == {src!r}"))
        _check(out, f"links[{k}]", "delay_s", getattr(ln, "delay_s", None), strict=False)

    try:
        users = list(users or [])
    except TypeError:
        users = []
    seen_users: set = set()
    for k, u in enumerate(users):
        uid = getattr(u, "id", None)
        if uid in seen_users:
            out.append(Violation("DuplicateId", f"user id {uid!r} appears more than once"))
        seen_users.add(uid)
        for name in ("local_capacity_hz", "local_power_w", "tx_power_w", "uplink_rate_bps"):
            _check(out, f"users[{k}]", name, getattr(u, name, None))
        if not (getattr(u, "is_miner", False) or getattr(u, "is_tx_generator", False)):
            out.append(Violation("NoRole", f"users[{k}] is neither a miner nor a transaction generator"))
    if not any(getattr(u, "is_miner", False) for u in users):
        out.append(Violation("NoMiners", "no user has is_miner set"))

    _check(out, "params", "t_th_s", getattr(params, "t_th_s", None))
    _check(out, "params", "z_s_per_tx", getattr(params, "z_s_per_tx", None), strict=False)
    for name in ("n_trans", "tx_size_bytes", "header_bytes"):
        value = getattr(params, name, None)
        if not _is_number(value) or value < 1 or int(value) != value:
            out.append(Violation("NonPositiveQuantity", f"params.{name} must be an integer >= 1, got {value!r}"))
    for name in ("r_const", "r_trans"):
        _check(out, "params", name, getattr(params, name, None), strict=False)

    for name in CostTable.__dataclass_fields__:
        _check(out, "costs", name, getattr(costs, name, None), strict=False)
    return out


def validate_instance(graph: ServerGraph, users: Sequence[UserDevice],
                      params: Optional[BlockchainParams] = None,
                      costs: Optional[CostTable] = None, chains=None) -> Instance:
    """Bundle the inputs into an :class:`Instance`.

    Raises
    ------
    ValidationError
        Carrying every violation, not just the first.
    """
    params = BlockchainParams() if params is None else params
    costs = CostTable() if costs is None else costs
    violations = find_violations(graph, users, params, costs)
    if violations:
        raise ValidationError(violations)
    return Instance(graph, tuple(users), params, costs, chains)


def make_population(count: int, iot_fraction: float = 1 / 3, *, is_tx_generator: bool = True,
                    is_receiver: bool = True, **overrides) -> list[UserDevice]:
    """``count`` miners, the first ``round(count * iot_fraction)`` being IoT sensors."""
    n_iot = int(round(count * iot_fraction))
    return [
        UserDevice(
            id=i,
            device_class=DeviceClass.IOT_SENSOR if i < n_iot else DeviceClass.MOBILE_USER,
            is_miner=True,
            is_tx_generator=is_tx_generator,
            is_receiver=is_receiver,
            **overrides,
        )
        for i in range(count)
    ]


def default_instance(n_miners: int = 50, n_servers: int = DEFAULT_SERVER_COUNT, **param_overrides) -> Instance:
    """The Table I setup: 50 servers at 5 GHz / 125 W, 50 miners, one-third IoT."""
    return validate_instance(
        ServerGraph.uniform(n_servers),
        make_population(n_miners),
        BlockchainParams(**param_overrides),
        CostTable(),
    )
