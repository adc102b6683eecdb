"""Per-user blockchain function chains expressed as CPU-cycle demands."""

from __future__ import annotations

from dataclasses import dataclass

from .domain import (
    MINER_KINDS,
    RECEIVER_KINDS,
    TX_GENERATOR_KINDS,
    BlockchainParams,
    CostTable,
    FunctionKind,
    Instance,
    UserDevice,
)


@dataclass(frozen=True)
class FunctionDemand:
    user_id: int
    kind: FunctionKind
    cycles: float
    input_bytes: float = 0.0
    output_bytes: float = 0.0


@dataclass(frozen=True)
class FunctionChain:
    user_id: int
    demands: tuple[FunctionDemand, ...]

    def __post_init__(self):
        object.__setattr__(self, "demands", tuple(self.demands))

    @property
    def kinds(self) -> tuple[FunctionKind, ...]:
        return tuple(d.kind for d in self.demands)

    @property
    def cycles(self) -> float:
        return sum(d.cycles for d in self.demands)

    @property
    def is_mining_chain(self) -> bool:
        return bool(self.demands) and self.demands[0].kind in MINER_KINDS

    @property
    def uplink_bytes(self) -> float:
        return self.demands[0].input_bytes if self.demands else 0.0


def function_cycles(kind: FunctionKind, params: BlockchainParams, costs: CostTable) -> float:
    body = params.block_body_bytes
    sha = costs.sha256_cycles_per_byte
    if kind is FunctionKind.TX_GENERATION:
        return costs.rsa_cycles + costs.ecdsa_cycles + sha * params.tx_size_bytes
    if kind is FunctionKind.AUTHENTICATION:
        return costs.block_auth_cycles_per_byte * body
    if kind is FunctionKind.BLOCK_GENERATION:
        return costs.merkle_multiplier * sha * body
    if kind is FunctionKind.MINING:
        return costs.mining_cycles
    if kind.is_broadcast:
        return 0.0
    # Verification, BlockVerification and ChainAppend: one SHA-256 pass over the body.
    return sha * body


def _io_bytes(kind: FunctionKind, params: BlockchainParams) -> tuple[float, float]:
    tx = float(params.tx_size_bytes)
    body = float(params.block_body_bytes)
    block = body + params.header_bytes
    if kind in TX_GENERATOR_KINDS:
        return tx, tx
    if kind in (FunctionKind.AUTHENTICATION, FunctionKind.VERIFICATION):
        return body, body
    if kind is FunctionKind.BLOCK_GENERATION:
        return body, block
    if kind is FunctionKind.MINING:
        # the nonce search runs over the header only
        return float(params.header_bytes), block
    return block, block


def make_chain(user_id: int, kinds, params: BlockchainParams, costs: CostTable) -> FunctionChain:
    demands = []
    for kind in sorted(FunctionKind(k) for k in kinds):
        inp, outp = _io_bytes(kind, params)
        demands.append(FunctionDemand(user_id, kind, function_cycles(kind, params, costs), inp, outp))
    if demands and demands[0].kind in RECEIVER_KINDS:
        # receivers upload nothing: the block reaches them from the broadcasting server
        head = demands[0]
        demands[0] = FunctionDemand(user_id, head.kind, head.cycles, 0.0, head.output_bytes)
    return FunctionChain(user_id, tuple(demands))


def build_chain(user: UserDevice, params: BlockchainParams, costs: CostTable) -> list[FunctionChain]:
    """Chains requested by one user, one per role, in pipeline order."""
    chains = []
    if user.is_tx_generator:
        chains.append(make_chain(user.id, TX_GENERATOR_KINDS, params, costs))
    if user.is_miner:
        chains.append(make_chain(user.id, MINER_KINDS, params, costs))
    if user.is_receiver:
        chains.append(make_chain(user.id, RECEIVER_KINDS, params, costs))
    return chains


def instance_chains(instance: Instance) -> list[FunctionChain]:
    if instance.chains is not None:
        return list(instance.chains)
    out: list[FunctionChain] = []
    for user in instance.users:
        out.extend(build_chain(user, instance.params, instance.costs))
    return out


def strip_to_mining(chains) -> list[FunctionChain]:
    """Keep only the Mining demand of each mining chain; drop every other chain."""
    out = []
    for chain in chains:
        mining = tuple(d for d in chain.demands if d.kind is FunctionKind.MINING)
        if mining:
            out.append(FunctionChain(chain.user_id, mining))
    return out
