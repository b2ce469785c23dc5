"""Signed transactions, blocks and the sharded chain set (model, reputation, side chains)."""
from __future__ import annotations
import enum
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..errors import (
    ChainCorruptionError,
    InvalidTransactionError,
    LedgerError,
    NotFoundError,
    UnknownAccountError,
)
from .codec import DIGEST_SIZE, Reader, digest, encode
from .merkle import MerkleProof, fold_path, merkle_proof, merkle_root
from .signing import KeyRegistry

log = logging.getLogger(__name__)

GENESIS_PREV = bytes(DIGEST_SIZE)
MODEL, REPUTATION = "model", "reputation"


class TxKind(enum.IntEnum):
    LOCAL_MODEL = 1
    MINER_VOTE = 2
    CLUSTER_MODEL = 3
    HEAD_BALLOT = 4
    REPUTATION_UPDATE = 5
    GLOBAL_MODEL = 6


@dataclass(frozen=True)
class Transaction:
    kind: TxKind
    sender: int
    round: int
    payload: bytes
    payload_digest: bytes
    signature: bytes

    def signing_message(self) -> bytes:
        return encode(int(self.kind), self.sender, self.round, self.payload_digest)

    def encoded(self) -> bytes:
        return encode(int(self.kind), self.sender, self.round, self.payload, self.payload_digest, self.signature)

    def digest(self, algorithm: str = "sha256") -> bytes:
        return digest(self.encoded(), algorithm)

    @classmethod
    def decode(cls, data: bytes) -> "Transaction":
        r = Reader(data)
        try:
            kind = TxKind(r.int())
        except ValueError as e:
            raise ChainCorruptionError(f"bad transaction kind: {e}") from None
        tx = cls(kind, r.int(), r.int(), r.field(), r.field(), r.field())
        if not r.done():
            raise ChainCorruptionError("trailing bytes after transaction")
        return tx


def make_tx(registry: KeyRegistry, kind: TxKind, sender: int, round_: int, payload: bytes) -> Transaction:
    pd = digest(payload, registry.algorithm)
    unsigned = Transaction(kind, int(sender), int(round_), payload, pd, b"")
    return Transaction(kind, int(sender), int(round_), payload, pd,
                       registry.sign(sender, unsigned.signing_message()))


def verify_tx(registry: KeyRegistry, tx: Transaction) -> bool:
    """Payload digest and signature check. Unregistered senders raise UnknownAccountError."""
    if digest(tx.payload, registry.algorithm) != tx.payload_digest:
        return False
    return registry.verify(tx.sender, tx.signing_message(), tx.signature)


@dataclass(frozen=True)
class BlockHeader:
    height: int
    prev_digest: bytes
    merkle_root: bytes
    round: int
    producer: int

    def encoded(self) -> bytes:
        return encode(self.height, self.prev_digest, self.merkle_root, self.round, self.producer)

    def digest(self, algorithm: str = "sha256") -> bytes:
        return digest(self.encoded(), algorithm)

    @classmethod
    def decode(cls, data: bytes) -> "BlockHeader":
        r = Reader(data)
        return cls(r.int(), r.field(), r.field(), r.int(), r.int())


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    transactions: tuple[Transaction, ...]

    def tx_digests(self, algorithm: str = "sha256") -> list[bytes]:
        return [tx.digest(algorithm) for tx in self.transactions]

    def encoded(self) -> bytes:
        return encode(self.header.encoded(), len(self.transactions), *[tx.encoded() for tx in self.transactions])

    @classmethod
    def decode(cls, data: bytes) -> "Block":
        r = Reader(data)
        header = BlockHeader.decode(r.field())
        count = r.int()
        txs = tuple(Transaction.decode(r.field()) for _ in range(count))
        return cls(header, txs)


def build_block(
    registry: KeyRegistry,
    txs: Iterable[Transaction],
    prev: BlockHeader | None,
    producer: int,
    round_: int,
) -> Block:
    """Sorted by (sender, kind), Merkle root over transaction digests, linked to `prev`."""
    ordered = sorted(txs, key=lambda t: (t.sender, int(t.kind), t.payload_digest))
    for tx in ordered:
        try:
            ok = verify_tx(registry, tx)
        except UnknownAccountError as e:
            raise InvalidTransactionError(f"transaction from unregistered sender: {e}") from None
        if not ok:
            raise InvalidTransactionError(f"{tx.kind.name} from {tx.sender} does not verify")
    alg = registry.algorithm
    header = BlockHeader(
        height=0 if prev is None else prev.height + 1,
        prev_digest=GENESIS_PREV if prev is None else prev.digest(alg),
        merkle_root=merkle_root([tx.digest(alg) for tx in ordered], alg),
        round=int(round_),
        producer=int(producer),
    )
    return Block(header, tuple(ordered))


class Chain:
    def __init__(self, name: str, algorithm: str = "sha256"):
        self.name = name
        self.algorithm = algorithm
        self.blocks: list[Block] = []
        self._digests: list[list[bytes]] = []
        self._where: dict[bytes, tuple[int, int]] = {}

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def tip(self) -> BlockHeader | None:
        return self.blocks[-1].header if self.blocks else None

    def headers(self) -> list[BlockHeader]:
        return [b.header for b in self.blocks]

    def check_append(self, block: Block) -> None:
        tip = self.tip
        want_prev = GENESIS_PREV if tip is None else tip.digest(self.algorithm)
        if block.header.prev_digest != want_prev:
            raise ChainCorruptionError(f"{self.name}: block {block.header.height} does not link to the tip")
        if tip is not None and block.header.round <= tip.round:
            raise ChainCorruptionError(f"{self.name}: round {block.header.round} already recorded")
        if block.header.height != (0 if tip is None else tip.height + 1):
            raise ChainCorruptionError(f"{self.name}: height {block.header.height} out of sequence")

    def append(self, block: Block) -> None:
        self.check_append(block)
        self.push(block)

    def push(self, block: Block) -> None:
        """Append without link checks (loading a dump that is verified separately)."""
        digests = block.tx_digests(self.algorithm)
        height = len(self.blocks)
        self.blocks.append(block)
        self._digests.append(digests)
        for i, d in enumerate(digests):
            self._where.setdefault(d, (height, i))

    def tx_digests(self, height: int) -> list[bytes]:
        return self._digests[height]

    def locate(self, tx: Transaction) -> tuple[int, int]:
        try:
            return self._where[tx.digest(self.algorithm)]
        except KeyError:
            raise NotFoundError(f"transaction not in chain {self.name}") from None


@dataclass
class RoundArtifacts:
    """Everything one round writes to the ledger, grouped by destination chain."""

    round: int
    model_txs: list[Transaction] = field(default_factory=list)
    reputation_txs: list[Transaction] = field(default_factory=list)
    side_txs: dict[int, list[Transaction]] = field(default_factory=dict)
    model_producer: int = 0
    reputation_producer: int = 0
    side_producers: dict[int, int] = field(default_factory=dict)


class ChainSet:
    def __init__(self, registry: KeyRegistry):
        self.registry = registry
        self.algorithm = registry.algorithm
        self.model_chain = Chain(MODEL, self.algorithm)
        self.reputation_chain = Chain(REPUTATION, self.algorithm)
        self.side_chains: dict[int, Chain] = {}

    def side_chain(self, cluster_id: int) -> Chain:
        if cluster_id not in self.side_chains:
            self.side_chains[cluster_id] = Chain(f"side-{cluster_id}", self.algorithm)
        return self.side_chains[cluster_id]

    def chains(self) -> dict[str, Chain]:
        out = {MODEL: self.model_chain, REPUTATION: self.reputation_chain}
        for cid in sorted(self.side_chains):
            out[self.side_chains[cid].name] = self.side_chains[cid]
        return out

    def append_round(self, art: RoundArtifacts) -> None:
        """One block per chain for the round; nothing is appended unless every block fits."""
        plan: list[tuple[Chain, Block]] = []
        if art.model_txs:
            plan.append((self.model_chain, self._block(self.model_chain, art.model_txs, art.model_producer, art.round)))
        if art.reputation_txs:
            plan.append((self.reputation_chain, self._block(self.reputation_chain, art.reputation_txs, art.reputation_producer, art.round)))
        for cid in sorted(art.side_txs):
            if not art.side_txs[cid]:
                continue
            chain = self.side_chain(cid)
            plan.append((chain, self._block(chain, art.side_txs[cid], art.side_producers[cid], art.round)))
        for chain, block in plan:
            chain.check_append(block)
        for chain, block in plan:
            chain.append(block)
        log.debug("round %d: appended %d blocks", art.round, len(plan))

    def _block(self, chain: Chain, txs: Sequence[Transaction], producer: int, round_: int) -> Block:
        return build_block(self.registry, txs, chain.tip, producer, round_)


# ---------- light clients ----------

def prove_inclusion(chain: Chain, tx: Transaction) -> tuple[int, MerkleProof]:
    """(block height, Merkle proof) for `tx`; NotFoundError when it is absent."""
    height, index = chain.locate(tx)
    return height, merkle_proof(chain.tx_digests(height), index, chain.algorithm)


def verify_proof(header: BlockHeader, proof: MerkleProof, algorithm: str = "sha256") -> bool:
    if proof.root != header.merkle_root:
        return False
    return fold_path(proof.leaf_digest, proof.path, algorithm) == header.merkle_root


class LightClient:
    """Header-only view of a set of chains, as kept by learner satellites."""

    def __init__(self, algorithm: str = "sha256"):
        self.algorithm = algorithm
        self.headers: dict[str, list[BlockHeader]] = {}

    def sync(self, chains: Mapping[str, Chain]) -> None:
        for name, chain in chains.items():
            have = self.headers.setdefault(name, [])
            for header in chain.headers()[len(have):]:
                want = GENESIS_PREV if not have else have[-1].digest(self.algorithm)
                if header.prev_digest != want:
                    raise ChainCorruptionError(f"{name}: header {header.height} does not link")
                have.append(header)

    def verify(self, chain_name: str, height: int, proof: MerkleProof) -> bool:
        headers = self.headers.get(chain_name, [])
        if not 0 <= height < len(headers):
            return False
        return verify_proof(headers[height], proof, self.algorithm)


# ---------- dump / verify ----------

def verify_chain(chain: Chain, registry: KeyRegistry) -> list[str]:
    """Every problem found in one chain; empty when signatures, roots and links all hold."""
    problems = []
    alg = chain.algorithm
    prev = GENESIS_PREV
    for h, block in enumerate(chain.blocks):
        hdr = block.header
        if hdr.height != h:
            problems.append(f"{chain.name}[{h}]: height {hdr.height}")
        if hdr.prev_digest != prev:
            problems.append(f"{chain.name}[{h}]: broken link")
        if merkle_root(block.tx_digests(alg), alg) != hdr.merkle_root:
            problems.append(f"{chain.name}[{h}]: merkle root mismatch")
        for tx in block.transactions:
            try:
                ok = verify_tx(registry, tx)
            except UnknownAccountError:
                problems.append(f"{chain.name}[{h}]: unknown sender {tx.sender}")
                continue
            if not ok:
                problems.append(f"{chain.name}[{h}]: {tx.kind.name} from {tx.sender} fails verification")
        prev = hdr.digest(alg)
    return problems


def dump_chains(chains: ChainSet, out_dir: str | Path) -> Path:
    """blocks/<chain>.bin (length-prefixed blocks), index.json and accounts.json."""
    out = Path(out_dir)
    (out / "blocks").mkdir(parents=True, exist_ok=True)
    index = {"algorithm": chains.algorithm, "chains": {}}
    for name, chain in chains.chains().items():
        (out / "blocks" / f"{name}.bin").write_bytes(encode(*[b.encoded() for b in chain.blocks]))
        index["chains"][name] = [
            {
                "height": b.header.height, "round": b.header.round, "producer": b.header.producer,
                "digest": b.header.digest(chains.algorithm).hex(),
                "merkle_root": b.header.merkle_root.hex(), "tx_count": len(b.transactions),
            }
            for b in chain.blocks
        ]
    (out / "index.json").write_text(json.dumps(index, indent=2))
    accounts = {str(a): chains.registry.key_of(a).hex() for a in chains.registry.accounts}
    (out / "accounts.json").write_text(json.dumps(accounts, indent=2))
    return out


def load_chains(dump_dir: str | Path) -> tuple[ChainSet, dict]:
    """Chains exactly as stored (no validation) plus the parsed index."""
    d = Path(dump_dir)
    try:
        index = json.loads((d / "index.json").read_text())
        accounts = json.loads((d / "accounts.json").read_text())
    except (OSError, ValueError) as e:
        raise ChainCorruptionError(f"unreadable chain dump {d}: {e}") from None
    registry = KeyRegistry(index["algorithm"])
    for acc, key in accounts.items():
        registry.register(int(acc), bytes.fromhex(key))
    cs = ChainSet(registry)
    for name in index["chains"]:
        if name == MODEL:
            chain = cs.model_chain
        elif name == REPUTATION:
            chain = cs.reputation_chain
        else:
            chain = cs.side_chain(int(name.split("-", 1)[1]))
        r = Reader((d / "blocks" / f"{name}.bin").read_bytes())
        while not r.done():
            chain.push(Block.decode(r.field()))
    return cs, index


def verify_dump(dump_dir: str | Path) -> list[str]:
    """Re-validate a whole dump: decoding, signatures, payload digests, Merkle roots, links, index."""
    try:
        cs, index = load_chains(dump_dir)
    except (LedgerError, OSError, ValueError, KeyError, struct.error) as e:
        return [str(e)]
    problems = []
    for name, chain in cs.chains().items():
        problems += verify_chain(chain, cs.registry)
        stored = index["chains"].get(name, [])
        if len(stored) != len(chain):
            problems.append(f"{name}: index lists {len(stored)} blocks, dump holds {len(chain)}")
            continue
        for entry, block in zip(stored, chain.blocks):
            if entry["digest"] != block.header.digest(cs.algorithm).hex():
                problems.append(f"{name}[{entry['height']}]: header digest differs from index")
    return problems
