from __future__ import annotations
from dataclasses import dataclass
from typing import Sequence

from .codec import digest

LEFT, RIGHT = "L", "R"


@dataclass(frozen=True)
class MerkleProof:
    leaf_digest: bytes
    path: tuple[tuple[bytes, str], ...]  # (sibling, side of the sibling), leaf to root
    root: bytes


def tree_levels(leaves: Sequence[bytes], algorithm: str = "sha256") -> list[list[bytes]]:
    """Level 0 is the leaves; an odd level pairs its last node with itself."""
    level = list(leaves) or [digest(b"", algorithm)]
    levels = [level]
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level), 2):
            a = level[i]
            b = level[i + 1] if i + 1 < len(level) else a
            nxt.append(digest(a + b, algorithm))
        levels.append(nxt)
        level = nxt
    return levels


def merkle_root(leaves: Sequence[bytes], algorithm: str = "sha256") -> bytes:
    return tree_levels(leaves, algorithm)[-1][0]


def merkle_proof(leaves: Sequence[bytes], index: int, algorithm: str = "sha256") -> MerkleProof:
    levels = tree_levels(leaves, algorithm)
    path = []
    idx = index
    for level in levels[:-1]:
        is_right = idx % 2 == 1
        sib = idx - 1 if is_right else idx + 1
        sibling = level[sib] if sib < len(level) else level[idx]
        path.append((sibling, LEFT if is_right else RIGHT))
        idx //= 2
    return MerkleProof(levels[0][index], tuple(path), levels[-1][0])


def fold_path(leaf: bytes, path: Sequence[tuple[bytes, str]], algorithm: str = "sha256") -> bytes:
    h = leaf
    for sibling, side in path:
        h = digest(sibling + h, algorithm) if side == LEFT else digest(h + sibling, algorithm)
    return h
