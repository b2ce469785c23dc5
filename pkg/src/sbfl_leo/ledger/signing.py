"""Keyed-digest signatures over accounts registered with the data center."""
from __future__ import annotations
import hashlib
import hmac
from typing import Iterable

from ..errors import UnknownAccountError
from ..utils.seeding import KEYS, rng_for


class KeyRegistry:
    """Account id → secret key. Signing and verifying need the sender's key."""

    def __init__(self, algorithm: str = "sha256"):
        self.algorithm = algorithm
        self._keys: dict[int, bytes] = {}

    @classmethod
    def for_accounts(cls, accounts: Iterable[int], seed: int, algorithm: str = "sha256") -> "KeyRegistry":
        reg = cls(algorithm)
        for acc in accounts:
            reg.register(acc, rng_for(seed, KEYS, acc).bytes(32))
        return reg

    def register(self, account: int, key: bytes) -> None:
        self._keys[int(account)] = bytes(key)

    def __contains__(self, account: int) -> bool:
        return int(account) in self._keys

    @property
    def accounts(self) -> list[int]:
        return sorted(self._keys)

    def key_of(self, account: int) -> bytes:
        try:
            return self._keys[int(account)]
        except KeyError:
            raise UnknownAccountError(f"account {account} is not registered") from None

    def _mac(self, key: bytes, message: bytes) -> bytes:
        if self.algorithm == "blake2b":
            return hashlib.blake2b(message, key=key[:64], digest_size=32).digest()
        return hmac.new(key, message, self.algorithm).digest()

    def sign(self, account: int, message: bytes) -> bytes:
        return self._mac(self.key_of(account), message)

    def verify(self, account: int, message: bytes, signature: bytes) -> bool:
        return hmac.compare_digest(self._mac(self.key_of(account), message), signature)
