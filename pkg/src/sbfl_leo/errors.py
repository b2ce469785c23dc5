from __future__ import annotations


class SbflError(Exception):
    """Root of every error the simulator raises on purpose."""


class ConfigurationError(SbflError, ValueError):
    pass


class DomainError(SbflError, ValueError):
    pass


class DegenerateInputError(DomainError):
    """Cosine similarity asked of a zero-norm vector."""


class TrainingError(SbflError, RuntimeError):
    def __init__(self, message: str, batch_index: int):
        super().__init__(f"{message} (batch {batch_index})")
        self.batch_index = batch_index


class PartitionError(SbflError, ValueError):
    pass


class RoundFailure(SbflError, RuntimeError):
    """No cluster model survived inter-cluster consensus."""


class DatasetError(SbflError, OSError):
    pass


class LedgerError(SbflError, RuntimeError):
    pass


class UnknownAccountError(LedgerError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown account"


class InvalidTransactionError(LedgerError):
    pass


class ChainCorruptionError(LedgerError):
    pass


class NotFoundError(LedgerError, LookupError):
    pass
