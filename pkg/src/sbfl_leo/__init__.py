"""Sharded-blockchain federated learning over a LEO constellation, simulated round by round."""

__version__ = "0.1.0"
