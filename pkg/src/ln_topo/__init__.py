"""Toolkit for reconstructing payment-channel-network topology from gossip
records, computing a network-science metric catalog over snapshot series,
quantifying topological stability, and simulating payment routing."""

__version__ = "0.1.0"
