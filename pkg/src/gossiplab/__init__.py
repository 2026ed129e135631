"""Gossip protocol laboratory.

Cache-level simulators for shuffle, newscast, and cyclon gossiping over
lossless and lossy channels, next to an analytical pairwise interaction
model driven by 4x4 transition matrices, plus the measurement harness
that compares the two.
"""

__version__ = "0.1.0"
