"""Regulated multi-platform crowdworking, at desk scale.

A regulation compiler and anonymous-token engine layered over per-platform
DAG ledger views, driven by local, cross-platform, and global quorum
consensus inside a seeded discrete-event network simulator.
"""

__version__ = "0.1.0"
