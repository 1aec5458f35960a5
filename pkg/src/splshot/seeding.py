"""Deterministic seed derivation.

Every run consumes exactly one 64-bit root seed. Each phase that needs
randomness gets a child seed via ``derive_seed(root, phase, index)``,
which hashes (root, phase-name, index) with SHA-256 and keeps the first
8 bytes. Children are independent of call order and stable across
platforms and processes.
"""

import hashlib

__all__ = ["derive_seed"]


def derive_seed(root: int, phase: str, index: int = 0) -> int:
    """Return the 64-bit child seed for (root, phase, index)."""
    payload = f"{root}:{phase}:{index}".encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "little")
