"""Deterministic seed derivation.

Every stage derives its RNG seed from the single top-level seed plus a
stage name, so stages can rerun independently and still reproduce.
"""

from __future__ import annotations

import hashlib


def derive_seed(seed: int, stage: str) -> int:
    """Stable 64-bit seed for a named stage under a master seed."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
