"""Deterministic seed derivation.

Every randomized component draws its generator seed from
``derive_seed(root_seed, purpose_tag, index)`` so any stage of a run can
be reproduced in isolation from the single root seed.
"""

import hashlib


def derive_seed(seed: int, tag: str, index: int = 0) -> int:
    """64-bit stream seed for a named purpose under a root seed."""
    digest = hashlib.sha256(f"{seed}/{tag}/{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")
