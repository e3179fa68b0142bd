import hashlib


def derive_seed(*parts: int | str) -> int:
    """Stable 64-bit seed from a tuple of ints/strings."""
    text = "/".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "big")
