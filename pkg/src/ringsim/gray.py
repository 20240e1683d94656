"""Reflected binary (gray) code over fixed-width words.

Bit index 0 is the most significant bit, matching how the ring protocol
lays out its per-bit register pairs.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Optional, Sequence


class GrayWord(NamedTuple):
    bits: tuple[int, ...]

    @property
    def width(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)

    @classmethod
    def parse(cls, text: str) -> "GrayWord":
        if not text or any(c not in "01" for c in text):
            raise ValueError(f"not a bit string: {text!r}")
        return cls(tuple(int(c) for c in text))


def gray_encode(v: int, k: int) -> GrayWord:
    if k < 1:
        raise ValueError("word width must be positive")
    if not 0 <= v < (1 << k):
        raise ValueError(f"value {v} outside 0..{(1 << k) - 1}")
    g = v ^ (v >> 1)
    return GrayWord(tuple((g >> (k - 1 - i)) & 1 for i in range(k)))


def gray_decode(w: GrayWord | Sequence[int] | str) -> int:
    if isinstance(w, str):
        w = GrayWord.parse(w)
    bits = w.bits if isinstance(w, GrayWord) else tuple(w)
    v = 0
    acc = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError(f"not a bit: {b!r}")
        acc ^= b
        v = (v << 1) | acc
    return v


def decode_or_bottom(bits: Iterable[Optional[int]]) -> Optional[int]:
    """Decode a word whose entries may be ``None`` (a busy read).

    Any ``None`` bit makes the whole word ``None``.
    """
    bits = tuple(bits)
    if any(b is None for b in bits):
        return None
    return gray_decode(bits)


def bits_needed(K: int) -> int:
    """Width ``ceil(lg K)`` of a word able to hold values ``0..K-1``."""
    if K < 2:
        raise ValueError("K must be at least 2")
    return (K - 1).bit_length()


def changed_positions(a: GrayWord, b: GrayWord) -> list[int]:
    return [i for i, (x, y) in enumerate(zip(a.bits, b.bits)) if x != y]


def transition_counts(k: int) -> list[int]:
    """How often each bit position flips over one full cycle of ``2**k`` increments.

    The cycle includes the rollover from ``2**k - 1`` back to 0.
    """
    counts = [0] * k
    for v in range(1 << k):
        for i in changed_positions(gray_encode(v, k), gray_encode((v + 1) % (1 << k), k)):
            counts[i] += 1
    return counts
