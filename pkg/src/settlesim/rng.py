"""Portable seeded generator: xoshiro256** with splitmix64 seeding.

Pure integer arithmetic so that every implementation fed the same seed draws
the same stream, independent of platform or numpy version.
"""
from __future__ import annotations

import math

MASK64 = (1 << 64) - 1
_JUMP = (0x180EC6D33CFD0ABA, 0xD5A61266F0C9392C, 0xA9582618E03FC9AA, 0x39ABDC4529B1661C)


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step. Returns ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


class Xoshiro256:
    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed: int = 0, *, state: tuple[int, int, int, int] | None = None):
        if state is None:
            sm = seed & MASK64
            words = []
            for _ in range(4):
                sm, out = splitmix64(sm)
                words.append(out)
            state = tuple(words)
        if not any(state):
            raise ValueError("xoshiro256** state must not be all zero")
        self.s0, self.s1, self.s2, self.s3 = (w & MASK64 for w in state)

    @property
    def state(self) -> tuple[int, int, int, int]:
        return (self.s0, self.s1, self.s2, self.s3)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        x = (s1 * 5) & MASK64
        result = ((((x << 7) | (x >> 57)) & MASK64) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        self.s0, self.s1, self.s2 = s0, s1, s2
        self.s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
        return result

    def jump(self) -> None:
        """Advance 2**128 draws; used to carve independent streams."""
        acc = [0, 0, 0, 0]
        for word in _JUMP:
            for b in range(64):
                if word & (1 << b):
                    acc[0] ^= self.s0
                    acc[1] ^= self.s1
                    acc[2] ^= self.s2
                    acc[3] ^= self.s3
                self.next_u64()
        self.s0, self.s1, self.s2, self.s3 = acc

    def spawn(self) -> "Xoshiro256":
        """Return a generator positioned at the current state, then jump self."""
        child = Xoshiro256(state=self.state)
        self.jump()
        return child

    def uniform_int(self, lo: int, hi: int) -> int:
        """Uniform integer in ``[lo, hi]`` inclusive, by rejection (unbiased)."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        span = hi - lo + 1
        if span == 1:
            return lo
        if span > MASK64:
            raise ValueError("range wider than 2**64")
        limit = (MASK64 + 1) - ((MASK64 + 1) % span)
        x = self.next_u64()
        while x >= limit:
            x = self.next_u64()
        return lo + x % span

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def exponential(self, rate: float) -> float:
        return -math.log1p(-self.random()) / rate

    def bernoulli(self, p: float) -> bool:
        if p <= 0.0:
            return False
        if p >= 1.0:
            return True
        return self.random() < p

    def bytes16(self) -> bytes:
        return self.next_u64().to_bytes(8, "little") + self.next_u64().to_bytes(8, "little")
