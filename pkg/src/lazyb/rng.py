"""Deterministic PRNG pinned for trace generation.

xoshiro256++ seeded through splitmix64, so a (seed, config) pair yields the
same trace on every platform and Python version. Cross-language
reproducibility is carried by the trace CSV, not by this generator, but
pinning it keeps regenerated traces stable too.
"""

MASK64 = (1 << 64) - 1


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256pp:
    def __init__(self, seed: int):
        # splitmix64 stream expands the 64-bit seed into the 256-bit state
        s = seed & MASK64
        state = []
        for _ in range(4):
            s = (s + 0x9E3779B97F4A7C15) & MASK64
            z = s
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
            state.append(z ^ (z >> 31))
        self._s = state

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[0] + s[3]) & MASK64, 23) + s[0]) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))
