"""Portable seeded generator used for scene layout.

The recurrence is fully specified here so that a scene can be regenerated
bit-for-bit by any implementation:

* seeding: ``state = splitmix64(seed)``; a zero state is replaced by
  ``0x9E3779B97F4A7C15``.
* step (xorshift64*)::

      x ^= x >> 12
      x ^= (x << 25) mod 2**64
      x ^= x >> 27
      out = (x * 0x2545F4914F6CDD1D) mod 2**64

* ``random()`` returns ``(out >> 11) * 2**-53`` in [0, 1).
* ``uniform(lo, hi)`` returns ``lo + (hi - lo) * random()``.
"""

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(value):
    z = (value + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class XorShift64Star:
    """xorshift64* generator seeded through splitmix64."""

    def __init__(self, seed: int):
        state = splitmix64(int(seed) & MASK64)
        self.state = state if state else _GOLDEN

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & MASK64

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()
