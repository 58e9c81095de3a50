"""Counter-based deterministic random streams.

Every draw is a pure function of (seed, stream id, counter), so results do
not depend on how work is chunked across processes or threads.  The output
function is the SplitMix64 finalizer applied to an affine counter walk:

    key      = mix64(seed XOR mix64(stream_id))
    out(i)   = mix64((key + (i + 1) * GOLDEN) mod 2^64)

With key = 0 this reproduces the reference SplitMix64 sequence for initial
state 0, which pins the implementation to published test vectors.

Doubles in [0, 1) take the top 53 bits: (out >> 11) * 2^-53.
"""

import numpy as np

__all__ = [
    "GOLDEN",
    "mix64",
    "Stream",
    "STREAM_OMEGA",
    "STREAM_POINTS",
    "STREAM_BERRY",
    "STREAM_PHASES",
    "STREAM_BOOT",
]

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

# stream ids for the distinct random purposes in the pipeline
STREAM_OMEGA = 1   # potential coupling amplitudes
STREAM_POINTS = 2  # sample-point selection
STREAM_BERRY = 3   # plane-wave synthesis of the limit field
STREAM_PHASES = 4  # synthetic iid phases used in statistical null tests
STREAM_BOOT = 5    # bootstrap resampling

_U64 = np.uint64
_C1 = _U64(0xBF58476D1CE4E5B9)
_C2 = _U64(0x94D049BB133111EB)
_INV53 = 2.0 ** -53


def mix64(x):
    """SplitMix64 finalizer on python ints (mod 2^64)."""
    x &= MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK
    return x ^ (x >> 31)


def _mix64_np(x):
    # vectorized finalizer; uint64 arithmetic wraps mod 2^64
    x = x ^ (x >> _U64(30))
    x = x * _C1
    x = x ^ (x >> _U64(27))
    x = x * _C2
    return x ^ (x >> _U64(31))


class Stream:
    """One named random stream addressed by counter."""

    def __init__(self, seed, stream_id=0):
        self.seed = int(seed) & MASK
        self.stream_id = int(stream_id) & MASK
        self.key = mix64(self.seed ^ mix64(self.stream_id))

    def raw(self, n, offset=0):
        """Raw uint64 outputs for counters offset .. offset+n-1."""
        idx = np.arange(offset + 1, offset + n + 1, dtype=_U64)
        with np.errstate(over="ignore"):
            return _mix64_np(_U64(self.key) + idx * _U64(GOLDEN))

    def uniform(self, n, lo=0.0, hi=1.0, offset=0):
        u = (self.raw(n, offset) >> _U64(11)).astype(np.float64) * _INV53
        return lo + (hi - lo) * u

    def normal(self, n, offset=0):
        """Standard normals via Box-Muller, 2 counters per draw."""
        raw = self.raw(2 * n, 2 * offset)
        # map to (0, 1] so the log never sees zero
        u1 = ((raw[0::2] >> _U64(11)).astype(np.float64) + 1.0) * _INV53
        u2 = (raw[1::2] >> _U64(11)).astype(np.float64) * _INV53
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def complex_normal(self, n, offset=0):
        """Complex normals with E|c|^2 = 1 (real and imag N(0, 1/2))."""
        z = self.normal(2 * n, offset)
        return (z[0::2] + 1j * z[1::2]) / np.sqrt(2.0)
