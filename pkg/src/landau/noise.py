"""Counter-based Gaussian noise streams for the pairwise Brownian increments.

Every deviate is a pure function of ``(seed, step, i, k, coordinate)`` via
Philox4x32-10, so the n^2-per-step increment field is reproducible and
independent of any execution schedule.  One Philox block yields four uniforms,
which Box-Muller turns into four normals; higher dimensions consume extra
blocks keyed by a block counter.
"""

import numpy as np
from numba import njit, uint32, uint64

_TWO_PI = 2.0 * np.pi
_INV_2_32 = 1.0 / 4294967296.0


@njit(cache=True, inline="always")
def _philox4(c0, c1, c2, c3, k0, k1):
    # Philox4x32 with the standard 10 rounds and Random123 constants.
    for _ in range(10):
        p0 = uint64(0xD2511F53) * uint64(c0)
        p1 = uint64(0xCD9E8D57) * uint64(c2)
        hi0 = uint32(p0 >> uint64(32))
        lo0 = uint32(p0)
        hi1 = uint32(p1 >> uint64(32))
        lo1 = uint32(p1)
        c0 = uint32(hi1 ^ c1 ^ k0)
        c1 = lo1
        c2 = uint32(hi0 ^ c3 ^ k1)
        c3 = lo0
        k0 = uint32(k0 + uint32(0x9E3779B9))
        k1 = uint32(k1 + uint32(0xBB67AE85))
    return c0, c1, c2, c3


@njit(cache=True, inline="always")
def _normals4(step, i, k, block, key0, key1):
    """Four standard normals for pair (i, k) at the given step and block."""
    r0, r1, r2, r3 = _philox4(
        uint32(step), uint32(i), uint32(k),
        uint32(block), uint32(key0), uint32(key1),
    )
    # (r + 0.5) / 2^32 lies in (0, 1), so the log below is always finite.
    u0 = (r0 + 0.5) * _INV_2_32
    u1 = (r1 + 0.5) * _INV_2_32
    u2 = (r2 + 0.5) * _INV_2_32
    u3 = (r3 + 0.5) * _INV_2_32
    m0 = np.sqrt(-2.0 * np.log(u0))
    a0 = _TWO_PI * u1
    m1 = np.sqrt(-2.0 * np.log(u2))
    a1 = _TWO_PI * u3
    return m0 * np.cos(a0), m0 * np.sin(a0), m1 * np.cos(a1), m1 * np.sin(a1)


@njit(cache=True)
def _fill_normals(out, step, i, k, key0, key1):
    """Fill ``out`` (length d) with the keyed normals for pair (i, k)."""
    d = out.shape[0]
    pos = 0
    block = 0
    while pos < d:
        z0, z1, z2, z3 = _normals4(step, i, k, block, key0, key1)
        if pos < d:
            out[pos] = z0
            pos += 1
        if pos < d:
            out[pos] = z1
            pos += 1
        if pos < d:
            out[pos] = z2
            pos += 1
        if pos < d:
            out[pos] = z3
            pos += 1
        block += 1


def split_seed(seed):
    """Split a 64-bit seed into the two 32-bit Philox key words."""
    s = int(seed) & 0xFFFFFFFFFFFFFFFF
    return s & 0xFFFFFFFF, s >> 32


class NoiseStream:
    """Keyed Gaussian deviates for the n^2 Brownian increments per step.

    ``relabel`` optionally remaps particle indices before keying; it is used
    to express the exchangeability property (permuting particles together
    with their noise keys permutes the trajectories).
    """

    def __init__(self, seed, relabel=None):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.key0, self.key1 = split_seed(self.seed)
        self.relabel = None if relabel is None else np.asarray(relabel, dtype=np.int64)

    @property
    def is_plain(self):
        return self.relabel is None

    def normals(self, step, i, k, d):
        """Standard-normal d-vector keyed by (seed, step, i, k)."""
        if self.relabel is not None:
            i = int(self.relabel[i])
            k = int(self.relabel[k])
        out = np.empty(d, dtype=np.float64)
        _fill_normals(out, step, i, k, self.key0, self.key1)
        return out

    def increments(self, step, i, k, d, dt):
        """Brownian increment: d independent N(0, dt) deviates."""
        return np.sqrt(dt) * self.normals(step, i, k, d)
