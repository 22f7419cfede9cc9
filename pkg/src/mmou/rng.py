"""Counter-based random streams.

Every sampler in this package derives its randomness from Philox-4x64-10
streams keyed by ``(master_seed, stream_index)``.  Distinct keys give
statistically independent streams, so path-level parallelism only requires
that callers partition work by path index; serial and parallel runs then
produce identical output.

Two access routes exist:

* :func:`substream` wraps numpy's own Philox bit generator for sequential
  per-path use (exact CTMC path sampling and other desk-scale loops).
* The batch kernels in :mod:`mmou._kernels` inline the same Philox function
  and consume raw 64-bit words directly; :func:`uniform_words` is the pure
  numpy reference for that word stream, used to cross-check the kernels.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_INV53 = 1.0 / (1 << 53)


def substream(seed: int, index: int) -> np.random.Generator:
    """Return the Philox generator keyed by ``(seed, index)``.

    Bit-reproducible: the same pair always yields the same stream,
    independent of how many other streams have been created.
    """
    key = np.array([np.uint64(seed), np.uint64(index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _mulhilo(m, a):
    lo = m * a
    al = a & _MASK32
    ah = a >> _S32
    bl = m & _MASK32
    bh = m >> _S32
    mll = al * bl
    mlh = al * bh
    mhl = ah * bl
    carry = ((mll >> _S32) + (mlh & _MASK32) + (mhl & _MASK32)) >> _S32
    hi = ah * bh + (mlh >> _S32) + (mhl >> _S32) + carry
    return hi, lo


def raw_words(seed: int, index: int, n_words: int, counter_start: int = 0) -> np.ndarray:
    """Philox-4x64-10 output words for key ``(seed, index)``, counters ascending.

    Reference implementation (vectorized over counters).  numpy's own
    ``Philox`` buffers from counter 1, so ``counter_start=1`` reproduces
    ``Generator(Philox(key=[seed, index]))`` draws bit-exactly.
    """
    n_ctr = (n_words + 3) // 4
    with np.errstate(over="ignore"):
        c0 = np.arange(counter_start, counter_start + n_ctr, dtype=np.uint64)
        c1 = np.zeros(n_ctr, dtype=np.uint64)
        c2 = np.zeros(n_ctr, dtype=np.uint64)
        c3 = np.zeros(n_ctr, dtype=np.uint64)
        k0 = np.uint64(seed)
        k1 = np.uint64(index)
        for r in range(10):
            if r:
                k0 = k0 + _W0
                k1 = k1 + _W1
            hi0, lo0 = _mulhilo(_M0, c0)
            hi1, lo1 = _mulhilo(_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return np.stack([c0, c1, c2, c3], axis=1).reshape(-1)[:n_words]


def uniform_words(seed: int, index: int, n_words: int, counter_start: int = 0) -> np.ndarray:
    """Uniform(0,1) doubles from :func:`raw_words` (top 53 bits of each word)."""
    w = raw_words(seed, index, n_words, counter_start)
    return (w >> _S11).astype(np.float64) * _INV53
