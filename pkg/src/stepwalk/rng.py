"""Counter-based random bits keyed by (master seed, path index, stream id).

Every draw is a pure function of ``(key, counter)``: the key is derived from
the master seed, the path index and a stream id, and the output at position
``counter`` is the SplitMix64 finaliser applied to ``key + (counter + 1) * GAMMA``.
Paths can therefore be generated in any order, on any thread, and still give
bit-identical results.
"""

import numba
import numpy as np
from scipy.special import ndtri

GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1

# stream ids
EPS = 1
UNIF = 2
STEP = 3
LIMIT = 4
RESAMPLE = 5

_G = np.uint64(GAMMA)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_S12 = np.uint64(12)
_S32 = np.uint64(32)
_ONE = np.uint64(1)
_SALT = np.uint64(0x632BE59BD9B4E019)


@numba.njit(cache=True, nogil=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@numba.njit(cache=True, nogil=True)
def bits_at(key, counter):
    return mix64(key + (np.uint64(counter) + _ONE) * _G)


@numba.njit(cache=True, nogil=True)
def uniform_at(key, counter):
    """Uniform double in [0, 1) with 53 random bits."""
    return np.float64(bits_at(key, counter) >> _S11) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True, nogil=True)
def index_below(key, counter, m):
    """Uniform integer in ``{0, ..., m - 1}`` by 32-bit multiply-shift (m < 2**32)."""
    hi = bits_at(key, counter) >> _S32
    return np.int64((hi * np.uint64(m)) >> _S32)


def derive_key(seed, path, stream):
    """Key for one (seed, path, stream) triple, computed in exact integer arithmetic."""
    k = _mix_int((int(seed) & MASK64) ^ 0x632BE59BD9B4E019)
    k = _mix_int((k + (int(path) & MASK64) * GAMMA) & MASK64)
    k = _mix_int(k ^ ((int(stream) * 0xD1B54A32D192ED03) & MASK64))
    return k


def derive_keys(seed, paths, stream):
    """Vector of uint64 keys, one per path index."""
    paths = np.asarray(paths, dtype=np.int64).ravel()
    return np.array([derive_key(seed, i, stream) for i in paths], dtype=np.uint64)


def _mix_int(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def reference_bits(key, counter):
    """Pure-Python output at ``counter``; independent check of the compiled path."""
    return _mix_int((int(key) + (int(counter) + 1) * GAMMA) & MASK64)


@numba.njit(cache=True, nogil=True)
def _fill_bits(keys, start, out):
    for b in range(out.shape[0]):
        k = keys[b]
        for j in range(out.shape[1]):
            out[b, j] = bits_at(k, start + j)


def bits_matrix(keys, n, start=0):
    """``(len(keys), n)`` uint64 matrix; row ``b`` holds counters ``start .. start+n-1`` of key ``b``."""
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    out = np.empty((keys.shape[0], n), dtype=np.uint64)
    _fill_bits(keys, start, out)
    return out


def bits_to_uniform(bits):
    """Map uint64 bits to doubles in [0, 1)."""
    return (bits >> _S11).astype(np.float64) * (1.0 / 9007199254740992.0)


def bits_to_open_uniform(bits):
    """Map uint64 bits to doubles in (0, 1), safe for inverse CDFs (52 bits, so the offset stays exact)."""
    return ((bits >> _S12).astype(np.float64) + 0.5) * (1.0 / 4503599627370496.0)


def normal_matrix(seed, paths, stream, n, start=0):
    """Standard normal draws, shape ``(len(paths), n)``, by inverse CDF."""
    keys = derive_keys(seed, paths, stream)
    return ndtri(bits_to_open_uniform(bits_matrix(keys, n, start)))
