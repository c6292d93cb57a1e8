"""Counter-based random streams usable from Python and from compiled kernels.

Every stream is a numpy ``Philox`` generator whose 128-bit key packs
``(master_seed, stream_id)``.  Kernels call the generator's C entry point
directly through ctypes, so Python and compiled code consume the same
bit sequence and a trial's output depends only on its key.
"""
import numba as nb
import numpy as np

_U64 = (1 << 64) - 1

# one C entry point serves every Philox instance; the state pointer selects the stream
_next_uint64 = np.random.Philox(0).ctypes.next_uint64

_BYTE = np.uint64(0xFF)
_EIGHT = np.uint64(8)
_ZERO = np.uint64(0)
_SHIFT11 = np.uint64(11)
_TWO_M53 = 1.0 / 9007199254740992.0


@nb.njit(nogil=True)
def next_u64(addr):
    return _next_uint64(addr)


@nb.njit(nogil=True)
def next_uniform(addr):
    """Uniform double in [0, 1) with 53 random bits."""
    return (_next_uint64(addr) >> _SHIFT11) * _TWO_M53


@nb.njit(nogil=True)
def draw_direction(addr, pool, m):
    """Uniform integer in [0, m) for m <= 256.

    Bytes are peeled off 64-bit words kept in ``pool = [word, bytes_left]``;
    a byte is rejected when it falls in the top ``256 % m`` values, so the
    law is exactly uniform.
    """
    limit = np.uint64(256 - 256 % m)
    mm = np.uint64(m)
    while True:
        if pool[1] == _ZERO:
            pool[0] = _next_uint64(addr)
            pool[1] = _EIGHT
        b = pool[0] & _BYTE
        pool[0] = pool[0] >> _EIGHT
        pool[1] -= np.uint64(1)
        if b < limit:
            return np.int64(b % mm)


@nb.njit(nogil=True)
def fill_directions(addr, pool, m, out):
    for i in range(out.shape[0]):
        out[i] = draw_direction(addr, pool, m)
    return out


def mix64(a, b):
    """SplitMix64 finaliser of ``a`` combined with ``b``; used to derive child stream ids."""
    z = (a * 0x9E3779B97F4A7C15 + b + 0x632BE59BD9B4E019) & _U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return z ^ (z >> 31)


class RngStream:
    """A reproducible random stream identified by ``(master_seed, stream_id)``.

    Streams are never shared between threads; each trial owns one.
    """

    __slots__ = ("master_seed", "stream_id", "bitgen", "pool", "addr")

    def __init__(self, master_seed, stream_id=0):
        master_seed = int(master_seed)
        stream_id = int(stream_id)
        if not (0 <= master_seed <= _U64 and 0 <= stream_id <= _U64):
            raise ValueError("master_seed and stream_id must be unsigned 64-bit integers")
        self.master_seed = master_seed
        self.stream_id = stream_id
        self.bitgen = np.random.Philox(key=master_seed | (stream_id << 64))
        self.pool = np.zeros(2, dtype=np.uint64)
        self.addr = self.bitgen.ctypes.state_address

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"

    def spawn(self, index):
        """Child stream for sub-task ``index``; a pure function of this stream's key."""
        return RngStream(self.master_seed, mix64(self.stream_id, int(index)))

    def next_uint64(self):
        return int(next_u64(self.addr))

    def uniform(self):
        return float(next_uniform(self.addr))

    def direction(self, d):
        """Index in [0, 2d) of a uniformly chosen unit step."""
        return int(draw_direction(self.addr, self.pool, 2 * d))

    def directions(self, d, count):
        out = np.empty(int(count), dtype=np.int8)
        return fill_directions(self.addr, self.pool, 2 * d, out)
