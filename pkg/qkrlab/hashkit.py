#  Copyright 2021 The QKRLab Authors
#
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS,
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  See the License for the specific language governing permissions and
#  limitations under the License.

__author__ = 'The QKRLab Authors'

import logging
import math
from typing import TYPE_CHECKING, List, Optional

import numpy as np
from scipy import linalg
from scipy.signal import fftconvolve

from qkrlab.struct import BitString, KeyId, bits_to_int, int_to_bits, xor

if TYPE_CHECKING:
    from qkrlab.protocol import KeyPool

logger = logging.getLogger(__name__)

# public reduction polynomials of GF(2^t), including the x^t term
REDUCTION_POLYNOMIALS = {
    4: (1 << 4) | 0b11,                      # x^4 + x + 1
    8: (1 << 8) | 0b11011,                   # x^8 + x^4 + x^3 + x + 1
    16: (1 << 16) | (1 << 12) | 0b1011,      # x^16 + x^12 + x^3 + x + 1
    32: (1 << 32) | (1 << 22) | 0b111,       # x^32 + x^22 + x^2 + x + 1
    64: (1 << 64) | 0b11011,                 # x^64 + x^4 + x^3 + x + 1
}


class GF2n:
    def __init__(self, degree: int):
        """
        :param degree: the extension degree t; one of REDUCTION_POLYNOMIALS.
        """
        if degree not in REDUCTION_POLYNOMIALS:
            raise ValueError('no reduction polynomial for GF(2^{}); use one of {}'.format(degree, sorted(REDUCTION_POLYNOMIALS)))
        self.degree = degree
        self.modulus = REDUCTION_POLYNOMIALS[degree]
        self.order = 1 << degree

    def mul(self, a: int, b: int) -> int:
        res = 0
        for _ in range(self.degree):
            if b & 1: res ^= a
            b >>= 1
            a <<= 1
            if a & self.order: a ^= self.modulus
        return res

    def mul_array(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """
        Element-wise product of broadcastable arrays of field elements (degree ≤ 32).
        """
        a, b = np.broadcast_arrays(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))
        a, b = a.copy(), b.copy()
        res = np.zeros_like(a)
        for _ in range(self.degree):
            res ^= np.where(b & 1, a, 0)
            b >>= 1
            a <<= 1
            a = np.where(a & self.order, a ^ self.modulus, a)
        return res


class MacParams:
    def __init__(self, tag_bits: int, max_blocks: int):
        """
        :param tag_bits: t, the tag length; also the width of a field element.
        :param max_blocks: L, the largest number of padded message blocks.
        """
        if tag_bits < 1 or max_blocks < 1: raise ValueError('tag bits and blocks must be positive')
        GF2n(tag_bits)
        self.tag_bits = tag_bits
        self.block_bits = tag_bits
        self.max_blocks = max_blocks

    @property
    def epsilon(self) -> float:
        """
        :return: L/2^t, the XOR-collision bound of the family.
        """
        return self.max_blocks / 2 ** self.tag_bits

    @classmethod
    def for_message(cls, message_bits: int, tag_bits: int) -> 'MacParams':
        return cls(tag_bits, padded_blocks(message_bits, tag_bits))


def padded_blocks(message_bits: int, block_bits: int) -> int:
    return math.ceil((message_bits + 1) / block_bits) + 1


def pad_message(msg: BitString, block_bits: int) -> List[int]:
    """
    Appends a 1, zero-fills to the block boundary, and appends one block holding the original bit-length.
    :param msg: the message.
    :param block_bits: the block width.
    :return: the padded message as field elements.
    """
    n = len(msg)
    padded = np.zeros((padded_blocks(n, block_bits) - 1) * block_bits, dtype=np.uint8)
    padded[:n] = msg
    padded[n] = 1
    blocks = [bits_to_int(b) for b in padded.reshape(-1, block_bits)]
    blocks.append(n % (1 << block_bits))
    return blocks


def poly_tag(u: int, blocks: List[int], field: GF2n) -> int:
    """
    :param u: the key as a field element.
    :param blocks: the message blocks m₁…m_L.
    :param field: the field.
    :return: Σ mᵢ·uⁱ.
    """
    acc = 0
    for m in reversed(blocks): acc = field.mul(acc ^ m, u)
    return acc


def mac_tag(u: BitString, msg: BitString, max_blocks: Optional[int] = None) -> BitString:
    """
    :param u: the authentication key; its length t is the tag length.
    :param msg: the message.
    :param max_blocks: the capacity L of the family, if bounded.
    :return: the t-bit tag of the padded message.
    """
    t = len(u)
    field = GF2n(t)
    blocks = pad_message(msg, t)
    if max_blocks is not None and len(blocks) > max_blocks:
        raise ValueError('message of {} bits needs {} blocks, capacity is {}'.format(len(msg), len(blocks), max_blocks))
    return int_to_bits(poly_tag(bits_to_int(u), blocks, field), t)


def asu2_encrypt_tag(u: BitString, pad: BitString, msg: BitString) -> BitString:
    """
    :return: mac_tag(u, msg) ⊕ pad.
    """
    if len(pad) != len(u): raise ValueError('pad of {} bits for a {}-bit tag'.format(len(pad), len(u)))
    return xor(mac_tag(u, msg), pad)


class ToeplitzSeed:
    def __init__(self, bits: BitString):
        """
        :param bits: the diagonal of the Toeplitz matrix.
        """
        self.bits = bits

    def __len__(self) -> int:
        return len(self.bits)

    def window(self, in_len: int, out_len: int) -> 'ToeplitzSeed':
        """
        :return: the prefix seeding an out_len × in_len matrix.
        """
        size = max(in_len + out_len - 1, 0)
        if size > len(self.bits): raise ValueError('seed of {} bits cannot hash {} to {} bits'.format(len(self.bits), in_len, out_len))
        return ToeplitzSeed(self.bits[:size])


def toeplitz_matrix(seed: ToeplitzSeed, in_len: int, out_len: int) -> np.ndarray:
    """
    :return: the out_len × in_len matrix T[j, i] = seed[out_len − 1 − j + i].
    """
    if len(seed) != max(in_len + out_len - 1, 0): raise ValueError('seed length {} != {} + {} - 1'.format(len(seed), in_len, out_len))
    if out_len == 0: return np.zeros((0, in_len), dtype=np.uint8)
    column = seed.bits[out_len - 1::-1]
    row = seed.bits[out_len - 1:]
    return linalg.toeplitz(column, row).astype(np.uint8)


def toeplitz_extract(seed: ToeplitzSeed, x: BitString, out_len: int) -> BitString:
    """
    :param seed: a seed of exactly len(x) + out_len − 1 bits.
    :param x: the input.
    :param out_len: the output length, 0 ≤ out_len ≤ len(x).
    :return: T·x over GF(2).
    """
    n = len(x)
    if not 0 <= out_len <= n: raise ValueError('output length {} outside [0, {}]'.format(out_len, n))
    if out_len == 0: return np.zeros(0, dtype=np.uint8)
    if len(seed) != n + out_len - 1: raise ValueError('seed length {} != {} + {} - 1'.format(len(seed), n, out_len))

    # y[j] = Σ_i seed[out_len − 1 − j + i]·x[i], read off the full convolution of the seed with reversed x
    conv = fftconvolve(seed.bits.astype(float), x[::-1].astype(float))
    y = np.rint(conv[n - 1:n + out_len - 1][::-1]).astype(np.int64)
    return (y % 2).astype(np.uint8)


def recycled_length(rate: float, length: int) -> int:
    if not 0 <= rate <= 1: raise ValueError('recycling rate {} outside [0, 1]'.format(rate))
    return min(length, int(math.floor(rate * length + 1e-9)))


def upd(k: BitString, rate: float, pool: 'KeyPool', seed: ToeplitzSeed, key_id: KeyId) -> BitString:
    """
    Updates a key without shortening it: the extractor image k′ of length floor(rate·|k|) followed by fresh bits.
    :param k: the old key.
    :param rate: the key recycling rate.
    :param pool: the pool the fresh bits are picked up from.
    :param seed: the pre-shared extractor seed (long enough for a full-rate image).
    :param key_id: the pool address of the fresh bits.
    :return: k′ ∥ k_new, of length |k|.
    """
    n = len(k)
    m = recycled_length(rate, n)
    recycled = toeplitz_extract(seed.window(n, m), k, m)
    fresh = pool.draw(n - m, key_id)
    pool.consume(n - m)
    logger.debug('upd %s: %d bits, %d recycled, %d fresh', key_id, n, m, n - m)
    return np.concatenate([recycled, fresh]).astype(np.uint8)
