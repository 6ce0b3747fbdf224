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

import time
import unittest

import numpy as np

from qkrlab.hashkit import GF2n, MacParams, ToeplitzSeed, asu2_encrypt_tag, mac_tag, pad_message, padded_blocks, \
    poly_tag, recycled_length, toeplitz_extract, toeplitz_matrix, upd
from qkrlab.protocol import KeyPool
from qkrlab.struct import PoolEmptyError, bits_to_int, bitstring, random_bits, xor
from qkrlab.verify import asu_collision, axu_collision, tag_table, toeplitz_collision


class TestField(unittest.TestCase):
    def test_mul(self):
        f = GF2n(8)
        self.assertEqual(0xc1, f.mul(0x57, 0x83))
        self.assertEqual(0xfe, f.mul(0x57, 0x13))
        self.assertEqual((0, 0x57), (f.mul(0x57, 0), f.mul(0x57, 1)))
        self.assertRaises(ValueError, GF2n, 5)

    def test_mul_array(self):
        f = GF2n(4)
        a, b = np.arange(16)[:, None], np.arange(16)[None, :]
        table = f.mul_array(a, b)
        self.assertEqual([f.mul(int(x), int(y)) for x in range(16) for y in range(16)], table.ravel().tolist())


class TestMac(unittest.TestCase):
    def test_padding(self):
        self.assertEqual((2, 3), (padded_blocks(3, 4), padded_blocks(4, 4)))
        self.assertEqual([0b1011, 3], pad_message(bitstring([1, 0, 1]), 4))
        self.assertEqual([0b1010, 0b1000, 4], pad_message(bitstring([1, 0, 1, 0]), 4))
        self.assertEqual([0b1000, 0], pad_message(bitstring([]), 4))

    def test_poly_tag(self):
        f = GF2n(4)
        for u in range(16):
            self.assertEqual(0, poly_tag(u, [0, 0, 0], f))
            self.assertEqual(f.mul(3, u) ^ f.mul(5, f.mul(u, u)), poly_tag(u, [3, 5], f))

    def test_mac_tag(self):
        rng = np.random.default_rng(0)
        u, msg = random_bits(rng, 32), random_bits(rng, 100)
        tag = mac_tag(u, msg)
        self.assertEqual(32, len(tag))
        self.assertEqual(tag.tolist(), mac_tag(u, msg).tolist())
        blocks = pad_message(msg, 32)
        self.assertEqual(poly_tag(bits_to_int(u), blocks, GF2n(32)), bits_to_int(tag))
        self.assertEqual([0] * 32, mac_tag(np.zeros(32, dtype=np.uint8), msg).tolist())

        other = msg.copy()
        other[0] ^= 1
        self.assertNotEqual(tag.tolist(), mac_tag(u, other).tolist())
        self.assertRaises(ValueError, mac_tag, u, msg, 3)
        self.assertEqual(tag.tolist(), mac_tag(u, msg, padded_blocks(100, 32)).tolist())

    def test_mac_params(self):
        p = MacParams.for_message(100, 32)
        self.assertEqual((32, 5), (p.tag_bits, p.max_blocks))
        self.assertEqual(5 / 2 ** 32, p.epsilon)
        self.assertEqual(2 / 16, MacParams(4, 2).epsilon)
        self.assertRaises(ValueError, MacParams, 0, 2)

    def test_asu2_encrypt_tag(self):
        rng = np.random.default_rng(1)
        u, msg = random_bits(rng, 16), random_bits(rng, 50)
        self.assertEqual(mac_tag(u, msg).tolist(), asu2_encrypt_tag(u, np.zeros(16, dtype=np.uint8), msg).tolist())
        pad = random_bits(rng, 16)
        flipped = pad.copy()
        flipped[5] ^= 1
        diff = xor(asu2_encrypt_tag(u, pad, msg), asu2_encrypt_tag(u, flipped, msg))
        self.assertEqual([5], np.flatnonzero(diff).tolist())
        self.assertRaises(ValueError, asu2_encrypt_tag, u, pad[:8], msg)


class TestUniversality(unittest.TestCase):
    def test_tag_table(self):
        f, t = GF2n(4), tag_table(4, 2)
        self.assertEqual((16, 256), t.shape)
        for u, m in ((3, 0x5a), (7, 0xff), (0, 0x12), (15, 0x01)):
            self.assertEqual(poly_tag(u, [m >> 4, m & 15], f), t[u, m])

    def test_axu2(self):
        start = time.perf_counter()
        self.assertEqual(2 / 16, axu_collision(4, 2))
        self.assertLess(time.perf_counter() - start, 10)
        self.assertEqual(2 / 16, axu_collision(4, 2, pairs=False))
        self.assertLessEqual(axu_collision(4, 1, pairs=False), 1 / 16)
        self.assertLessEqual(axu_collision(4, 3, pairs=False), 3 / 16)

    def test_asu2(self):
        self.assertEqual(1 / 256, asu_collision(4))

    def test_two_universal(self):
        start = time.perf_counter()
        self.assertLessEqual(toeplitz_collision(4, 2), 1 / 4)
        self.assertLess(time.perf_counter() - start, 10)
        for in_len in range(1, 7):
            for out_len in range(1, min(in_len, 3) + 1):
                self.assertLessEqual(toeplitz_collision(in_len, out_len), 2 ** -out_len)


class TestToeplitz(unittest.TestCase):
    def test_extract(self):
        rng = np.random.default_rng(2)
        seed = ToeplitzSeed(random_bits(rng, 20 + 8 - 1))
        x = random_bits(rng, 20)
        m = toeplitz_matrix(seed, 20, 8)
        self.assertEqual(((m.astype(int) @ x) % 2).tolist(), toeplitz_extract(seed, x, 8).tolist())
        self.assertEqual([0] * 8, toeplitz_extract(seed, np.zeros(20, dtype=np.uint8), 8).tolist())
        self.assertEqual(0, len(toeplitz_extract(ToeplitzSeed(random_bits(rng, 19)), x, 0)))
        self.assertRaises(ValueError, toeplitz_extract, seed, x, 21)
        self.assertRaises(ValueError, toeplitz_extract, ToeplitzSeed(random_bits(rng, 26)), x, 8)

    def test_matrix(self):
        seed = ToeplitzSeed(bitstring([1, 0, 0, 1, 1]))
        m = toeplitz_matrix(seed, 3, 3)
        self.assertEqual([[0, 1, 1], [0, 0, 1], [1, 0, 0]], m.tolist())
        self.assertRaises(ValueError, toeplitz_matrix, seed, 3, 2)

    def test_linear(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            seed = ToeplitzSeed(random_bits(rng, 200 + 120 - 1))
            x, y = random_bits(rng, 200), random_bits(rng, 200)
            expected = xor(toeplitz_extract(seed, x, 120), toeplitz_extract(seed, y, 120))
            self.assertEqual(expected.tolist(), toeplitz_extract(seed, xor(x, y), 120).tolist())

    def test_window(self):
        seed = ToeplitzSeed(bitstring([1, 0, 1, 1, 0, 1, 1]))
        self.assertEqual([1, 0, 1, 1], seed.window(3, 2).bits.tolist())
        self.assertEqual(0, len(seed.window(0, 0)))
        self.assertRaises(ValueError, seed.window, 4, 5)


class TestUpd(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(4)
        self.k = random_bits(rng, 100)
        self.seed = ToeplitzSeed(random_bits(rng, 199))

    def test_rates(self):
        self.assertEqual((100, 50, 0, 0), tuple(recycled_length(r, 100) for r in (1.0, 0.5, 0.0, 0.009)))
        self.assertRaises(ValueError, recycled_length, 1.5, 100)

        for rate, recycled in ((1.0, 100), (0.5, 50), (0.0, 0)):
            pool = KeyPool(0)
            pool.ledger.recycled = 100
            out = upd(self.k, rate, pool, self.seed, (0, 'AB', 'kv-new'))
            self.assertEqual(100, len(out))
            self.assertEqual((100 - recycled, 100 - recycled, 100), (pool.cursor, pool.ledger.consumed, pool.ledger.recycled))
            self.assertEqual(toeplitz_extract(self.seed.window(100, recycled), self.k, recycled).tolist(), out[:recycled].tolist())

    def test_deterministic(self):
        a = upd(self.k, 0.7, KeyPool(9), self.seed, (3, 'BA', 'kv-new'))
        b = upd(self.k, 0.7, KeyPool(9), self.seed, (3, 'BA', 'kv-new'))
        c = upd(self.k, 0.7, KeyPool(9), self.seed, (5, 'BA', 'kv-new'))
        self.assertEqual(a.tolist(), b.tolist())
        self.assertEqual(a[:70].tolist(), c[:70].tolist())
        self.assertNotEqual(a[70:].tolist(), c[70:].tolist())

    def test_exhausted(self):
        self.assertRaises(PoolEmptyError, upd, self.k, 0.5, KeyPool(0, capacity=40), self.seed, (0, 'AB', 'kv-new'))


if __name__ == '__main__':
    unittest.main()
