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

import math
import time
import unittest

import numpy as np

from qkrlab.qchannel import EveStrategy, SimQubit, X, Z, apply_noise, encode_qubits, eve_attack, lemma1_residual, \
    measure, measure_all, qber, random_measurement_operator, transmit
from qkrlab.struct import bitstring, random_bits

N = 100000


class TestQubits(unittest.TestCase):
    def test_encode(self):
        qs = encode_qubits(bitstring([0, 1, 0, 1]), bitstring([0, 0, 1, 1]))
        self.assertEqual(['|0⟩', '|1⟩', '|+⟩', '|−⟩'], [str(qs[i]) for i in range(4)])
        self.assertEqual(SimQubit(X, 1), qs[3])
        self.assertRaises(ValueError, encode_qubits, bitstring([0, 1]), bitstring([0]))
        self.assertRaises(ValueError, SimQubit, 2, 0)

    def test_matching_basis(self):
        rng = np.random.default_rng(0)
        for basis in (Z, X):
            for value in (0, 1):
                for _ in range(10):
                    self.assertEqual(value, measure(SimQubit(basis, value), basis, rng))

        bits, bases = random_bits(rng, 1000), random_bits(rng, 1000)
        self.assertEqual(bits.tolist(), measure_all(encode_qubits(bits, bases), bases, rng).tolist())

    def test_mismatched_basis(self):
        rng = np.random.default_rng(1)
        ones = sum(measure(SimQubit(X, 0), Z, rng) for _ in range(N))
        self.assertTrue(0.49 <= ones / N <= 0.51)

        q = SimQubit(X, 0)
        first = measure(q, Z, rng)
        self.assertEqual((Z, first), (q.basis, q.value))
        self.assertEqual(first, measure(q, Z, rng))

    def test_measure_all(self):
        rng = np.random.default_rng(2)
        qs = encode_qubits(np.zeros(N, dtype=np.uint8), np.ones(N, dtype=np.uint8))
        first = measure_all(qs, np.zeros(N, dtype=np.uint8), rng)
        self.assertTrue(0.49 <= first.mean() <= 0.51)
        self.assertEqual(first.tolist(), measure_all(qs, np.zeros(N, dtype=np.uint8), rng).tolist())
        self.assertRaises(ValueError, measure_all, qs, np.zeros(3, dtype=np.uint8), rng)


class TestNoise(unittest.TestCase):
    def test_zero(self):
        rng = np.random.default_rng(3)
        qs = encode_qubits(random_bits(rng, 1000), random_bits(rng, 1000))
        values = qs.values.copy()
        qs, flips = apply_noise(qs, 0.0, rng)
        self.assertEqual((0, values.tolist()), (flips, qs.values.tolist()))
        self.assertRaises(ValueError, apply_noise, qs, 0.6, rng)

    def test_flip_rate(self):
        rng = np.random.default_rng(4)
        for q in (0.05, 0.5):
            qs, flips = apply_noise(encode_qubits(np.zeros(N, dtype=np.uint8), random_bits(rng, N)), q, rng)
            self.assertEqual(flips, int(qs.values.sum()))
            self.assertLess(abs(flips / N - q), 3 * math.sqrt(q * (1 - q) / N))

    def test_flip_in_basis(self):
        rng = np.random.default_rng(5)
        qs, _ = apply_noise(encode_qubits(bitstring([0]), bitstring([X])), 0.5, rng)
        while qs.values[0] == 0: qs, _ = apply_noise(qs, 0.5, rng)
        self.assertEqual(SimQubit(X, 1), qs[0])


class TestEve(unittest.TestCase):
    def end_to_end(self, kind: str, seed: int):
        rng = np.random.default_rng(seed)
        bits, bases = random_bits(rng, N), random_bits(rng, N)
        qs, transcript = eve_attack(EveStrategy(kind, seed + 100), encode_qubits(bits, bases))
        return bits, bases, measure_all(qs, bases, rng), transcript

    def test_passive(self):
        bits, _, received, transcript = self.end_to_end('passive', 6)
        self.assertEqual((0.0, 0), (qber(bits, received), len(transcript.bases)))

    def test_intercept_random(self):
        start = time.perf_counter()
        bits, bases, received, transcript = self.end_to_end('intercept-random', 7)
        self.assertTrue(0.24 <= qber(bits, received) <= 0.26)
        self.assertEqual(N, len(transcript.outcomes))
        same = transcript.bases == bases
        self.assertEqual(bits[same].tolist(), transcript.outcomes[same].tolist())
        self.assertLess(time.perf_counter() - start, 60)

    def test_intercept_fixed(self):
        bits, bases, received, _ = self.end_to_end('intercept-z', 8)
        self.assertEqual(0.0, qber(bits[bases == Z], received[bases == Z]))
        self.assertTrue(0.49 <= qber(bits[bases == X], received[bases == X]) <= 0.51)

        bits, bases, received, _ = self.end_to_end('intercept-x', 9)
        self.assertEqual(0.0, qber(bits[bases == X], received[bases == X]))

    def test_replace(self):
        bits, _, received, _ = self.end_to_end('replace', 10)
        self.assertTrue(0.49 <= qber(bits, received) <= 0.51)
        self.assertRaises(ValueError, EveStrategy, 'clone')

    def test_transmit(self):
        rng = np.random.default_rng(11)
        qs = encode_qubits(random_bits(rng, 100), random_bits(rng, 100))
        out, flips = transmit(qs, 0.0, EveStrategy('replace', 0), rng)
        self.assertIsNot(qs, out)
        self.assertEqual(0, flips)
        self.assertEqual(0.0, qber([], []))
        self.assertRaises(ValueError, qber, [0], [0, 1])


class TestLemma1(unittest.TestCase):
    def test_residual(self):
        self.assertAlmostEqual(0.0, lemma1_residual(np.eye(2)), places=15)
        self.assertAlmostEqual(0.0, lemma1_residual(np.diag([1, 0])), places=15)
        self.assertRaises(ValueError, lemma1_residual, np.eye(3))

    def test_random_operators(self):
        start = time.perf_counter()
        rng = np.random.default_rng(12)
        worst = 0.0
        for _ in range(1000):
            m = random_measurement_operator(rng)
            self.assertTrue(np.all(np.abs(m) <= 1))
            worst = max(worst, lemma1_residual(m))
        self.assertLess(worst, 1e-12)
        self.assertLess(time.perf_counter() - start, 1)


if __name__ == '__main__':
    unittest.main()
