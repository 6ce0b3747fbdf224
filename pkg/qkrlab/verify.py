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

import itertools
import logging
import math
import time
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from qkrlab import ratecore
from qkrlab.ecckit import block_codes
from qkrlab.hashkit import GF2n, ToeplitzSeed, toeplitz_matrix
from qkrlab.qchannel import EveStrategy, X, Z, apply_noise, eve_attack, encode_qubits, lemma1_residual, measure_all, \
    qber, random_measurement_operator
from qkrlab.struct import random_bits

logger = logging.getLogger(__name__)


class SuiteResult:
    def __init__(self, name: str, passed: bool, measured: Dict[str, float]):
        """
        :param name: the name of the suite.
        :param passed: the verdict.
        :param measured: the extremes the verdict was reached on.
        """
        self.name = name
        self.passed = passed
        self.measured = measured
        self.seconds = 0.0

    def __str__(self) -> str:
        values = ', '.join('{}={:.9g}'.format(k, v) for k, v in self.measured.items())
        return '{:<10} {}  {:6.2f}s  {}'.format(self.name, 'PASS' if self.passed else 'FAIL', self.seconds, values)


########################################  Rates  ########################################

def check_recycling(step: float = 0.005) -> SuiteResult:
    worst_rate, worst_argmin = 0.0, 0.0
    for q in ratecore.q_grid(step):
        rate, lambda4 = ratecore.optimize_recycling_rate(q)
        worst_rate = max(worst_rate, abs(ratecore.min_recycling_rate(q) - ratecore.closed_form_recycling_rate(q)))
        worst_argmin = max(worst_argmin, abs(lambda4 - q * q))

    r0, r5 = ratecore.min_recycling_rate(0.0), ratecore.min_recycling_rate(0.5)
    passed = worst_rate <= 1e-6 and worst_argmin <= 1e-4 and r0 == 1.0 and r5 == 0.0
    return SuiteResult('recycling', passed, {'max_rate_error': worst_rate, 'max_argmin_error': worst_argmin, 'r(0)': r0, 'r(0.5)': r5})


def check_crossover() -> SuiteResult:
    root = brentq(lambda q: ratecore.consumed_key_rate(q, q) - 1, 0.1, 0.12, xtol=1e-9)
    return SuiteResult('crossover', 0.1095 < root < 0.1105, {'crossover_q': root})


def check_tangency(qp: float = 0.07) -> SuiteResult:
    gap = abs(ratecore.qkr_rate(qp, qp) - ratecore.bb84_rate(qp))
    margin = min(ratecore.qkr_rate(qp, q) - ratecore.existing_qkr_rate(qp, q) for q in ratecore.q_grid() if q < qp)
    return SuiteResult('tangency', gap <= 1e-9 and margin > 0, {'bb84_gap': gap, 'min_margin': margin, 'rate': ratecore.bb84_rate(qp)})


def check_theorem1(tag_spaces: Sequence[int] = (4, 16, 256)) -> SuiteResult:
    passed, worst_excess = True, -math.inf
    for m in tag_spaces:
        bounds = [ratecore.theorem1_bound(m, n) for n in range(m + 1)]
        passed &= bounds[0] == 0 and bounds[-1] == math.log2(m)
        # the bound reaches log₂M already at n = M − 1, up to rounding
        passed &= all(a <= b + 1e-12 for a, b in zip(bounds, bounds[1:]))
        worst_excess = max(worst_excess, max(bounds) - math.log2(m))
    return SuiteResult('theorem1', bool(passed) and worst_excess <= 1e-12, {'max_excess': worst_excess})


def check_spectrum(samples: int = 200, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst_entropy, worst_det, worst_swap = 0.0, 0.0, 0.0

    for lambdas in rng.dirichlet(np.ones(4), samples):
        lambdas /= lambdas.sum()
        spec = ratecore.BellDiagonalSpectrum(*lambdas)
        sigma0, sigma1 = ratecore.eve_state(spec, 0), ratecore.eve_state(spec, 1)
        for rho in (sigma0, sigma1, (sigma0 + sigma1) / 2):
            a = ratecore.von_neumann_entropy(rho, 'analytic')
            g = ratecore.von_neumann_entropy(rho, 'generic')
            worst_entropy = max(worst_entropy, abs(a - g))
        for i in (0, 2):
            block = sigma0[i:i + 2, i:i + 2]
            worst_det = max(worst_det, abs(np.linalg.det(block)))
        worst_swap = max(worst_swap, abs(ratecore.von_neumann_entropy(sigma0) - ratecore.von_neumann_entropy(sigma1)))

    passed = worst_entropy <= 1e-10 and worst_det < 1e-12 and worst_swap <= 1e-12
    return SuiteResult('spectrum', passed, {'max_entropy_gap': worst_entropy, 'max_block_det': worst_det, 'max_swap_gap': worst_swap})


def check_distance(samples: int = 200, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, q in zip(rng.dirichlet(np.ones(4), samples), rng.dirichlet(np.ones(4), samples)):
        worst = max(worst, abs(ratecore.trace_distance(np.diag(p), np.diag(q)) - ratecore.variational_distance(p, q)))
    return SuiteResult('distance', worst <= 1e-12, {'max_gap': worst})


########################################  Hashing  ########################################

def tag_table(tag_bits: int, blocks: int) -> np.ndarray:
    """
    :return: T[u, m] = Σ mᵢ·uⁱ for every key u and every message m of the given number of blocks (m₁ in the high bits).
    """
    field = GF2n(tag_bits)
    keys = np.arange(field.order, dtype=np.int64)[:, None]
    msgs = np.arange(field.order ** blocks, dtype=np.int64)[None, :]
    acc = np.zeros((field.order, field.order ** blocks), dtype=np.int64)
    for i in reversed(range(blocks)):
        block = (msgs >> (tag_bits * (blocks - 1 - i))) & (field.order - 1)
        acc = field.mul_array(acc ^ block, keys)
    return acc


def _max_frequency(d: np.ndarray, symbols: int) -> int:
    # the largest count of one symbol in any column of d
    counts = (d[None, :, :] == np.arange(symbols)[:, None, None]).sum(axis=1)
    return int(counts.max())


def axu_collision(tag_bits: int, blocks: int, pairs: bool = True) -> float:
    """
    :param pairs: enumerate all message pairs; otherwise all nonzero differences (equivalent, the tag is linear in m).
    :return: max over messages m ≠ m′ and targets τ of Pr_u[tag(m) ⊕ tag(m′) = τ].
    """
    t = tag_table(tag_bits, blocks)
    keys, msgs = t.shape
    if not pairs: return _max_frequency(t[:, 1:], keys) / keys
    worst = max(_max_frequency(t[:, m:m + 1] ^ t[:, m + 1:], keys) for m in range(msgs - 1))
    return worst / keys


def asu_collision(tag_bits: int) -> float:
    """
    :return: max over m ≠ m′ and (τ, τ′) of Pr_{u, pad}[tag(m) ⊕ pad = τ and tag(m′) ⊕ pad = τ′] for one-block messages.
    """
    t = tag_table(tag_bits, 1)
    order = t.shape[0]
    pads = np.arange(order)[None, :]
    worst = 0
    for m1, m2 in itertools.permutations(range(order), 2):
        joint = (t[:, m1:m1 + 1] ^ pads) * order + (t[:, m2:m2 + 1] ^ pads)
        worst = max(worst, int(np.bincount(joint.ravel(), minlength=order * order).max()))
    return worst / order ** 2


def toeplitz_collision(in_len: int, out_len: int) -> float:
    """
    :return: max over inputs x ≠ x′ of the fraction of seeds with T·x = T·x′.
    """
    size = in_len + out_len - 1
    inputs = np.array(list(itertools.product((0, 1), repeat=in_len)), dtype=np.int64)
    weights = 1 << np.arange(out_len)
    images = []
    for s in itertools.product((0, 1), repeat=size):
        m = toeplitz_matrix(ToeplitzSeed(np.array(s, dtype=np.uint8)), in_len, out_len).astype(np.int64)
        images.append((inputs @ m.T % 2) @ weights)
    images = np.array(images)
    worst = max((images[:, x:x + 1] == images[:, x + 1:]).mean(axis=0).max() for x in range(len(inputs) - 1))
    return float(worst)


def check_axu2() -> SuiteResult:
    measured = {'L=2': axu_collision(4, 2), 'L=1': axu_collision(4, 1, pairs=False), 'L=3': axu_collision(4, 3, pairs=False)}
    passed = measured['L=2'] == 2 / 16 and all(measured['L={}'.format(l)] <= l / 16 for l in (1, 3))
    return SuiteResult('axu2', passed, measured)


def check_asu2() -> SuiteResult:
    p = asu_collision(4)
    return SuiteResult('asu2', p <= (1 / 16) / 16, {'max_joint_probability': p})


def check_toeplitz(max_in: int = 6, max_out: int = 3) -> SuiteResult:
    worst = 0.0
    for in_len in range(1, max_in + 1):
        for out_len in range(1, min(in_len, max_out) + 1):
            worst = max(worst, toeplitz_collision(in_len, out_len) * 2 ** out_len)
    p42 = toeplitz_collision(4, 2)
    return SuiteResult('toeplitz', worst <= 1 and p42 <= 1 / 4, {'max_scaled_collision': worst, 'collision(4,2)': p42})


########################################  Codes and channel  ########################################

def check_ecc() -> SuiteResult:
    passed, measured = True, dict()

    for name, code in block_codes().items():
        n, k = code.codeword_bits, code.message_bits
        messages = np.array(list(itertools.product((0, 1), repeat=k)), dtype=np.uint8)
        codewords = code.encode_blocks(messages)
        corrected = 0

        for w in range(code.radius + 1):
            for support in itertools.combinations(range(n), w):
                e = np.zeros(n, dtype=np.uint8)
                e[list(support)] = 1
                decoded, errors, reliable = code.decode_blocks(codewords ^ e)
                ok = np.all(decoded == messages, axis=1) & np.all(errors == e, axis=1) & reliable
                passed &= bool(ok.all())
                corrected += int(ok.sum())

        measured[name + ':corrected'] = corrected
        if code.radius == 1:
            # beyond the radius a perfect code always lands on a wrong code word
            wrong = 0
            for support in itertools.combinations(range(n), 2):
                e = np.zeros(n, dtype=np.uint8)
                e[list(support)] = 1
                decoded, errors, _ = code.decode_blocks(codewords ^ e)
                wrong += int((np.any(decoded != messages, axis=1) & (errors.sum(axis=1) == 1)).sum())
            measured[name + ':miscorrected'] = wrong
            passed &= wrong == len(messages) * math.comb(n, 2)

    return SuiteResult('ecc', bool(passed), measured)


def check_lemma1(samples: int = 1000, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = max(lemma1_residual(random_measurement_operator(rng)) for _ in range(samples))
    return SuiteResult('lemma1', worst < 1e-12, {'max_residual': worst})


def check_channel(qubits: int = 100000, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    measured = dict()

    def end_to_end(kind: str, q: float = 0.0):
        bits, bases = random_bits(rng, qubits), random_bits(rng, qubits)
        qs, _ = eve_attack(EveStrategy(kind, rng), encode_qubits(bits, bases))
        qs, _ = apply_noise(qs, q, rng)
        return bits, bases, measure_all(qs, bases, rng)

    bits, _, received = end_to_end('passive', 0.1)
    measured['noise'] = qber(bits, received)
    sigma = math.sqrt(0.1 * 0.9 / qubits)

    bits, _, received = end_to_end('intercept-random')
    measured['intercept-random'] = qber(bits, received)
    bits, _, received = end_to_end('replace')
    measured['replace'] = qber(bits, received)

    bits, bases, received = end_to_end('intercept-z')
    measured['intercept-z:Z'] = qber(bits[bases == Z], received[bases == Z])
    measured['intercept-z:X'] = qber(bits[bases == X], received[bases == X])

    passed = abs(measured['noise'] - 0.1) <= 3 * sigma and 0.24 <= measured['intercept-random'] <= 0.26 \
        and 0.49 <= measured['replace'] <= 0.51 and measured['intercept-z:Z'] == 0 and 0.49 <= measured['intercept-z:X'] <= 0.51
    return SuiteResult('channel', passed, measured)


SUITES: Dict[str, Callable[[], SuiteResult]] = {
    'recycling': check_recycling,
    'crossover': check_crossover,
    'tangency': check_tangency,
    'theorem1': check_theorem1,
    'spectrum': check_spectrum,
    'distance': check_distance,
    'lemma1': check_lemma1,
    'axu2': check_axu2,
    'asu2': check_asu2,
    'toeplitz': check_toeplitz,
    'ecc': check_ecc,
    'channel': check_channel,
}


def run_suites(names: Optional[Sequence[str]] = None) -> List[SuiteResult]:
    """
    :param names: the suites to run; all of them if None.
    :return: one result per suite, in the order given.
    """
    names = list(SUITES) if names is None else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown: raise ValueError('unknown suite(s) {}; use one of {}'.format(', '.join(unknown), ', '.join(SUITES)))
    results = []

    for name in names:
        start = time.perf_counter()
        res = SUITES[name]()
        res.seconds = time.perf_counter() - start
        if not res.passed: logger.warning('suite %s failed: %s', name, res.measured)
        results.append(res)

    return results
