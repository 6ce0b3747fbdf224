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
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.optimize import minimize_scalar
from scipy.special import entr

from qkrlab.struct import OptimizerError, SingularConfigurationError

logger = logging.getLogger(__name__)

TOLERANCE = 1e-12
CLAMP = 1e-10
GRID_POINTS = 10000
LAMBDA4_TOLERANCE = 1e-9
ARGMIN_TOLERANCE = 1e-4
LN2 = math.log(2)


########################################  Entropies  ########################################

def probability_vector(p: Sequence[float]) -> np.ndarray:
    """
    :param p: probabilities.
    :return: the probabilities as an array if they form a distribution.
    """
    p = np.asarray(p, dtype=float).ravel()
    if p.size == 0: raise ValueError('empty distribution')
    if np.any(p < 0) or np.any(p > 1): raise ValueError('probabilities must lie in [0, 1]: {}'.format(p))
    if abs(p.sum() - 1) > TOLERANCE: raise ValueError('probabilities sum to {}, not 1'.format(p.sum()))
    return p


def shannon_entropy(p: Sequence[float]) -> float:
    """
    :param p: a probability distribution.
    :return: H(p) in bits with 0·log0 = 0.
    """
    return float(entr(probability_vector(p)).sum() / LN2)


def binary_entropy(q: float) -> float:
    """
    :param q: the probability of one outcome of a coin.
    :return: h(q) in bits.
    """
    if not 0 <= q <= 1: raise ValueError('binary entropy needs q in [0, 1], got {}'.format(q))
    return float((entr(q) + entr(1 - q)) / LN2)


def _joint(joint) -> np.ndarray:
    p = np.asarray(joint, dtype=float)
    if p.ndim != 2: raise ValueError('a joint distribution must be a matrix p[x, y]')
    probability_vector(p)
    return p


def conditional_entropy(joint) -> float:
    """
    :param joint: the joint distribution p[x, y].
    :return: H(X|Y) = H(X, Y) − H(Y) in bits.
    """
    p = _joint(joint)
    return float((entr(p).sum() - entr(p.sum(axis=0)).sum()) / LN2)


def mutual_information(joint) -> float:
    """
    :param joint: the joint distribution p[x, y].
    :return: I(X;Y) = H(X) − H(X|Y) in bits.
    """
    p = _joint(joint)
    return float(entr(p.sum(axis=1)).sum() / LN2) - conditional_entropy(p)


########################################  Density operators  ########################################

class BellDiagonalSpectrum:
    def __init__(self, lambda1: float, lambda2: float, lambda3: float, lambda4: float):
        """
        Weights of the four Bell states in Alice and Bob's joint state after a collective attack.
        """
        lambdas = np.array([lambda1, lambda2, lambda3, lambda4], dtype=float)
        if np.any(lambdas < 0): raise ValueError('Bell weights must be non-negative: {}'.format(lambdas))
        if abs(lambdas.sum() - 1) > TOLERANCE: raise ValueError('Bell weights sum to {}, not 1'.format(lambdas.sum()))
        self.lambda1, self.lambda2, self.lambda3, self.lambda4 = lambdas.tolist()

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([self.lambda1, self.lambda2, self.lambda3, self.lambda4])

    @classmethod
    def from_qber(cls, q: float, lambda4: float) -> 'BellDiagonalSpectrum':
        """
        :param q: the QBER of both encodings.
        :param lambda4: the free parameter of the feasible family.
        :return: the spectrum with lambda2 = lambda3 = q − lambda4, lambda1 = 1 − 2q + lambda4.
        """
        low, high = feasible_lambda4(q)
        if not low - TOLERANCE <= lambda4 <= high + TOLERANCE:
            raise ValueError('lambda4 = {} is outside [{}, {}] for Q = {}'.format(lambda4, low, high, q))
        return cls(1 - 2 * q + lambda4, q - lambda4, q - lambda4, lambda4)

    def is_feasible(self, q: float) -> bool:
        """
        :param q: the QBER of both encodings.
        :return: True if lambda3 + lambda4 = q and lambda2 + lambda4 = q.
        """
        return abs(self.lambda3 + self.lambda4 - q) <= TOLERANCE and abs(self.lambda2 + self.lambda4 - q) <= TOLERANCE

    def __repr__(self) -> str:
        return 'BellDiagonalSpectrum({}, {}, {}, {})'.format(self.lambda1, self.lambda2, self.lambda3, self.lambda4)


def feasible_lambda4(q: float) -> Tuple[float, float]:
    _check_qber(q)
    return max(0.0, 2 * q - 1), q


def hermitian(m) -> np.ndarray:
    """
    :param m: a square matrix.
    :return: the matrix as a complex array if it equals its conjugate transpose.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]: raise ValueError('not a square matrix: shape {}'.format(m.shape))
    if not np.allclose(m, m.conj().T, rtol=0, atol=TOLERANCE): raise ValueError('matrix is not Hermitian')
    return m


def density_operator(m) -> np.ndarray:
    rho = hermitian(m)
    if abs(np.trace(rho).real - 1) > TOLERANCE: raise ValueError('trace {} is not 1'.format(np.trace(rho).real))
    return rho


def eve_state(spec: BellDiagonalSpectrum, a: int) -> np.ndarray:
    """
    :param spec: the Bell-diagonal spectrum.
    :param a: Alice's measurement result (0 or 1).
    :return: Eve's 4×4 density operator conditioned on a, in the basis of her orthogonal states.
    """
    if a not in (0, 1): raise ValueError('a must be 0 or 1, got {}'.format(a))
    sign = 1 if a == 0 else -1
    l1, l2, l3, l4 = spec.lambdas
    s12 = sign * math.sqrt(l1 * l2)
    s34 = sign * math.sqrt(l3 * l4)
    return np.array([[l1, s12, 0, 0],
                     [s12, l2, 0, 0],
                     [0, 0, l3, s34],
                     [0, 0, s34, l4]], dtype=complex)


def _block_eigenvalues(a: float, b: float, c: complex) -> Tuple[float, float]:
    # eigenvalues of [[a, c], [c*, b]]
    mean = (a + b) / 2
    radius = math.sqrt(((a - b) / 2) ** 2 + abs(c) ** 2)
    return mean + radius, mean - radius


def eigenvalues(rho, method: str = 'auto') -> np.ndarray:
    """
    :param rho: a Hermitian matrix.
    :param method: 'analytic' (2×2, or 4×4 made of two 2×2 diagonal blocks), 'generic' (scipy), or 'auto'.
    :return: the eigenvalues in ascending order.
    """
    rho = hermitian(rho)
    n = rho.shape[0]
    blocky = n == 2 or (n == 4 and np.allclose(rho[:2, 2:], 0, rtol=0, atol=TOLERANCE))

    if method == 'auto': method = 'analytic' if blocky else 'generic'
    if method == 'generic': return linalg.eigvalsh(rho)
    if method != 'analytic': raise ValueError('unknown eigenvalue method: {}'.format(method))
    if not blocky: raise ValueError('analytic eigenvalues need a 2×2 or block-diagonal 4×4 matrix')

    values = list(_block_eigenvalues(rho[0, 0].real, rho[1, 1].real, rho[0, 1]))
    if n == 4: values.extend(_block_eigenvalues(rho[2, 2].real, rho[3, 3].real, rho[2, 3]))
    return np.sort(values)


def von_neumann_entropy(rho, method: str = 'auto') -> float:
    """
    :param rho: a density operator.
    :param method: see eigenvalues().
    :return: S(rho) = −Σ η log₂ η over the eigenvalues η.
    """
    eta = eigenvalues(density_operator(rho), method)
    if eta.min() < -CLAMP: raise ValueError('density operator is not positive semidefinite: {}'.format(eta.min()))
    eta = np.clip(eta, 0, None)
    return float(entr(eta).sum() / LN2)


def s_a_given_e(spec: BellDiagonalSpectrum, method: str = 'auto') -> float:
    """
    S(A|E) = S(E|A) + H(A) − S(E) with H(A) = 1 and S(E) taken on the equal mixture of both conditional states.
    :param spec: the Bell-diagonal spectrum.
    :param method: see eigenvalues().
    :return: the conditional entropy in bits.
    """
    sigma0, sigma1 = eve_state(spec, 0), eve_state(spec, 1)
    s_e_given_a = (von_neumann_entropy(sigma0, method) + von_neumann_entropy(sigma1, method)) / 2
    s_e = von_neumann_entropy((sigma0 + sigma1) / 2, method)
    return s_e_given_a + 1 - s_e


def _s_a_given_e_family(q: float, lambda4: np.ndarray) -> np.ndarray:
    # vectorized s_a_given_e over the feasible family; each 2×2 block of σ_E^a is rank one
    lambdas = np.stack([1 - 2 * q + lambda4, q - lambda4, q - lambda4, lambda4])
    lambdas = np.clip(lambdas, 0, None)
    s_e_given_a = (entr(lambdas[0] + lambdas[1]) + entr(lambdas[2] + lambdas[3])) / LN2
    s_e = entr(lambdas).sum(axis=0) / LN2
    return s_e_given_a + 1 - s_e


########################################  Recycling rates  ########################################

def _check_qber(q: float, upper: float = 0.5, closed: bool = True):
    if not (0 <= q <= upper if closed else 0 <= q < upper):
        raise ValueError('QBER {} is outside [0, {}{}'.format(q, upper, ']' if closed else ')'))


def _check_predicted(qp: float):
    if not 0 <= qp <= 0.5: raise ValueError('predicted QBER {} is outside [0, 0.5)'.format(qp))
    if qp == 0.5 or binary_entropy(qp) >= 1: raise SingularConfigurationError('h(Qp) = 1 at Qp = {}'.format(qp))


def optimize_recycling_rate(q: float) -> Tuple[float, float]:
    """
    Minimizes S(A|E) over the spectra compatible with the QBER: a dense grid followed by a bounded refinement.
    :param q: the QBER of both encodings.
    :return: (minimum, argmin lambda4).
    """
    low, high = feasible_lambda4(q)
    if high - low <= LAMBDA4_TOLERANCE: return float(_s_a_given_e_family(q, np.array([low]))[0]), low

    grid = np.linspace(low, high, GRID_POINTS)
    values = _s_a_given_e_family(q, grid)
    i = int(np.argmin(values))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, GRID_POINTS - 1)]

    res = minimize_scalar(lambda x: float(_s_a_given_e_family(q, np.array([x]))[0]),
                          bounds=(a, b), method='bounded', options={'xatol': LAMBDA4_TOLERANCE})
    if res.success and res.fun <= values[i]: return float(res.fun), float(res.x)
    return float(values[i]), float(grid[i])


def min_recycling_rate(q: float) -> float:
    """
    :param q: the QBER in [0, 0.5].
    :return: the minimum of S(A|E), i.e. the key recycling rate of k_v guaranteed at QBER q.
    """
    rate, lambda4 = optimize_recycling_rate(q)
    if abs(lambda4 - q * q) > ARGMIN_TOLERANCE:
        raise OptimizerError('minimizer lambda4 = {} differs from Q² = {} at Q = {}'.format(lambda4, q * q, q))
    return 0.0 if rate < TOLERANCE else min(1.0, rate)


def closed_form_recycling_rate(q: float) -> float:
    _check_qber(q)
    return 1 - binary_entropy(q)


def key_extracted_rate(q: float, shared_key: bool = True) -> float:
    """
    :param q: the QBER.
    :param shared_key: True if both parties already hold the key (H(A|B) = 0); False for a key still to be reconciled.
    :return: S(A|E) − H(A|B) at the optimal attack.
    """
    return min_recycling_rate(q) - (0 if shared_key else binary_entropy(q))


def theorem1_bound(tag_space: int, rounds: int) -> float:
    """
    :param tag_space: |MAC|, the number of possible tags.
    :param rounds: the number of rounds authenticated with the same key u.
    :return: the bound log|MAC| − (1 − n/|MAC|) log(|MAC| − n) on I(u; EI), in bits.
    """
    if tag_space < 1: raise ValueError('tag space must be positive')
    if not 0 <= rounds <= tag_space: raise ValueError('rounds {} outside [0, {}]'.format(rounds, tag_space))
    if rounds == tag_space: return math.log2(tag_space)
    f = rounds / tag_space
    return f * math.log2(tag_space) - (1 - f) * math.log1p(-f) / LN2


def response_leakage_bits(max_q: int) -> int:
    """
    :param max_q: the largest error count the decoder can report.
    :return: ceil(log₂(max_q + 2)), an upper bound on H(R) for R in {0..max_q, reject}.
    """
    if max_q < 0: raise ValueError('max_q must be non-negative')
    return math.ceil(math.log2(max_q + 2))


def composed_epsilon(*epsilons: float) -> float:
    return float(sum(epsilons))


def kv_length(n: int, qp: float) -> int:
    """
    :param n: the number of message bits.
    :param qp: the predicted QBER.
    :return: ceil(n / (1 − h(Qp))), the code-word length of the Shannon-ideal code.
    """
    if n < 0: raise ValueError('negative message length')
    _check_predicted(qp)
    return math.ceil(n / (1 - binary_entropy(qp)))


def consumed_key_rate(qp: float, q: float, accepted: bool = True) -> float:
    """
    :param qp: the predicted QBER.
    :param q: the real QBER.
    :param accepted: False if the authentication check failed.
    :return: pre-shared key bits consumed per message bit.
    """
    _check_predicted(qp)
    _check_qber(q)
    effective = q if accepted and q <= qp else 0.5
    return (1 - min_recycling_rate(effective)) / (1 - binary_entropy(qp))


def classical_otp_rate(q: float) -> float:
    """
    :param q: the error rate of a classical channel.
    :return: key bits consumed per message bit by a one-time pad protected by an ideal code.
    """
    _check_predicted(q)
    return 1 / (1 - binary_entropy(q))


def _rate(qp: float, q: float) -> float:
    return (1 - binary_entropy(qp)) - (1 - min_recycling_rate(q))


def qkr_rate(qp: float, q: float) -> float:
    """
    :param qp: the predicted QBER.
    :param q: the real QBER.
    :return: (message bits − consumed key bits) / qubits; negative values are allowed.
    """
    _check_qber(qp, closed=False)
    _check_qber(q)
    return _rate(qp, q)


def bb84_rate(q: float) -> float:
    _check_qber(q)
    return _rate(q, q)


def existing_qkr_rate(qp: float, q: float) -> Optional[float]:
    """
    :param qp: the predicted QBER.
    :param q: the real QBER.
    :return: the rate of conjugate-coding QKR with a fixed code for Qp, or None if the protocol fails (Q > Qp).
    """
    _check_qber(qp, closed=False)
    _check_qber(q)
    return _rate(qp, qp) if q <= qp else None


########################################  Distances  ########################################

def trace_distance(rho, sigma) -> float:
    """
    :return: ½ tr|rho − sigma|.
    """
    rho, sigma = hermitian(rho), hermitian(sigma)
    if rho.shape != sigma.shape: raise ValueError('dimension mismatch: {} vs {}'.format(rho.shape, sigma.shape))
    return float(np.abs(linalg.eigvalsh(rho - sigma)).sum() / 2)


def variational_distance(p: Sequence[float], q: Sequence[float]) -> float:
    """
    :return: ½ Σ|p − q|.
    """
    p, q = probability_vector(p), probability_vector(q)
    if p.shape != q.shape: raise ValueError('dimension mismatch: {} vs {}'.format(p.shape, q.shape))
    return float(np.abs(p - q).sum() / 2)


########################################  Curves  ########################################

class RateSample:
    def __init__(self, real_q: float, predicted_q: float, value: Optional[float]):
        """
        :param real_q: the real QBER.
        :param predicted_q: the predicted QBER the code was built for.
        :param value: the value of the curve; None where the protocol fails.
        """
        self.real_q = real_q
        self.predicted_q = predicted_q
        self.value = value


def q_grid(step: float = 0.005, upper: float = 0.5) -> List[float]:
    """
    :return: QBER values from 0 to upper inclusive.
    """
    count = int(round(upper / step))
    return [round(i * step, 12) for i in range(count + 1)]


def recycling_curve(grid: Sequence[float]) -> List[RateSample]:
    return [RateSample(q, q, min_recycling_rate(q)) for q in grid]


def consumption_curve(grid: Sequence[float]) -> List[RateSample]:
    # h(Qp) = 1 at 0.5
    return [RateSample(q, q, consumed_key_rate(q, q)) for q in grid if q < 0.5]


def rate_curve(grid: Sequence[float], qp: float) -> List[RateSample]:
    return [RateSample(q, qp, qkr_rate(qp, q)) for q in grid]


def existing_rate_curve(grid: Sequence[float], qp: float) -> List[RateSample]:
    return [RateSample(q, qp, existing_qkr_rate(qp, q)) for q in grid]
