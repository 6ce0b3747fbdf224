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
from typing import Optional, Tuple, Union

import numpy as np

from qkrlab.struct import BitString, random_bits

logger = logging.getLogger(__name__)

Z, X = 0, 1
BASIS_NAMES = ('Z', 'X')
KETS = (('|0⟩', '|1⟩'), ('|+⟩', '|−⟩'))

EVE_KINDS = ('passive', 'intercept-z', 'intercept-x', 'intercept-random', 'replace')

# single-qubit states as column vectors, indexed by (basis, value)
_STATES = np.array([[[1, 0], [0, 1]],
                    [[1, 1], [1, -1]]], dtype=complex)
_STATES[X] /= np.sqrt(2)


class SimQubit:
    def __init__(self, basis: int, value: int):
        """
        One of the four conjugate-coding states.
        :param basis: Z (0) or X (1).
        :param value: the bit carried in that basis.
        """
        if basis not in (Z, X) or value not in (0, 1): raise ValueError('no qubit state for basis {} and value {}'.format(basis, value))
        self.basis = basis
        self.value = value

    def __eq__(self, other) -> bool:
        return isinstance(other, SimQubit) and self.basis == other.basis and self.value == other.value

    def __str__(self) -> str:
        return KETS[self.basis][self.value]

    def __repr__(self) -> str:
        return 'SimQubit({})'.format(self)


class Qubits:
    def __init__(self, bases: np.ndarray, values: np.ndarray):
        """
        A register of SimQubit states held as two parallel arrays.
        :param bases: the basis of each qubit (0 = Z, 1 = X).
        :param values: the value of each qubit within its basis.
        """
        if len(bases) != len(values): raise ValueError('{} bases for {} values'.format(len(bases), len(values)))
        self.bases = np.asarray(bases, dtype=np.uint8)
        self.values = np.asarray(values, dtype=np.uint8)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> SimQubit:
        return SimQubit(int(self.bases[i]), int(self.values[i]))

    def copy(self) -> 'Qubits':
        return Qubits(self.bases.copy(), self.values.copy())


def encode_qubits(bits: BitString, basis_bits: BitString) -> Qubits:
    """
    :param bits: the values to encode.
    :param basis_bits: 0 selects the Z basis, 1 the X basis.
    :return: the qubit register.
    """
    if len(bits) != len(basis_bits): raise ValueError('{} bits for {} basis bits'.format(len(bits), len(basis_bits)))
    return Qubits(np.array(basis_bits, dtype=np.uint8), np.array(bits, dtype=np.uint8))


def measure(q: SimQubit, basis: int, rng: np.random.Generator) -> int:
    """
    Measures a qubit; a mismatched basis yields a uniform bit and collapses the qubit onto it.
    """
    if q.basis != basis:
        q.basis = basis
        q.value = int(rng.integers(0, 2))
    return q.value


def measure_all(qs: Qubits, bases: BitString, rng: np.random.Generator) -> BitString:
    """
    :param qs: the register; collapsed in place.
    :param bases: the measurement basis of every qubit.
    :param rng: the generator for mismatched outcomes.
    :return: the outcomes.
    """
    if len(bases) != len(qs): raise ValueError('{} bases for {} qubits'.format(len(bases), len(qs)))
    bases = np.asarray(bases, dtype=np.uint8)
    mismatch = qs.bases != bases
    qs.values[mismatch] = random_bits(rng, int(mismatch.sum()))
    qs.bases[:] = bases
    return qs.values.copy()


def apply_noise(qs: Qubits, q: float, rng: np.random.Generator) -> Tuple[Qubits, int]:
    """
    Flips every qubit within its own basis independently with probability q (|+⟩ becomes |−⟩).
    :return: the register (modified in place) and the number of flips.
    """
    if not 0 <= q <= 0.5: raise ValueError('flip probability {} outside [0, 0.5]'.format(q))
    if q == 0: return qs, 0
    flips = rng.random(len(qs)) < q
    qs.values ^= flips.astype(np.uint8)
    return qs, int(flips.sum())


class EveStrategy:
    def __init__(self, kind: str = 'passive', rng: Optional[Union[np.random.Generator, int]] = None):
        """
        :param kind: passive, intercept-z, intercept-x, intercept-random or replace.
        :param rng: Eve's own random stream (or a seed for one).
        """
        if kind not in EVE_KINDS: raise ValueError('unknown Eve strategy {}; use one of {}'.format(kind, ', '.join(EVE_KINDS)))
        self.kind = kind
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    def __repr__(self) -> str:
        return 'EveStrategy({})'.format(self.kind)


class EveTranscript:
    def __init__(self, bases: Optional[BitString] = None, outcomes: Optional[BitString] = None):
        """
        :param bases: the bases Eve measured in (empty if she measured nothing).
        :param outcomes: her measurement outcomes.
        """
        self.bases = bases if bases is not None else np.zeros(0, dtype=np.uint8)
        self.outcomes = outcomes if outcomes is not None else np.zeros(0, dtype=np.uint8)


def eve_attack(strategy: EveStrategy, qs: Qubits) -> Tuple[Qubits, EveTranscript]:
    """
    :param strategy: what Eve does; she never sees the pre-shared keys.
    :param qs: the register leaving Alice.
    :return: the register forwarded to Bob and Eve's transcript.
    """
    kind, rng, n = strategy.kind, strategy.rng, len(qs)
    if kind == 'passive': return qs, EveTranscript()

    if kind == 'replace':
        fresh = Qubits(random_bits(rng, n), random_bits(rng, n))
        return fresh, EveTranscript()

    if kind == 'intercept-random':
        bases = random_bits(rng, n)
    else:
        bases = np.full(n, Z if kind == 'intercept-z' else X, dtype=np.uint8)

    outcomes = measure_all(qs, bases, rng)
    return qs, EveTranscript(bases, outcomes)


def transmit(qs: Qubits, q: float, eve: EveStrategy, rng: np.random.Generator) -> Tuple[Qubits, int]:
    """
    Sends a register over the channel: Eve acts first, then the channel noise.
    :return: the register reaching the receiver and the number of noise flips.
    """
    qs, _ = eve_attack(eve, qs.copy())
    return apply_noise(qs, q, rng)


def qber(sent: BitString, received: BitString) -> float:
    """
    :return: the fraction of positions where the received bits differ from the sent ones.
    """
    if len(sent) != len(received): raise ValueError('{} sent bits, {} received'.format(len(sent), len(received)))
    if len(sent) == 0: return 0.0
    return float(np.count_nonzero(np.asarray(sent) != np.asarray(received))) / len(sent)


########################################  Measurement statistics  ########################################

def random_measurement_operator(rng: np.random.Generator) -> np.ndarray:
    """
    :return: a 2×2 complex matrix with entries drawn uniformly from the unit disc.
    """
    radius = np.sqrt(rng.random((2, 2)))
    phase = rng.uniform(0, 2 * np.pi, (2, 2))
    return radius * np.exp(1j * phase)


def lemma1_residual(m: np.ndarray) -> float:
    """
    The outcome probabilities of an operator M summed over either basis both equal tr(M†M),
    so a measurement reveals nothing about the encoding basis.
    :param m: a 2×2 measurement operator.
    :return: |Σ_Z ⟨ψ|M†M|ψ⟩ − Σ_X ⟨ψ|M†M|ψ⟩|.
    """
    m = np.asarray(m, dtype=complex)
    if m.shape != (2, 2) or not np.all(np.isfinite(m)): raise ValueError('a measurement operator must be a finite 2×2 matrix')
    e = m.conj().T @ m
    p = np.einsum('bvi,ij,bvj->bv', _STATES.conj(), e, _STATES).real
    return float(abs(p[Z].sum() - p[X].sum()))
