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

import importlib.resources as pkg_resources
import itertools
import json
import logging
import math
from collections import deque
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from qkrlab import resources
from qkrlab.ratecore import kv_length
from qkrlab.struct import BitString

logger = logging.getLogger(__name__)

CODE_NAMES = ('hamming7-4', 'bch15-7', 'ideal')


class DecodeResult:
    def __init__(self, message: BitString, error_positions: Sequence[int], reliable: bool = True):
        """
        :param message: the decoded message bits.
        :param error_positions: the positions (in the received word) the decoder flipped.
        :param reliable: False if the decoder had to guess beyond its correction radius.
        """
        self.message = message
        self.error_positions = sorted(int(i) for i in error_positions)
        self.reliable = reliable

    @property
    def corrected_errors(self) -> int:
        """
        :return: q, the number of corrected errors.
        """
        return len(self.error_positions)

    def __repr__(self) -> str:
        return 'DecodeResult(q={}, positions={}, reliable={})'.format(self.corrected_errors, self.error_positions, self.reliable)


def _parity_rows(generator: Sequence[int], n: int, k: int) -> np.ndarray:
    """
    :param generator: the generator polynomial, highest degree first, of degree n − k.
    :return: the k × (n − k) parity part P of the systematic generator [I | P].
    """
    g = np.array(generator, dtype=np.uint8)
    if len(g) != n - k + 1 or g[0] != 1 or g[-1] != 1: raise ValueError('generator {} does not have degree {}'.format(list(generator), n - k))
    rows = []

    for i in range(k):
        # remainder of x^(n−1−i) divided by g(x)
        buf = np.zeros(n, dtype=np.uint8)
        buf[i] = 1
        for j in range(k):
            if buf[j]: buf[j:j + len(g)] ^= g
        rows.append(buf[k:])

    return np.array(rows, dtype=np.uint8)


class LinearCode:
    def __init__(self, name: str, parity: np.ndarray, min_distance: int):
        """
        A systematic binary linear block code with generator [I | P] and syndrome decoding.
        :param name: the name of the code.
        :param parity: the k × (n − k) parity part P.
        :param min_distance: the minimum Hamming distance d.
        """
        if min_distance < 1: raise ValueError('minimum distance must be positive')
        self.name = name
        self.message_bits, s = parity.shape
        self.codeword_bits = self.message_bits + s
        self.min_distance = min_distance
        self.generator = np.hstack([np.eye(self.message_bits, dtype=np.uint8), parity])
        self.parity_check = np.hstack([parity.T, np.eye(s, dtype=np.uint8)])
        self._weights = 1 << np.arange(s - 1, -1, -1)
        self.leaders, self.leader_weights = self._syndrome_table()

        measured = self.measured_distance()
        if measured != min_distance: raise ValueError('{} has minimum distance {}, not {}'.format(name, measured, min_distance))

    @property
    def radius(self) -> int:
        return (self.min_distance - 1) // 2

    def _syndrome_table(self) -> Tuple[np.ndarray, np.ndarray]:
        n, s = self.codeword_bits, self.codeword_bits - self.message_bits
        leaders = np.zeros((1 << s, n), dtype=np.uint8)
        weights = np.full(1 << s, -1, dtype=np.int64)
        remaining = 1 << s

        for w in range(n + 1):
            for support in itertools.combinations(range(n), w):
                e = np.zeros(n, dtype=np.uint8)
                e[list(support)] = 1
                syn = self.syndrome(e)
                if weights[syn] >= 0: continue
                leaders[syn] = e
                weights[syn] = w
                remaining -= 1
            if remaining == 0: break

        return leaders, weights

    def syndrome(self, word: BitString) -> Union[int, np.ndarray]:
        """
        :param word: a received word, or a matrix of words one per row.
        :return: the syndrome(s) as integers.
        """
        return (word.astype(np.int64) @ self.parity_check.T.astype(np.int64)) % 2 @ self._weights

    def measured_distance(self) -> int:
        messages = np.array(list(itertools.product((0, 1), repeat=self.message_bits)), dtype=np.int64)
        codewords = messages @ self.generator.astype(np.int64) % 2
        return int(codewords[1:].sum(axis=1).min())

    def encode(self, msg: BitString) -> BitString:
        if len(msg) != self.message_bits: raise ValueError('{} encodes {} bits, got {}'.format(self.name, self.message_bits, len(msg)))
        return self.encode_blocks(np.asarray(msg).reshape(1, -1))[0]

    def encode_blocks(self, blocks: np.ndarray) -> np.ndarray:
        return (blocks.astype(np.int64) @ self.generator.astype(np.int64) % 2).astype(np.uint8)

    def decode(self, word: BitString) -> DecodeResult:
        if len(word) != self.codeword_bits: raise ValueError('{} decodes {} bits, got {}'.format(self.name, self.codeword_bits, len(word)))
        messages, errors, reliable = self.decode_blocks(np.asarray(word).reshape(1, -1))
        return DecodeResult(messages[0], np.flatnonzero(errors[0]), bool(reliable[0]))

    def decode_blocks(self, words: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        :param words: received words, one per row.
        :return: (messages, error patterns, reliability flags), one per row.
        """
        syn = self.syndrome(words)
        errors = self.leaders[syn]
        corrected = words ^ errors
        return corrected[:, :self.message_bits], errors, self.leader_weights[syn] <= self.radius

    @classmethod
    def from_generator(cls, name: str, codeword_bits: int, message_bits: int, generator: Sequence[int], min_distance: int) -> 'LinearCode':
        return LinearCode(name, _parity_rows(generator, codeword_bits, message_bits), min_distance)


class InterleavedCode:
    def __init__(self, code: LinearCode, message_bits: int):
        """
        Applies a block code to an arbitrarily long message: the message is zero-padded to whole blocks,
        and bit i of block b is sent at position i·B + b so that a burst spreads over B blocks.
        :param code: the block code.
        :param message_bits: the length of the messages to encode.
        """
        self.code = code
        self.name = code.name
        self.message_bits = message_bits
        self.blocks = max(1, math.ceil(message_bits / code.message_bits))
        self.codeword_bits = self.blocks * code.codeword_bits
        self.max_correctable = self.blocks * code.radius

    def encode(self, msg: BitString) -> BitString:
        if len(msg) != self.message_bits: raise ValueError('expected {} message bits, got {}'.format(self.message_bits, len(msg)))
        padded = np.zeros(self.blocks * self.code.message_bits, dtype=np.uint8)
        padded[:len(msg)] = msg
        codewords = self.code.encode_blocks(padded.reshape(self.blocks, -1))
        return codewords.T.ravel()

    def decode(self, word: BitString) -> DecodeResult:
        if len(word) != self.codeword_bits: raise ValueError('expected {} code-word bits, got {}'.format(self.codeword_bits, len(word)))
        words = np.asarray(word, dtype=np.uint8).reshape(self.code.codeword_bits, self.blocks).T
        messages, errors, reliable = self.code.decode_blocks(words)
        positions = np.flatnonzero(errors.T.ravel())
        return DecodeResult(messages.ravel()[:self.message_bits], positions, bool(reliable.all()))


class IdealCode:
    def __init__(self, message_bits: int, qp: float, memory: int = 8):
        """
        Emulates a Shannon-ideal code of rate 1 − h(Qp): encoding is systematic, and decoding succeeds
        with the exact error count whenever the error fraction does not exceed Qp.
        :param message_bits: the length of the messages to encode.
        :param qp: the predicted QBER.
        :param memory: the number of recent code words the emulated decoder remembers.
        """
        self.name = 'ideal'
        self.message_bits = message_bits
        self.qp = qp
        self.codeword_bits, self.redundancy_bits = ideal_code_params(message_bits, qp)
        self.max_correctable = int(math.floor(qp * self.codeword_bits + 1e-9))
        self._sent = deque(maxlen=memory)

    def encode(self, msg: BitString) -> BitString:
        if len(msg) != self.message_bits: raise ValueError('expected {} message bits, got {}'.format(self.message_bits, len(msg)))
        # the redundancy content is irrelevant to the emulated decoder; repeat the message cyclically
        codeword = np.concatenate([msg, np.resize(msg, self.redundancy_bits)]).astype(np.uint8)
        self._sent.append(codeword)
        return codeword

    def decode(self, word: BitString) -> DecodeResult:
        if len(word) != self.codeword_bits: raise ValueError('expected {} code-word bits, got {}'.format(self.codeword_bits, len(word)))
        word = np.asarray(word, dtype=np.uint8)
        if not self._sent: return DecodeResult(word[:self.message_bits].copy(), [], False)

        diffs = [np.flatnonzero(word ^ c) for c in self._sent]
        i = int(np.argmin([len(d) for d in diffs]))
        if len(diffs[i]) <= self.max_correctable: return DecodeResult(self._sent[i][:self.message_bits].copy(), diffs[i])

        # a failed decoder outputs a wrong message; the MAC is the arbiter
        logger.debug('ideal decoder failed: %d errors > %d', len(diffs[i]), self.max_correctable)
        return DecodeResult(word[:self.message_bits].copy(), diffs[i], False)


Code = Union[LinearCode, InterleavedCode, IdealCode]


########################################  Functions  ########################################

def encode(code: Code, msg: BitString) -> BitString:
    """
    :param code: the error-correcting code.
    :param msg: the message.
    :return: the code word. A LinearCode word and the ideal code word start with the message verbatim;
             an InterleavedCode word is systematic per block only, since its blocks are interleaved bit by bit.
    """
    return code.encode(msg)


def decode(code: Code, word: BitString) -> DecodeResult:
    """
    Decoding beyond the correction radius is not an error: the result is flagged unreliable.
    :param code: the error-correcting code.
    :param word: the received word.
    :return: the decoded message, the corrected positions, and the reliability flag.
    """
    return code.decode(word)


def ideal_code_params(n: int, qp: float) -> Tuple[int, int]:
    """
    :param n: the number of message bits.
    :param qp: the predicted QBER.
    :return: (code-word bits, redundancy bits) of the Shannon-ideal code.
    """
    cw = kv_length(n, qp)
    return cw, cw - n


_REGISTRY: Optional[Dict[str, LinearCode]] = None


def block_codes() -> Dict[str, LinearCode]:
    """
    :return: the concrete codes declared in resources/codes.json, by name.
    """
    global _REGISTRY
    if _REGISTRY is None:
        d = json.load(pkg_resources.open_text(resources, 'codes.json'))
        _REGISTRY = {name: LinearCode.from_generator(name, v['codeword_bits'], v['message_bits'], v['generator'], v['min_distance'])
                     for name, v in d.items()}
    return _REGISTRY


def code_by_name(name: str, message_bits: int, qp: float = 0.0) -> Union[InterleavedCode, IdealCode]:
    """
    :param name: 'ideal' or one of the concrete codes.
    :param message_bits: the length of the messages to encode.
    :param qp: the predicted QBER (ideal code only).
    :return: a code for messages of the given length.
    """
    if name == 'ideal': return IdealCode(message_bits, qp)
    codes = block_codes()
    if name not in codes: raise ValueError('unknown code {}; use one of {}'.format(name, ', '.join(CODE_NAMES)))
    return InterleavedCode(codes[name], message_bits)


def code_names() -> List[str]:
    return list(block_codes()) + ['ideal']
