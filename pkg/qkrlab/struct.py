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

import json
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

BitString = np.ndarray

DIRECTIONS = ('AB', 'BA')

# pool address of a key: (round, direction, kind)
KeyId = Tuple[int, str, str]


########################################  Errors  ########################################

class QKRError(Exception):
    pass


class SingularConfigurationError(QKRError, ValueError):
    pass


class PoolEmptyError(QKRError):
    pass


class ProtocolDesyncError(QKRError):
    pass


class OptimizerError(QKRError, ArithmeticError):
    pass


########################################  Bit strings  ########################################

def bitstring(values: Iterable[int]) -> BitString:
    """
    :param values: an iterable of 0/1 values.
    :return: the values as a bit string (uint8 array).
    """
    if not isinstance(values, np.ndarray): values = list(values)
    b = np.asarray(values, dtype=np.uint8)
    if b.ndim != 1: raise ValueError('a bit string must be one-dimensional')
    if b.size and b.max() > 1: raise ValueError('a bit string may only hold 0 and 1')
    return b


def xor(a: BitString, b: BitString) -> BitString:
    """
    :param a: the first bit string.
    :param b: the second bit string of the same length.
    :return: a ⊕ b.
    """
    if len(a) != len(b): raise ValueError('XOR of bit strings of lengths {} and {}'.format(len(a), len(b)))
    return np.bitwise_xor(a, b).astype(np.uint8)


def int_to_bits(value: int, width: int) -> BitString:
    """
    :param value: a non-negative integer below 2^width.
    :param width: the number of bits.
    :return: the big-endian bit string of the value.
    """
    if value < 0 or value >> width: raise ValueError('{} does not fit in {} bits'.format(value, width))
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_int(bits: BitString) -> int:
    """
    :param bits: a big-endian bit string.
    :return: the integer it encodes.
    """
    value = 0
    for b in bits: value = (value << 1) | int(b)
    return value


def random_bits(rng: np.random.Generator, length: int) -> BitString:
    return rng.integers(0, 2, size=length, dtype=np.uint8)


def hamming_distance(a: BitString, b: BitString) -> int:
    return int(np.count_nonzero(xor(a, b)))


def _jsonable(x):
    if isinstance(x, np.ndarray): return x.tolist()
    if isinstance(x, np.generic): return x.item()
    return x.__dict__


########################################  Ledger  ########################################

class Ledger:
    def __init__(self, drawn: int = 0, consumed: int = 0, recycled: int = 0, pending: int = 0):
        """
        Bit accounting of a key pool; every drawn bit is consumed, recycled (held for reuse), or pending.
        :param drawn: fresh bits picked up from the pool.
        :param consumed: bits destroyed (never reused).
        :param recycled: bits currently held for reuse.
        :param pending: bits waiting for the peer's feedback.
        """
        self.drawn = drawn
        self.consumed = consumed
        self.recycled = recycled
        self.pending = pending

    @property
    def balanced(self) -> bool:
        return self.drawn == self.consumed + self.recycled + self.pending

    def __eq__(self, other) -> bool:
        return isinstance(other, Ledger) and self.__dict__ == other.__dict__

    def __repr__(self) -> str:
        return 'Ledger(drawn={drawn}, consumed={consumed}, recycled={recycled}, pending={pending})'.format(**self.__dict__)

    @classmethod
    def factory(cls, d: Dict) -> 'Ledger':
        return Ledger(d['drawn'], d['consumed'], d['recycled'], d['pending'])


########################################  Records  ########################################

class RoundOutcome:
    # columns of the per-round transcript, in order
    FIELDS = ('session', 'round', 'direction', 'accepted', 'q', 'qber', 'codeword_bits', 'message_bits',
              'kv_bits', 'kv_recycled', 'kv_consumed', 'consumed_bits', 'recycled_bits', 'pending_bits')

    def __init__(self, round_index: int, direction: str, accepted: bool, q: int, codeword_bits: int, message_bits: int,
                 recovered_message: Optional[BitString] = None, feedback_q: Optional[int] = None):
        """
        :param round_index: the index of the round in its session.
        :param direction: 'AB' (Alice to Bob) or 'BA' (Bob to Alice).
        :param accepted: True if the MAC check passed.
        :param q: the number of errors corrected by the decoder.
        :param codeword_bits: the length of the transmitted code word.
        :param message_bits: the length of the authenticated payload.
        :param recovered_message: the message the receiver decoded (without the feedback field).
        :param feedback_q: the value to be carried in the next reverse-direction round.
        """
        self.session = 0
        self.round = round_index
        self.direction = direction
        self.accepted = accepted
        self.q = q
        self.qber = 0.0
        self.codeword_bits = codeword_bits
        self.message_bits = message_bits
        self.recovered_message = recovered_message if recovered_message is not None else np.zeros(0, dtype=np.uint8)
        self.feedback_q = feedback_q

        # ledger deltas of the receiver
        self.kv_bits = 0
        self.kv_recycled = 0
        self.kv_consumed = 0
        self.consumed_bits = 0
        self.recycled_bits = 0
        self.pending_bits = 0

    @property
    def kv_recycling_rate(self) -> float:
        return self.kv_recycled / self.kv_bits if self.kv_bits else 0.0

    def record(self) -> Dict:
        """
        :return: the transcript record of this round.
        """
        return {k: getattr(self, k) for k in self.FIELDS}

    def json_dumps(self, **kwargs) -> str:
        return json.dumps(self, default=_jsonable, **kwargs)

    @classmethod
    def factory(cls, d: Dict) -> 'RoundOutcome':
        o = RoundOutcome(d['round'], d['direction'], d['accepted'], d['q'], d['codeword_bits'], d['message_bits'])
        for k, v in d.items():
            if k == 'recovered_message': v = np.array(v, dtype=np.uint8)
            o.__dict__[k] = v
        return o


class SessionStats:
    def __init__(self, session: int, outcomes: Optional[List[RoundOutcome]] = None):
        """
        :param session: the index of the session.
        :param outcomes: the outcomes of the rounds in order.
        """
        self.session = session
        self.outcomes: List[RoundOutcome] = outcomes if outcomes is not None else []
        self.ledgers: Dict[str, Ledger] = dict()
        self.aborted: Optional[str] = None
        self.desync_events = 0
        self.theorem1_bound = 0.0
        self.theorem2_bits = 0
        self.epsilon = 0.0

    @property
    def rounds(self) -> int:
        return len(self.outcomes)

    @property
    def accept_rate(self) -> float:
        return _mean([o.accepted for o in self.outcomes])

    @property
    def mean_q(self) -> float:
        return _mean([o.q for o in self.outcomes])

    @property
    def mean_qber(self) -> float:
        return _mean([o.qber for o in self.outcomes])

    @property
    def kv_recycling_rate(self) -> float:
        return _mean([o.kv_recycling_rate for o in self.outcomes])

    @property
    def consumed_key_rate(self) -> float:
        """
        :return: k_v bits consumed per payload bit over all rounds.
        """
        bits = sum(o.message_bits for o in self.outcomes)
        return sum(o.kv_consumed for o in self.outcomes) / bits if bits else 0.0

    def records(self) -> Iterable[Dict]:
        for o in self.outcomes:
            o.session = self.session
            yield o.record()

    def json_dumps(self, **kwargs) -> str:
        return json.dumps(self, default=_jsonable, **kwargs)

    @classmethod
    def factory(cls, d: Dict) -> 'SessionStats':
        stats = SessionStats(d['session'])
        for k, v in d.items():
            if k == 'outcomes':
                v = [RoundOutcome.factory(o) for o in v]
            elif k == 'ledgers':
                v = {name: Ledger.factory(l) for name, l in v.items()}
            stats.__dict__[k] = v
        return stats


def summarize(stats: Sequence[SessionStats]) -> Dict[str, float]:
    """
    :param stats: per-session statistics.
    :return: the aggregate over all rounds of all sessions.
    """
    outcomes = [o for s in stats for o in s.outcomes]
    bits = sum(o.message_bits for o in outcomes)
    return {
        'sessions': len(stats),
        'rounds': len(outcomes),
        'aborted_sessions': sum(1 for s in stats if s.aborted),
        'accept_rate': _mean([o.accepted for o in outcomes]),
        'mean_q': _mean([o.q for o in outcomes]),
        'mean_qber': _mean([o.qber for o in outcomes]),
        'kv_recycling_rate': _mean([o.kv_recycling_rate for o in outcomes]),
        'consumed_key_rate': sum(o.kv_consumed for o in outcomes) / bits if bits else 0.0,
        'desync_events': sum(s.desync_events for s in stats),
        'theorem1_bound': max((s.theorem1_bound for s in stats), default=0.0),
        'theorem2_bits': sum(s.theorem2_bits for s in stats),
        'epsilon': max((s.epsilon for s in stats), default=0.0),
    }


def _mean(values: Sequence) -> float:
    return float(np.mean(values)) if len(values) else 0.0
