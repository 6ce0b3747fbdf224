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
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from numpy.random import SeedSequence

from qkrlab.ecckit import CODE_NAMES, Code, DecodeResult, code_by_name, decode, encode
from qkrlab.hashkit import GF2n, MacParams, ToeplitzSeed, mac_tag, recycled_length, upd
from qkrlab.qchannel import EveStrategy, Qubits, encode_qubits, measure_all, qber, transmit
from qkrlab.ratecore import composed_epsilon, min_recycling_rate, response_leakage_bits, theorem1_bound
from qkrlab.struct import DIRECTIONS, BitString, KeyId, Ledger, PoolEmptyError, ProtocolDesyncError, QKRError, \
    RoundOutcome, SessionStats, bits_to_int, int_to_bits, random_bits, xor

logger = logging.getLogger(__name__)

KEY_KINDS = ('u', 'kv', 'kb', 'kv-new', 'kb-new', 'kv-seed', 'kb-seed')
SEED_KINDS = ('kv-seed', 'kb-seed')


########################################  Key pool  ########################################

class KeyPool:
    def __init__(self, seed: Union[int, SeedSequence], capacity: Optional[int] = None):
        """
        The pre-shared reservoir. Bits are picked up at an address (round, direction, kind), so two pools
        built from the same seed hand out identical bits for identical addresses.
        :param seed: the secret shared by both parties.
        :param capacity: the size of the reservoir in bits; unlimited if None.
        """
        self.seed = seed if isinstance(seed, SeedSequence) else SeedSequence(seed)
        self.capacity = capacity
        self.cursor = 0
        self.ledger = Ledger()

    @property
    def remaining(self) -> Optional[int]:
        return None if self.capacity is None else self.capacity - self.cursor

    def draw(self, length: int, key_id: KeyId) -> BitString:
        """
        :param length: the number of fresh bits.
        :param key_id: the address (round, direction, kind).
        :return: the bits; they count as recycled (held) until consumed or put on hold.
        """
        if length < 0: raise ValueError('cannot draw {} bits'.format(length))
        if length == 0: return np.zeros(0, dtype=np.uint8)
        if self.capacity is not None and self.cursor + length > self.capacity:
            raise PoolEmptyError('key pool exhausted: {} bits requested, {} left'.format(length, self.capacity - self.cursor))

        bits = self.peek(length, key_id)
        self.cursor += length
        self.ledger.drawn += length
        self.ledger.recycled += length
        return bits

    def peek(self, length: int, key_id: KeyId) -> BitString:
        """
        :return: the bits draw() would hand out at the address, without taking them from the pool.
        """
        r, d, kind = key_id
        address = SeedSequence(self.seed.entropy, spawn_key=tuple(self.seed.spawn_key) + (r, DIRECTIONS.index(d), KEY_KINDS.index(kind)))
        return random_bits(np.random.default_rng(address), length)

    def consume(self, length: int):
        self.ledger.recycled -= length
        self.ledger.consumed += length

    def hold(self, length: int):
        self.ledger.recycled -= length
        self.ledger.pending += length

    def release(self, length: int):
        self.ledger.pending -= length
        self.ledger.recycled += length

    def discard(self, length: int):
        self.ledger.pending -= length
        self.ledger.consumed += length


def pool_draw(pool: KeyPool, length: int, key_id: KeyId) -> Tuple[KeyId, BitString]:
    """
    :return: the address and the bits picked up there.
    """
    return key_id, pool.draw(length, key_id)


########################################  Configuration  ########################################

class SessionConfig:
    def __init__(self, n: int = 1024, t: int = 32, code: str = 'ideal', qp: float = 0.05,
                 epsilon_budget: float = 1e-6, seed: Union[int, SeedSequence, None] = None, pool_bits: Optional[int] = None):
        """
        :param n: the payload length in bits (feedback field included).
        :param t: the MAC tag length.
        :param code: 'ideal', 'hamming7-4' or 'bch15-7'.
        :param qp: the predicted QBER.
        :param epsilon_budget: the target security parameter; exceeding it is reported, not enforced.
        :param seed: the root of every random stream of the session.
        :param pool_bits: the capacity of the key pool; unlimited if None.
        """
        if n < 1 or t < 1: raise ValueError('n and t must be positive')
        GF2n(t)
        if not 0 <= qp < 0.5: raise ValueError('predicted QBER {} outside [0, 0.5)'.format(qp))
        if code not in CODE_NAMES: raise ValueError('unknown code {}; use one of {}'.format(code, ', '.join(CODE_NAMES)))
        if pool_bits is not None and pool_bits < 0: raise ValueError('pool size must be non-negative')
        self.n = n
        self.t = t
        self.code = code
        self.qp = qp
        self.epsilon_budget = epsilon_budget
        self.seed = seed
        self.pool_bits = pool_bits

    def build_code(self) -> Code:
        return code_by_name(self.code, self.n + self.t, self.qp)

    def streams(self) -> Dict[str, SeedSequence]:
        """
        :return: independent seed sequences for the key pool, channel noise, Eve, messages, and each party's measurements.
        """
        root = self.seed if isinstance(self.seed, SeedSequence) else SeedSequence(self.seed)
        root = SeedSequence(root.entropy, spawn_key=root.spawn_key)
        return dict(zip(('pool', 'noise', 'eve', 'messages', 'alice', 'bob'), root.spawn(6)))


class FrameLayout:
    def __init__(self, cfg: SessionConfig, code: Code):
        """
        Sizes of one round: payload = feedback field ∥ message, code input = payload ∥ tag.
        """
        self.payload_bits = cfg.n
        self.tag_bits = cfg.t
        self.codeword_bits = code.codeword_bits
        self.feedback_bits = feedback_width(code.codeword_bits)
        self.message_bits = cfg.n - self.feedback_bits
        if self.message_bits < 1: raise ValueError('payload of {} bits leaves no room next to a {}-bit feedback field'.format(cfg.n, self.feedback_bits))
        self.reject = (1 << self.feedback_bits) - 1
        self.mac = MacParams.for_message(cfg.n, cfg.t)
        self.max_q = code.max_correctable
        self.leak_bits = min(response_leakage_bits(self.max_q), self.codeword_bits)
        self.seed_bits = 2 * self.codeword_bits - 1


def feedback_width(codeword_bits: int) -> int:
    """
    :return: ceil(log₂(codeword_bits + 2)), wide enough for every q and the reject sentinel.
    """
    return math.ceil(math.log2(codeword_bits + 2))


class QuantumMessage:
    def __init__(self, qubits: Qubits, round_index: int, direction: str):
        """
        The only thing that travels between the parties.
        """
        self.qubits = qubits
        self.round_index = round_index
        self.direction = direction

    def __len__(self) -> int:
        return len(self.qubits)


########################################  Parties  ########################################

class Party:
    def __init__(self, name: str, cfg: SessionConfig, pool: KeyPool, code: Code, rng: Optional[np.random.Generator] = None):
        """
        One end of the protocol with its key slots: for each direction, the reusable keys u, k_v, k_b
        and the extractor seeds of k_v and k_b.
        :param name: 'alice' or 'bob'.
        :param cfg: the session configuration.
        :param pool: this party's copy of the pre-shared key pool.
        :param code: the error-correcting code.
        :param rng: the stream for measurements in a mismatched basis.
        """
        self.name = name
        self.cfg = cfg
        self.pool = pool
        self.code = code
        self.rng = rng if rng is not None else np.random.default_rng()
        self.layout = FrameLayout(cfg, code)

        self.slots: Dict[str, Dict[str, BitString]] = {d: dict() for d in DIRECTIONS}
        self.pending: Dict[int, BitString] = dict()
        self.feedback: Optional[int] = None
        self.u_rounds = {d: 0 for d in DIRECTIONS}
        self.u_refreshes = 0
        self.extractions: List[int] = []

        for d in DIRECTIONS:
            for kind in SEED_KINDS:
                self.slots[d][kind] = self.pool.draw(self.layout.seed_bits, (0, d, kind))

    def key(self, round_index: int, direction: str, kind: str, length: int) -> BitString:
        """
        :return: the key held in the slot, picked up fresh at (round, direction, kind) if the slot is empty.
        """
        slot = self.slots[direction]
        if kind not in slot: slot[kind] = self.pool.draw(length, (round_index, direction, kind))
        return slot[kind]

    def take(self, round_index: int, direction: str, kind: str, length: int) -> BitString:
        k = self.key(round_index, direction, kind, length)
        del self.slots[direction][kind]
        return k

    def seed(self, direction: str, kind: str) -> ToeplitzSeed:
        return ToeplitzSeed(self.slots[direction][kind])

    def auth_key(self, round_index: int, direction: str) -> BitString:
        """
        :return: u for this round; u is refreshed once the rounds it authenticated reach 2^t.
        """
        slot = self.slots[direction]
        if 'u' in slot and self.u_rounds[direction] >= 1 << self.cfg.t:
            self.pool.consume(len(slot.pop('u')))
            self.u_rounds[direction] = 0
            self.u_refreshes += 1
            logger.info('%s: fresh u for %s after %d rounds', self.name, direction, 1 << self.cfg.t)
        self.u_rounds[direction] += 1
        return self.key(round_index, direction, 'u', self.cfg.t)

    def update_kb(self, round_index: int, direction: str):
        """
        Passes k_b through the extractor, dropping the bits the q response may leak about it.
        """
        lay = self.layout
        kb = self.slots[direction]['kb']
        rate = (lay.codeword_bits - lay.leak_bits) / lay.codeword_bits
        self.slots[direction]['kb'] = self._upd(kb, rate, direction, 'kb-seed', (round_index, direction, 'kb-new'))

    def _upd(self, k: BitString, rate: float, direction: str, seed_kind: str, key_id: KeyId) -> BitString:
        self.extractions.append(recycled_length(rate, len(k)))
        return upd(k, rate, self.pool, self.seed(direction, seed_kind), key_id)

    def recycle_kv(self, k: BitString, q: int, round_index: int, direction: str) -> int:
        """
        :return: the number of k_v bits recycled for an accepted round with q corrected errors.
        """
        rate = kv_recycling_rate(q, self.layout.codeword_bits)
        self.slots[direction]['kv'] = self._upd(k, rate, direction, 'kv-seed', (round_index, direction, 'kv-new'))
        return recycled_length(rate, len(k))

    def audit(self) -> bool:
        """
        :return: True if the ledger balances and matches the keys actually held.
        """
        ledger = self.pool.ledger
        held = sum(len(k) for slot in self.slots.values() for k in slot.values())
        waiting = sum(len(k) for k in self.pending.values())
        return ledger.balanced and ledger.recycled == held and ledger.pending == waiting


def kv_recycling_rate(q: int, codeword_bits: int) -> float:
    """
    :return: the recycling rate of k_v for q errors corrected over a code word.
    """
    return min_recycling_rate(min(0.5, q / codeword_bits))


def direction_of(round_index: int) -> str:
    return DIRECTIONS[round_index % 2]


########################################  Rounds  ########################################

def alice_prepare(party: Party, round_index: int, msg: BitString, feedback: Optional[int] = None) -> QuantumMessage:
    """
    The sender's side of a round: authenticate, encode, encrypt with k_v and send in the bases of k_b.
    k_v waits for the receiver's q; u and k_b are recycled at once.
    :param party: the sender (Alice in even rounds, Bob in odd ones).
    :param round_index: the index of the round.
    :param msg: the message bits.
    :param feedback: q (or the reject sentinel) of the last round the sender received; None in round 0.
    :return: the quantum message.
    """
    lay, d = party.layout, direction_of(round_index)
    if len(msg) != lay.message_bits: raise ValueError('message of {} bits, expected {}'.format(len(msg), lay.message_bits))

    field = int_to_bits(feedback if feedback is not None else 0, lay.feedback_bits)
    payload = np.concatenate([field, msg]).astype(np.uint8)
    u = party.auth_key(round_index, d)
    tag = mac_tag(u, payload, lay.mac.max_blocks)
    c = encode(party.code, np.concatenate([payload, tag]).astype(np.uint8))

    kv = party.take(round_index, d, 'kv', lay.codeword_bits)
    kb = party.key(round_index, d, 'kb', lay.codeword_bits)
    qm = QuantumMessage(encode_qubits(xor(c, kv), kb), round_index, d)

    party.pending[round_index] = kv
    party.pool.hold(len(kv))
    party.update_kb(round_index, d)
    logger.debug('%s sends round %d (%s): %d qubits', party.name, round_index, d, len(qm))
    return qm


def bob_receive(party: Party, qm: QuantumMessage) -> RoundOutcome:
    """
    The receiver's side of a round: measure in the bases of k_b, decrypt with k_v, decode and check the MAC.
    Rejection is an outcome, never an exception.
    :param party: the receiver.
    :param qm: the quantum message; its qubits collapse onto the measurement outcomes.
    :return: the outcome with the receiver's ledger deltas.
    """
    lay, r, d = party.layout, qm.round_index, qm.direction
    if len(qm) != lay.codeword_bits: raise ValueError('{} qubits, expected {}'.format(len(qm), lay.codeword_bits))
    before = Ledger(**party.pool.ledger.__dict__)

    u = party.auth_key(r, d)
    recycled = 'kv' in party.slots[d]
    kv = party.take(r, d, 'kv', lay.codeword_bits)
    kb = party.key(r, d, 'kb', lay.codeword_bits)
    received = measure_all(qm.qubits, kb, party.rng)
    result, accepted = _open(party, received, kv, u)

    # a sender that lost the feedback on its last k_v in this direction encrypts with fresh bits at (r, d, 'kv')
    stale = None
    if not accepted and recycled:
        retry, accepted = _open(party, received, party.pool.peek(lay.codeword_bits, (r, d, 'kv')), u)
        if accepted:
            stale, kv, result = kv, party.pool.draw(lay.codeword_bits, (r, d, 'kv')), retry
            party.pool.consume(len(stale))
            logger.debug('%s opens round %d (%s) with a fresh k_v; the recycled one is dropped', party.name, r, d)
    party.update_kb(r, d)

    q = result.corrected_errors
    payload = result.message[:lay.payload_bits]
    outcome = RoundOutcome(r, d, accepted, q, lay.codeword_bits, lay.payload_bits, recovered_message=payload[lay.feedback_bits:])
    outcome.kv_bits = len(kv)

    if accepted:
        outcome.kv_recycled = party.recycle_kv(kv, q, r, d)
        outcome.kv_consumed = len(kv) - outcome.kv_recycled + (len(stale) if stale is not None else 0)
        outcome.feedback_q = q
        if r > 0: apply_feedback(party, r - 1, bits_to_int(payload[:lay.feedback_bits]))
    else:
        party.pool.consume(len(kv))
        outcome.kv_consumed = len(kv)
        outcome.feedback_q = lay.reject
        # the feedback this round carried is unreadable
        stale = party.pending.pop(r - 1, None)
        if stale is not None: party.pool.discard(len(stale))
        logger.debug('%s rejects round %d (%s): q = %d, reliable = %s', party.name, r, d, q, result.reliable)

    party.feedback = outcome.feedback_q
    after = party.pool.ledger
    outcome.consumed_bits = after.consumed - before.consumed
    outcome.recycled_bits = after.recycled - before.recycled
    outcome.pending_bits = after.pending - before.pending
    return outcome


def _open(party: Party, received: BitString, kv: BitString, u: BitString) -> Tuple[DecodeResult, bool]:
    """
    :return: the decoded word under the given k_v and whether its tag verifies.
    """
    lay = party.layout
    result = decode(party.code, xor(received, kv))
    payload, tag = result.message[:lay.payload_bits], result.message[lay.payload_bits:]
    return result, bool(np.array_equal(mac_tag(u, payload, lay.mac.max_blocks), tag))


def apply_feedback(party: Party, round_index: int, q: int):
    """
    Resolves the k_v the party sent in the given round, using the same extractor seed, rate and fresh bits as the receiver.
    :param party: the sender of that round.
    :param round_index: the round the feedback refers to.
    :param q: the receiver's error count, or the reject sentinel.
    """
    kv = party.pending.pop(round_index, None)
    if kv is None: raise ProtocolDesyncError('{}: feedback for round {} without a pending k_v'.format(party.name, round_index))
    d = direction_of(round_index)
    party.pool.release(len(kv))

    if q == party.layout.reject:
        party.pool.consume(len(kv))
        logger.debug('%s discards k_v of round %d', party.name, round_index)
    elif q > party.layout.codeword_bits:
        party.pool.consume(len(kv))
        logger.warning('%s: feedback q = %d for round %d exceeds the code-word length; k_v discarded', party.name, q, round_index)
    else:
        party.recycle_kv(kv, q, round_index, d)


########################################  Sessions  ########################################

class Session:
    def __init__(self, cfg: SessionConfig, channel_q: float = 0.0, eve: Union[str, EveStrategy] = 'passive', index: int = 0):
        """
        Alice and Bob with synchronized key pools, and the channel between them.
        :param cfg: the session configuration.
        :param channel_q: the flip probability of the channel noise.
        :param eve: the adversary, or the name of a strategy.
        :param index: the index of the session in a run.
        """
        streams = cfg.streams()
        code = cfg.build_code()
        self.cfg = cfg
        self.index = index
        self.channel_q = channel_q
        self.eve = eve if isinstance(eve, EveStrategy) else EveStrategy(eve, np.random.default_rng(streams['eve']))
        self.noise_rng = np.random.default_rng(streams['noise'])
        self.message_rng = np.random.default_rng(streams['messages'])
        self.alice = Party('alice', cfg, KeyPool(streams['pool'], cfg.pool_bits), code, np.random.default_rng(streams['alice']))
        self.bob = Party('bob', cfg, KeyPool(streams['pool'], cfg.pool_bits), code, np.random.default_rng(streams['bob']))
        self.stats = SessionStats(index)

    @property
    def parties(self) -> Tuple[Party, Party]:
        return self.alice, self.bob

    def sender(self, round_index: int) -> Party:
        return self.alice if round_index % 2 == 0 else self.bob

    def receiver(self, round_index: int) -> Party:
        return self.bob if round_index % 2 == 0 else self.alice

    def step(self, round_index: int) -> RoundOutcome:
        sender, receiver = self.sender(round_index), self.receiver(round_index)
        msg = random_bits(self.message_rng, sender.layout.message_bits)
        qm = alice_prepare(sender, round_index, msg, sender.feedback)

        sent = qm.qubits.copy()
        qm.qubits, _ = transmit(qm.qubits, self.channel_q, self.eve, self.noise_rng)
        outcome = bob_receive(receiver, qm)
        outcome.session = self.index
        outcome.qber = qber(sent.values, qm.qubits.values)
        return outcome

    def in_sync(self, round_index: int) -> bool:
        """
        :return: True if both parties hold identical u, k_b and seeds, and no conflicting k_v for the direction whose feedback is complete.
                 A k_v held by the receiver alone is the one the sender dropped on a reject; the next round opens with fresh bits.
        """
        for d in DIRECTIONS:
            for kind in ('u', 'kb') + SEED_KINDS:
                a, b = self.alice.slots[d].get(kind), self.bob.slots[d].get(kind)
                if (a is None) != (b is None) or (a is not None and not np.array_equal(a, b)): return False
            if round_index > 0 and d == direction_of(round_index - 1):
                a, b = self.alice.slots[d].get('kv'), self.bob.slots[d].get('kv')
                if a is not None and b is not None and not np.array_equal(a, b): return False
        return True

    def run(self, rounds: int) -> SessionStats:
        """
        :param rounds: the number of rounds; even rounds go from Alice to Bob, odd rounds back.
        :return: the statistics, partial if the key pool ran out.
        """
        stats = self.stats
        try:
            for r in range(rounds):
                stats.outcomes.append(self.step(r))
                if not self.in_sync(r):
                    stats.desync_events += 1
                    logger.warning('session %d: parties out of sync after round %d', self.index, r)
                for p in self.parties:
                    if not p.audit(): raise QKRError('{}: key ledger does not balance after round {}: {}'.format(p.name, r, p.pool.ledger))
        except PoolEmptyError as e:
            stats.aborted = str(e)
            logger.warning('session %d aborted after %d rounds: %s', self.index, stats.rounds, e)

        self.tally()
        logger.info('session %d: %d rounds, accept rate %.4f, k_v recycling rate %.4f', self.index, stats.rounds, stats.accept_rate, stats.kv_recycling_rate)
        return stats

    def tally(self):
        stats, lay = self.stats, self.bob.layout
        stats.ledgers = {p.name: Ledger(**p.pool.ledger.__dict__) for p in self.parties}
        stats.theorem1_bound = max(theorem1_bound(1 << self.cfg.t, min(n, 1 << self.cfg.t)) for n in self.bob.u_rounds.values())
        stats.theorem2_bits = lay.leak_bits * stats.rounds
        extractor = [2.0 ** -m for p in self.parties for m in p.extractions if m > 0]
        stats.epsilon = composed_epsilon(lay.mac.epsilon * stats.rounds, *extractor)
        if stats.epsilon > self.cfg.epsilon_budget:
            logger.info('session %d: composed epsilon %.3g exceeds the budget %.3g', self.index, stats.epsilon, self.cfg.epsilon_budget)


def run_session(cfg: SessionConfig, channel_q: float = 0.0, eve: Union[str, EveStrategy] = 'passive', rounds: int = 10, index: int = 0) -> SessionStats:
    """
    :param cfg: the session configuration.
    :param channel_q: the flip probability of the channel noise.
    :param eve: the adversary, or the name of a strategy.
    :param rounds: the number of rounds.
    :param index: the index of the session in a run.
    :return: the statistics of the session.
    """
    return Session(cfg, channel_q, eve, index).run(rounds)
