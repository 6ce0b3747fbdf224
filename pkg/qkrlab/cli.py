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

import argparse
import csv
import importlib.resources as pkg_resources
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from numpy.random import SeedSequence

from qkrlab import ratecore, resources
from qkrlab.ecckit import CODE_NAMES
from qkrlab.protocol import SessionConfig, run_session
from qkrlab.qchannel import EVE_KINDS
from qkrlab.struct import RoundOutcome, SessionStats, summarize
from qkrlab.verify import SUITES, run_suites

logger = logging.getLogger(__name__)

COMMANDS = ('rates', 'simulate', 'verify')

FIG1_HEADER = ('Q', 'recycling_rate')
FIG2_HEADER = ('Q', 'classical_otp_noiseless', 'classical_otp_noisy', 'qkr_consumed')
FIG3_HEADER = ('Q', 'qkr_rate_at_Qp', 'existing_qkr_at_Qp', 'bb84_rate')


class RunConfig:
    KEYS = ('n', 't', 'code', 'qber', 'predicted_qber', 'eve', 'rounds', 'sessions', 'seed', 'out', 'qp', 'suite', 'workers', 'pool_bits')

    def __init__(self, command: str, settings: Dict):
        """
        :param command: rates, simulate or verify.
        :param settings: a value for every key in KEYS.
        """
        if command not in COMMANDS: raise ValueError('unknown command {}'.format(command))
        missing = [k for k in self.KEYS if k not in settings]
        if missing: raise ValueError('missing setting(s): {}'.format(', '.join(missing)))
        self.command = command
        for k in self.KEYS: setattr(self, k, settings[k])

    def validate(self):
        def check(ok: bool, key: str, expected: str):
            if not ok: raise ValueError('{} = {!r} is invalid; expected {}'.format(key, getattr(self, key), expected))

        if self.command == 'simulate':
            check(isinstance(self.n, int) and self.n >= 1, 'n', 'a positive integer')
            check(isinstance(self.t, int) and self.t >= 1, 't', 'a positive integer')
            check(self.code in CODE_NAMES, 'code', 'one of ' + ', '.join(CODE_NAMES))
            check(0 <= self.qber <= 0.5, 'qber', 'a value in [0, 0.5]')
            check(0 <= self.predicted_qber < 0.5, 'predicted_qber', 'a value in [0, 0.5)')
            check(self.eve in EVE_KINDS, 'eve', 'one of ' + ', '.join(EVE_KINDS))
            check(isinstance(self.rounds, int) and self.rounds >= 0, 'rounds', 'a non-negative integer')
            check(isinstance(self.sessions, int) and self.sessions >= 1, 'sessions', 'a positive integer')
            check(isinstance(self.seed, int) and self.seed >= 0, 'seed', 'a non-negative integer (simulate is always seeded)')
            check(isinstance(self.workers, int) and self.workers >= 1, 'workers', 'a positive integer')
            check(self.pool_bits is None or (isinstance(self.pool_bits, int) and self.pool_bits >= 0), 'pool_bits', 'a non-negative integer or null')
        elif self.command == 'rates':
            check(0 <= self.qp < 0.5, 'qp', 'a value in [0, 0.5)')
        else:
            check(self.suite == 'all' or self.suite in SUITES, 'suite', 'all or one of ' + ', '.join(SUITES))

    def session_configs(self) -> List[SessionConfig]:
        """
        :return: one configuration per session, each with its own seed spawned from the run seed.
        """
        return [SessionConfig(self.n, self.t, self.code, self.predicted_qber, seed=s, pool_bits=self.pool_bits)
                for s in SeedSequence(self.seed).spawn(self.sessions)]

    def settings(self) -> Dict:
        return {k: getattr(self, k) for k in self.KEYS}

    def json_dumps(self, **kwargs) -> str:
        return json.dumps(self.settings(), **kwargs)

    @classmethod
    def load(cls, command: str, config_file: Optional[str] = None, overrides: Optional[Dict] = None) -> 'RunConfig':
        """
        :param command: the command.
        :param config_file: a JSON file of key-value settings overriding the defaults.
        :param overrides: settings given on the command line; None values are ignored.
        :return: the effective configuration.
        """
        settings = json.load(pkg_resources.open_text(resources, 'defaults.json'))
        if config_file:
            with open(config_file) as fin: d = json.load(fin)
            unknown = [k for k in d if k not in cls.KEYS]
            if unknown: raise ValueError('unknown setting(s) in {}: {}'.format(config_file, ', '.join(unknown)))
            settings.update(d)
        if overrides: settings.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig(command, settings)


########################################  Output  ########################################

def _cell(v) -> str:
    if v is None: return ''
    if isinstance(v, bool): return '1' if v else '0'
    if isinstance(v, float): return '{:.9g}'.format(v)
    return str(v)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]):
    with open(path, 'w', encoding='utf-8', newline='') as fout:
        writer = csv.writer(fout, lineterminator='\n')
        writer.writerow(header)
        for row in rows: writer.writerow([_cell(v) for v in row])


def fig1_rows(grid: Sequence[float]) -> List[Tuple]:
    return [(s.real_q, s.value) for s in ratecore.recycling_curve(grid)]


def fig2_rows(grid: Sequence[float]) -> List[Tuple]:
    return [(s.real_q, 1.0, ratecore.classical_otp_rate(s.real_q), s.value) for s in ratecore.consumption_curve(grid)]


def fig3_rows(grid: Sequence[float], qp: float) -> List[Tuple]:
    ours, existing = ratecore.rate_curve(grid, qp), ratecore.existing_rate_curve(grid, qp)
    return [(a.real_q, a.value, b.value, ratecore.bb84_rate(a.real_q)) for a, b in zip(ours, existing)]


########################################  Commands  ########################################

def cmd_rates(cfg: RunConfig) -> List[str]:
    """
    Writes the analytic curves: recycling rate, consumed-key rate, and rates against BB84.
    :return: the paths written.
    """
    grid = ratecore.q_grid()
    os.makedirs(cfg.out, exist_ok=True)
    files = [('fig1.csv', FIG1_HEADER, fig1_rows(grid)),
             ('fig2.csv', FIG2_HEADER, fig2_rows(grid)),
             ('fig3.csv', FIG3_HEADER, fig3_rows(grid, cfg.qp))]
    paths = []

    for filename, header, rows in files:
        path = os.path.join(cfg.out, filename)
        write_csv(path, header, rows)
        paths.append(path)
        logger.info('%s: %d rows', path, len(rows))

    return paths


def _simulate(args: Tuple[int, SessionConfig, float, str, int]) -> SessionStats:
    index, session_cfg, qber, eve, rounds = args
    return run_session(session_cfg, qber, eve, rounds, index)


def cmd_simulate(cfg: RunConfig) -> Dict:
    """
    Runs independent sessions and writes transcript.csv and summary.json.
    :return: the summary.
    """
    jobs = [(i, c, cfg.qber, cfg.eve, cfg.rounds) for i, c in enumerate(cfg.session_configs())]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as executor:
            stats = list(executor.map(_simulate, jobs))
    else:
        stats = [_simulate(job) for job in jobs]

    for s in stats:
        if s.aborted: print('session {} aborted after {} rounds: {}'.format(s.session, s.rounds, s.aborted))

    summary = summarize(stats)
    summary['analytic'] = {
        'kv_recycling_rate': ratecore.min_recycling_rate(cfg.qber) if cfg.qber <= cfg.predicted_qber else 0.0,
        'consumed_key_rate': ratecore.consumed_key_rate(cfg.predicted_qber, cfg.qber),
    }
    summary['config'] = cfg.settings()

    os.makedirs(cfg.out, exist_ok=True)
    write_csv(os.path.join(cfg.out, 'transcript.csv'), RoundOutcome.FIELDS,
              ([r[k] for k in RoundOutcome.FIELDS] for s in stats for r in s.records()))
    with open(os.path.join(cfg.out, 'summary.json'), 'w', encoding='utf-8', newline='\n') as fout:
        fout.write(json.dumps(summary, indent=2) + '\n')
    return summary


def cmd_verify(cfg: RunConfig) -> int:
    """
    Runs the property suites and prints one verdict per suite.
    :return: 0 if every suite passed, 1 otherwise.
    """
    results = run_suites(None if cfg.suite == 'all' else [cfg.suite])
    for res in results: print(res)
    failed = [res.name for res in results if not res.passed]
    print('{} of {} suites passed'.format(len(results) - len(failed), len(results)))
    return 1 if failed else 0


########################################  Main  ########################################

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Quantum Key Recycling Lab')
    commands = parser.add_subparsers(dest='command', required=True)

    def common(p: argparse.ArgumentParser):
        p.add_argument('--config', type=str, default=None, help='the path to a JSON file of settings')
        p.add_argument('--show-config', action='store_true', help='print the effective settings and exit')
        p.add_argument('-v', '--verbose', action='count', default=0, help='-v for progress, -vv for per-round details')

    p = commands.add_parser('rates', help='write the analytic curves as CSV')
    p.add_argument('--qp', type=float, default=None, help='the predicted QBER of the comparison curves')
    p.add_argument('--out', type=str, default=None, help='the output directory')
    common(p)

    p = commands.add_parser('simulate', help='run protocol sessions and write a transcript')
    p.add_argument('--n', type=int, default=None, help='the payload length in bits')
    p.add_argument('--t', type=int, default=None, help='the MAC tag length in bits')
    p.add_argument('--code', type=str, default=None, choices=CODE_NAMES, help='the error-correcting code')
    p.add_argument('--qber', type=float, default=None, help='the flip probability of the channel')
    p.add_argument('--predicted-qber', type=float, default=None, help='the QBER the code is built for')
    p.add_argument('--eve', type=str, default=None, choices=EVE_KINDS, help='the adversary')
    p.add_argument('--rounds', type=int, default=None, help='the number of rounds per session')
    p.add_argument('--sessions', type=int, default=None, help='the number of sessions')
    p.add_argument('--seed', type=int, default=None, help='the seed of the run')
    p.add_argument('--out', type=str, default=None, help='the output directory')
    p.add_argument('--workers', type=int, default=None, help='the number of processes running sessions')
    p.add_argument('--pool-bits', type=int, default=None, help='the capacity of the key pool in bits')
    common(p)

    p = commands.add_parser('verify', help='run the property suites')
    p.add_argument('--suite', type=str, default=None, help='all, or one of: ' + ', '.join(SUITES))
    common(p)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')

    overrides = {k: v for k, v in vars(args).items() if k in RunConfig.KEYS}
    try:
        cfg = RunConfig.load(args.command, args.config, overrides)
        if args.show_config:
            print(cfg.json_dumps(indent=2))
            return 0
        cfg.validate()
    except (ValueError, OSError) as e:
        parser.error(str(e))

    try:
        if cfg.command == 'rates':
            for path in cmd_rates(cfg): print(path)
        elif cfg.command == 'simulate':
            summary = cmd_simulate(cfg)
            print(json.dumps({k: v for k, v in summary.items() if k != 'config'}, indent=2))
        else:
            return cmd_verify(cfg)
    except OSError as e:
        print('cannot write to {}: {}'.format(cfg.out, e), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
