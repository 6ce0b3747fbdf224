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

import contextlib
import csv
import io
import json
import os
import tempfile
import unittest

from qkrlab.cli import FIG1_HEADER, FIG2_HEADER, FIG3_HEADER, RunConfig, cmd_rates, main
from qkrlab.ratecore import binary_entropy


def read_csv(path: str):
    with open(path, encoding='utf-8') as fin:
        rows = list(csv.reader(fin))
    return rows[0], rows[1:]


def quiet_main(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue()


class TestRunConfig(unittest.TestCase):
    def test_defaults(self):
        cfg = RunConfig.load('simulate', overrides={'n': 64, 'seed': None})
        self.assertEqual((64, 32, 'ideal', None), (cfg.n, cfg.t, cfg.code, cfg.seed))
        self.assertRaises(ValueError, cfg.validate)
        cfg.seed = 3
        cfg.validate()

        cfg = RunConfig.load('verify', overrides={'suite': 'nothing'})
        self.assertRaises(ValueError, cfg.validate)
        self.assertRaises(ValueError, RunConfig, 'plot', cfg.settings())

    def test_config_file(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'run.json')
            with open(path, 'w') as fout: json.dump({'rounds': 7, 'seed': 5}, fout)
            cfg = RunConfig.load('simulate', path, {'rounds': 9, 'seed': None})
            self.assertEqual((9, 5), (cfg.rounds, cfg.seed))

            with open(path, 'w') as fout: json.dump({'rounds': 7, 'colour': 'red'}, fout)
            self.assertRaises(ValueError, RunConfig.load, 'simulate', path)

    def test_session_configs(self):
        cfg = RunConfig.load('simulate', overrides={'seed': 1, 'sessions': 3})
        a, b = cfg.session_configs(), cfg.session_configs()
        self.assertEqual(3, len(a))
        self.assertEqual([c.seed.spawn_key for c in a], [c.seed.spawn_key for c in b])
        self.assertEqual(3, len({c.seed.spawn_key for c in a}))


class TestRates(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.dir = tempfile.TemporaryDirectory()
        cmd_rates(RunConfig.load('rates', overrides={'out': cls.dir.name, 'qp': 0.07}))

    @classmethod
    def tearDownClass(cls):
        cls.dir.cleanup()

    def test_recycling(self):
        header, rows = read_csv(os.path.join(self.dir.name, 'fig1.csv'))
        self.assertEqual(list(FIG1_HEADER), header)
        self.assertEqual(101, len(rows))
        self.assertEqual(('0', 1.0), (rows[0][0], float(rows[0][1])))
        for q, r in rows: self.assertLess(abs(float(r) - (1 - binary_entropy(float(q)))), 1e-6)

    def test_consumption(self):
        header, rows = read_csv(os.path.join(self.dir.name, 'fig2.csv'))
        self.assertEqual(list(FIG2_HEADER), header)
        self.assertLess(float(rows[-1][0]), 0.5)
        below = [float(q) for q, _, _, c in rows if float(c) < 1]
        above = [float(q) for q, _, _, c in rows if float(c) >= 1]
        self.assertTrue(0.105 <= max(below) < min(above) <= 0.115)
        self.assertTrue(all(float(noiseless) == 1.0 for _, noiseless, _, _ in rows))

    def test_comparison(self):
        header, rows = read_csv(os.path.join(self.dir.name, 'fig3.csv'))
        self.assertEqual(list(FIG3_HEADER), header)
        row = [r for r in rows if float(r[0]) == 0.07][0]
        ours, existing, bb84 = (float(v) for v in row[1:])
        self.assertAlmostEqual(ours, bb84, places=8)
        self.assertAlmostEqual(existing, bb84, places=8)
        self.assertTrue(all(r[2] == '' for r in rows if float(r[0]) > 0.07))
        self.assertTrue(all(float(r[1]) > float(r[2]) for r in rows if float(r[0]) < 0.07))


class TestSimulate(unittest.TestCase):
    def simulate(self, out: str, *args):
        return quiet_main(['simulate', '--out', out, '--n', '128', '--rounds', '4', '--sessions', '2'] + list(args))

    def test_deterministic(self):
        with tempfile.TemporaryDirectory() as d:
            files = ('transcript.csv', 'summary.json')
            code, _ = self.simulate(d, '--seed', '42', '--qber', '0.01')
            self.assertEqual(0, code)
            first = [open(os.path.join(d, f), 'rb').read() for f in files]
            self.simulate(d, '--seed', '42', '--qber', '0.01')
            self.assertEqual(first, [open(os.path.join(d, f), 'rb').read() for f in files])

            # the summary records the worker count; the transcript does not depend on it
            self.simulate(d, '--seed', '42', '--qber', '0.01', '--workers', '2')
            self.assertEqual(first[0], open(os.path.join(d, files[0]), 'rb').read())

    def test_transcript(self):
        with tempfile.TemporaryDirectory() as d:
            _, stdout = self.simulate(d, '--seed', '7')
            header, rows = read_csv(os.path.join(d, 'transcript.csv'))
            self.assertEqual(['session', 'round', 'direction'], header[:3])
            self.assertEqual(8, len(rows))
            self.assertEqual(['AB', 'BA'] * 4, [r[2] for r in rows])

            with open(os.path.join(d, 'summary.json')) as fin: summary = json.load(fin)
            self.assertEqual((2, 8, 1.0, 0.0), (summary['sessions'], summary['rounds'], summary['accept_rate'], summary['consumed_key_rate']))
            self.assertEqual(0.0, summary['analytic']['consumed_key_rate'])
            self.assertEqual(7, summary['config']['seed'])
            self.assertEqual(1.0, json.loads(stdout)['kv_recycling_rate'])

    def test_missing_seed(self):
        with tempfile.TemporaryDirectory() as d:
            with self.assertRaises(SystemExit) as cm: self.simulate(d)
            self.assertEqual(2, cm.exception.code)
            self.assertEqual([], os.listdir(d))

    def test_show_config(self):
        code, stdout = quiet_main(['simulate', '--show-config', '--rounds', '3'])
        settings = json.loads(stdout)
        self.assertEqual((0, 3, None), (code, settings['rounds'], settings['seed']))


class TestVerify(unittest.TestCase):
    def test_suite(self):
        code, stdout = quiet_main(['verify', '--suite', 'theorem1'])
        self.assertEqual(0, code)
        self.assertIn('1 of 1 suites passed', stdout)

    def test_unknown_suite(self):
        with self.assertRaises(SystemExit) as cm: quiet_main(['verify', '--suite', 'nothing'])
        self.assertEqual(2, cm.exception.code)


if __name__ == '__main__':
    unittest.main()
