# Copyright 2024 tokengraph authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
import contextlib
import io
import json
import os
import tempfile
import unittest
from unittest import mock

from tokengraph.__main__ import EXIT_DATA, EXIT_OK, EXIT_USAGE, run
from tokengraph.controller import OUTPUT_DIR_ENV, default_output_dir
from tokengraph.synth import GroundTruth

from . import small_paths


def _small_args():
    transfers, issues, creates, accounts = small_paths()
    return ["--transfers", transfers[0], "--issues", issues[0], "--creates", creates[0],
            "--accounts", accounts[0]]


class TestCli(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.tmp.name, "out")

    def tearDown(self):
        self.tmp.cleanup()

    def _run(self, *argv: str):
        stdout, stderr = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            code = run(list(argv))
        return code, stdout.getvalue()

    def _json(self, name: str, out: str = None):
        with open(os.path.join(out or self.out, name)) as fp:
            return json.load(fp)

    def test01_stats(self):
        code, text = self._run("stats", *_small_args(), "--out", self.out, "--threads", "1")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("5 transfers", text)
        stats = self._json("stats.json")
        self.assertEqual(stats["dataset"]["n_transfers"], 5)
        self.assertEqual(len(self._json("token_stats.json")), 2)

    def test02_stats_on_empty_input(self):
        empty = os.path.join(self.tmp.name, "empty.jsonl")
        open(empty, "w").close()
        code, _ = self._run("stats", "--transfers", empty, "--out", self.out)
        self.assertEqual(code, EXIT_OK)
        stats = self._json("stats.json")
        self.assertEqual(stats["dataset"]["n_transfers"], 0)
        self.assertIsNone(stats["concentration"])

    def test03_usage_errors(self):
        self.assertEqual(self._run("stats", "--bogus")[0], EXIT_USAGE)
        self.assertEqual(self._run("nothing")[0], EXIT_USAGE)
        self.assertEqual(self._run("detect", *_small_args(), "--out", self.out, "-W", "105", "-P", "10")[0],
                         EXIT_USAGE)
        self.assertEqual(self._run("synth", "--out", self.out, "--wallet-participation-rate", "2")[0],
                         EXIT_USAGE)
        self.assertEqual(self._run("--help")[0], EXIT_OK)

    def test04_missing_input(self):
        missing = os.path.join(self.tmp.name, "missing.jsonl")
        self.assertEqual(self._run("stats", "--transfers", missing, "--out", self.out)[0], EXIT_DATA)
        self.assertEqual(self._run("detect", "--data-dir", missing, "--out", self.out)[0], EXIT_DATA)

    def test05_detect_outputs(self):
        code, text = self._run("detect", *_small_args(), "--out", self.out)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("2 tokens analysed, 0 suspicious", text)
        reports = self._json("reports.json")
        self.assertEqual([r["token"] for r in reports], ["tokenb@BBB", "tokena@AAA"])
        self.assertAlmostEqual(reports[1]["attnf"], 0.3)
        self.assertEqual(self._json("suspicious.json"), [])
        with open(os.path.join(self.out, "reports.csv")) as fp:
            self.assertEqual(fp.readline().strip(),
                             "token,attnf,mttqf,acf,suspicious,rank_score,window_start,window_end")

    def test06_graph_outputs(self):
        for kind in ["tcg", "tccg", "thg", "ttg", "acg"]:
            code, _ = self._run("graph", *_small_args(), "--out", self.out, "--kind", kind)
            self.assertEqual(code, EXIT_OK, kind)
            self.assertTrue(os.path.isfile(os.path.join(self.out, "{}_edges.csv".format(kind))))
        self.assertEqual(self._json("ttg_summary.json")["n_edges"], 4)

    def test07_other_analyses(self):
        base = _small_args() + ["--out", self.out]
        self.assertEqual(self._run("degrees", *base, "--format", "csv")[0], EXIT_OK)
        self.assertTrue(os.path.isfile(os.path.join(self.out, "ttg_degrees.csv")))
        self.assertEqual(self._run("degrees", *base, "--kind", "activeness")[0], EXIT_OK)
        self.assertEqual(self._json("activeness_degrees.json"), [{"x": 2, "y": 1}, {"x": 3, "y": 1}])
        self.assertEqual(self._run("degrees", *base, "--kind", "activeness", "--top-n", "1")[0], EXIT_OK)
        self.assertEqual(self._json("activeness_top.json"), [{"node": "tokena@AAA", "degree": 3}])
        self.assertEqual(self._run("degrees", *base, "--kind", "tcg", "--selector", "left", "--top-n", "5")[0],
                         EXIT_OK)
        self.assertEqual(self._json("tcg_top.json"), [{"node": "tokena", "degree": 1},
                                                      {"node": "tokenb", "degree": 1}])
        self.assertEqual(self._run("degrees", *base, "--top-n", "-1")[0], EXIT_USAGE)
        self.assertEqual(self._run("fit", *base)[0], EXIT_OK)
        self.assertEqual(self._run("pagerank", *base, "--top-n", "2")[0], EXIT_OK)
        self.assertEqual(len(self._json("pagerank.json")), 2)
        self.assertEqual(self._run("cttg", *base, "-k", "3")[0], EXIT_OK)
        self.assertEqual(self._run("patterns", *base, "-k", "3")[0], EXIT_OK)
        self.assertEqual(self._json("patterns.json")["k"], 3)
        self.assertEqual(self._run("memo", *base, "--no-issues")[0], EXIT_OK)
        self.assertEqual(self._json("memo_words.json")[0], {"word": "airdrop", "count": 2})

    def test08_synth_then_detect(self):
        data = os.path.join(self.tmp.name, "data")
        code, text = self._run("synth", "--out", data, "--n-organic-tokens", "4", "--n-manipulated-tokens", "2",
                               "--manipulator-children", "60", "--organic-users", "60",
                               "--wallet-children", "100", "--seed", "3")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("2 manipulated", text)
        truth = GroundTruth.from_json(data)

        outputs = []
        for threads in ["1", "3"]:
            out = os.path.join(self.tmp.name, "out" + threads)
            code, _ = self._run("detect", "--data-dir", data, "--out", out, "--threads", threads)
            self.assertEqual(code, EXIT_OK)
            suspicious = set(self._json("suspicious.json", out))
            self.assertTrue({str(t) for t in truth.manipulated} <= suspicious)
            with open(os.path.join(out, "reports.json"), "rb") as fp:
                outputs.append(fp.read())
        self.assertEqual(outputs[0], outputs[1])

    def test09_output_dir_from_environment(self):
        with mock.patch.dict(os.environ, {OUTPUT_DIR_ENV: self.out}):
            self.assertEqual(default_output_dir(), self.out)
        with mock.patch.dict(os.environ, {OUTPUT_DIR_ENV: ""}):
            self.assertEqual(default_output_dir(), "./tokengraph-out")

    def test10_bad_lines_do_not_abort(self):
        transfers = small_paths()[0][0]
        path = os.path.join(self.tmp.name, "transfers.jsonl")
        with open(transfers, "rb") as src, open(path, "wb") as fp:
            lines = src.read().splitlines(keepends=True)
            fp.write(lines[0] + b"[" * 100_000 + b"]" * 100_000 + b"\n" + b'{"memo": "\xff\xfe"}\n'
                     + b"".join(lines[1:]))
        code, text = self._run("stats", "--transfers", path, "--out", self.out)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("5 transfers", text)
        files = self._json("stats.json")["files"]
        self.assertEqual((files[0]["accepted"], files[0]["skipped"]), (5, 2))


if __name__ == '__main__':
    unittest.main()
