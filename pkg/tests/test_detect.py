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
import random
import unittest
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from tokengraph.detect import (AnfScope, DetectionConfig, DetectionContext,
                               FactorKind, FactorReport, SenderAction,
                               SenderIndex, WindowSearchConfig, classify,
                               compute_acf, compute_anf, compute_attnf,
                               compute_mttqf, compute_tanf, compute_ttqf,
                               detect_all, detect_token, max_ttqf_group,
                               prepare_contexts, rank, search_max_factor)
from tokengraph.ingest import load_dataset
from tokengraph.model import TokenId
import tokengraph.exceptions as exceptions

from . import small_paths

T = TokenId("target", "T")
U = TokenId("other", "U")
V = TokenId("third", "V")

# (sender, token, units), block time = position in the list
Transfer = Tuple[str, TokenId, int]


def _context(transfers: List[Transfer], parents: Dict[str, str], children: Dict[str, int],
             issues: Dict[TokenId, int], token: TokenId = T,
             scope: AnfScope = AnfScope.GLOBAL) -> DetectionContext:
    index = SenderIndex(issues, keep_times=scope == AnfScope.WINDOW)
    actions = []
    for i, (sender, t, units) in enumerate(transfers):
        index.add(sender, t, units, i)
        if t == token:
            actions.append(SenderAction(sender, units, parents.get(sender), i))
    return DetectionContext(token, actions, index, children, issues, scope)


class _Oracle:
    """Straight-line evaluation of the factors from the raw transfers."""

    def __init__(self, transfers: List[Transfer], parents: Dict[str, str], children: Dict[str, int],
                 issues: Dict[TokenId, int], token: TokenId = T):
        self.parents = parents
        self.children = children
        self.issues = issues
        self.token = token
        self.actions = [x for x in transfers if x[1] == token]
        self.total = Counter(s for s, _, _ in transfers)
        moved: Dict[Tuple[str, TokenId], int] = defaultdict(int)
        for s, t, u in transfers:
            moved[(s, t)] += u
        self.lifetime: Dict[str, Fraction] = defaultdict(Fraction)
        for (s, t), u in moved.items():
            if issues.get(t, 0) > 0:
                self.lifetime[s] += Fraction(u, issues[t])

    def parent(self, sender: str):
        return self.parents.get(sender, ("unknown", sender))

    def factors(self, start: int, end: int) -> Dict[str, Fraction]:
        acts = self.actions[start:end]
        senders = sorted({s for s, _, _ in acts})
        parents = {self.parent(s) for s in senders}
        acf = Fraction(len(senders), len(parents))
        tanf = Fraction(0)
        for s in senders:
            tanf += Fraction(sum(1 for a in acts if a[0] == s), self.total[s])
        weight = Fraction(0)
        for p in parents:
            if isinstance(p, tuple):
                weight += 1
            else:
                weight += Fraction(self.children[p], sum(1 for s in senders if self.parents.get(s) == p))
        ret = {"acf": acf, "tanf": tanf, "attnf": tanf / weight}
        if self.issues.get(self.token, 0) > 0:
            qua = {}
            for s in senders:
                units = sum(a[2] for a in acts if a[0] == s)
                qua[s] = Fraction(units, self.issues[self.token]) / self.lifetime[s] if self.lifetime[s] else 0
            groups: Dict[object, Fraction] = defaultdict(Fraction)
            for s in senders:
                groups[self.parent(s)] += qua[s]
            ret["qua"] = qua
            ret["groups"] = dict(groups)
            ret["mttqf"] = max(groups.values())
        return ret


def _random_case(rng: random.Random, max_senders: int = 50, max_actions: int = 500):
    tokens = [T, U, V][:rng.randint(1, 3)]
    n_parents = rng.randint(1, 6)
    senders = ["s{:02d}".format(i) for i in range(rng.randint(1, max_senders))]
    parents = {s: "p{}".format(rng.randrange(n_parents)) for s in senders if rng.random() > 0.1}
    children = Counter(parents.values())
    for p in list(children):
        children[p] += rng.randint(0, 20)
    transfers = [(rng.choice(senders), T, rng.randint(1, 1000))]
    for _ in range(rng.randint(0, max_actions - 1)):
        transfers.append((rng.choice(senders), rng.choice(tokens), rng.randint(1, 1000)))
    issues = Counter()
    for _, t, u in transfers:
        issues[t] += u
    for t in list(issues):
        issues[t] += rng.randint(0, 1000)
    return transfers, parents, dict(children), dict(issues)


def _report(name: str, attnf, mttqf) -> FactorReport:
    attnf, mttqf = Fraction(attnf), Fraction(mttqf)
    return FactorReport(TokenId(name, "X"), Fraction(1), attnf, attnf, mttqf, (0, 1), (0, 1),
                        False, attnf * mttqf)


class TestFactors(unittest.TestCase):

    def test01_acf(self):
        parents = {"a": "p", "b": "p", "c": "p"}
        ctx = _context([("a", T, 1), ("b", T, 1), ("c", T, 1)], parents, {"p": 3}, {T: 10})
        self.assertEqual(compute_acf(ctx), 3)
        ctx = _context([("a", T, 1), ("b", T, 1), ("c", T, 1)], {"a": "p", "b": "q", "c": "r"},
                       {"p": 1, "q": 1, "r": 1}, {T: 10})
        self.assertEqual(compute_acf(ctx), 1)
        with self.assertRaises(exceptions.EmptyInputException):
            compute_acf(ctx, (2, 2))

    def test02_unknown_parents_are_singletons(self):
        ctx = _context([("a", T, 1), ("b", T, 1)], {}, {}, {T: 10})
        self.assertEqual(compute_acf(ctx), 1)
        self.assertEqual(compute_attnf(ctx), 1)

    def test03_anf(self):
        ctx = _context([("a", T, 1)] * 5, {"a": "p"}, {"p": 1}, {T: 10})
        self.assertEqual(compute_anf(ctx, "a"), 1)
        transfers = [("a", T, 1)] * 2 + [("a", U, 1)] * 8
        ctx = _context(transfers, {"a": "p"}, {"p": 1}, {T: 10, U: 10})
        self.assertEqual(compute_anf(ctx, "a"), Fraction(1, 5))
        with self.assertRaises(exceptions.EmptyInputException):
            compute_anf(ctx, "nobody")

    def test04_sender_missing_from_index(self):
        index = SenderIndex({T: 10})
        ctx = DetectionContext(T, [SenderAction("ghost", 1, None, 0)], index, {}, {T: 10})
        with self.assertRaises(exceptions.InconsistentIndexException):
            compute_anf(ctx, "ghost")
        with self.assertRaises(exceptions.InconsistentIndexException):
            compute_tanf(ctx)

    def test05_tanf(self):
        bots = ["b{}".format(i) for i in range(8)]
        ctx = _context([(b, T, 1) for b in bots], {b: "p" for b in bots}, {"p": 8}, {T: 10})
        self.assertEqual(compute_tanf(ctx), 8)
        ctx = _context([("a", T, 1)] + [("a", U, 1)] * 3, {"a": "p"}, {"p": 1}, {T: 10, U: 10})
        self.assertEqual(compute_tanf(ctx), Fraction(1, 4))

    def test06_attnf_manipulator_and_wallet(self):
        bots = ["b{}".format(i) for i in range(10)]
        ctx = _context([(b, T, 1) for b in bots], {b: "p" for b in bots}, {"p": 10}, {T: 10})
        self.assertEqual(compute_attnf(ctx), 10)
        ctx = _context([(b, T, 1) for b in bots], {b: "wallet" for b in bots}, {"wallet": 1000}, {T: 10})
        self.assertEqual(compute_tanf(ctx), 10)
        self.assertEqual(compute_attnf(ctx), Fraction(1, 10))

    def test07_more_senders_than_children(self):
        ctx = _context([("a", T, 1), ("b", T, 1)], {"a": "p", "b": "p"}, {"p": 1}, {T: 10})
        with self.assertRaises(exceptions.InconsistentIndexException):
            compute_attnf(ctx)

    def test08_ttqf(self):
        bots = ["b{}".format(i) for i in range(7)]
        ctx = _context([(b, T, 3) for b in bots], {b: "p" for b in bots}, {"p": 7}, {T: 100})
        self.assertEqual(compute_ttqf(ctx, bots), 7)
        ctx = _context([("a", T, 5), ("a", U, 50)], {"a": "p"}, {"p": 1}, {T: 10, U: 100})
        self.assertEqual(compute_ttqf(ctx, ["a"]), Fraction(1, 2))
        with self.assertRaises(exceptions.EmptyInputException):
            compute_ttqf(ctx, [])

    def test09_undefined_quantity(self):
        ctx = _context([("a", T, 5)], {"a": "p"}, {"p": 1}, {})
        with self.assertRaises(exceptions.UndefinedQuantityException):
            compute_ttqf(ctx, ["a"])
        self.assertEqual(compute_mttqf(ctx), 0)
        self.assertIsNone(max_ttqf_group(ctx))
        report = detect_token(ctx)
        self.assertFalse(report.mttqf_defined)
        self.assertEqual(report.mttqf, 0)

    def test10_mttqf(self):
        bots = ["b{}".format(i) for i in range(7)]
        transfers = [(b, T, 10) for b in bots]
        parents = {b: "farm" for b in bots}
        for i in range(5):
            user = "u{}".format(i)
            transfers += [(user, T, 10), (user, U, 10), (user, V, 10)]
            parents[user] = "registrar"
        ctx = _context(transfers, parents, {"farm": 7, "registrar": 100}, {T: 1000, U: 1000, V: 1000})
        self.assertEqual(compute_mttqf(ctx), 7)
        group = max_ttqf_group(ctx)
        self.assertEqual((group.parent, group.members), ("farm", frozenset(bots)))
        ctx = _context([("a", T, 3), ("a", U, 7)], {"a": "p"}, {"p": 1}, {T: 10, U: 10})
        self.assertEqual(compute_mttqf(ctx), Fraction(3, 10))

    def test11_window_scoped_anf(self):
        transfers = [("a", U, 1), ("a", T, 1), ("a", T, 1), ("a", U, 1), ("b", T, 1)]
        ctx = _context(transfers, {}, {}, {T: 10, U: 10}, scope=AnfScope.WINDOW)
        self.assertEqual(compute_anf(ctx, "a", (0, 2)), 1)
        self.assertEqual(compute_anf(ctx, "a", (0, 3)), Fraction(2, 3))
        glob = _context(transfers, {}, {}, {T: 10, U: 10})
        self.assertEqual(compute_anf(glob, "a", (0, 2)), Fraction(1, 2))


class TestOracles(unittest.TestCase):

    def test1_factors_match_direct_formulas(self):
        rng = random.Random(1)
        for _ in range(100):
            transfers, parents, children, issues = _random_case(rng)
            ctx = _context(transfers, parents, children, issues)
            oracle = _Oracle(transfers, parents, children, issues)
            n = len(ctx.actions)
            start = rng.randrange(n)
            for span in [(0, n), (start, rng.randint(start + 1, n))]:
                expected = oracle.factors(*span)
                self.assertEqual(compute_acf(ctx, span), expected["acf"])
                self.assertEqual(compute_tanf(ctx, span), expected["tanf"])
                self.assertEqual(compute_attnf(ctx, span), expected["attnf"])
                self.assertEqual(compute_mttqf(ctx, span), expected["mttqf"])
                for parent, value in expected["groups"].items():
                    members = [s for s in expected["qua"] if oracle.parent(s) == parent]
                    self.assertEqual(compute_ttqf(ctx, members, span), value)

    def test2_window_search_matches_exhaustive_scan(self):
        rng = random.Random(2)
        for case in range(50):
            window = 1000 if case % 10 == 9 else 100
            pieces = 10
            transfers, parents, children, issues = _random_case(rng, max_actions=1)
            senders = sorted({s for s, _, _ in transfers} | {"s{:02d}".format(i) for i in range(30)})
            for s in senders:
                if s not in parents and rng.random() > 0.2:
                    parents[s] = "p{}".format(rng.randrange(4))
            children = Counter(parents.values())
            for p in list(children):
                children[p] += rng.randint(0, 5)
            n = rng.randint(window, 5 * window)
            while sum(1 for x in transfers if x[1] == T) < n:
                transfers.append((rng.choice(senders), rng.choice([T, T, U]), rng.randint(1, 100)))
            issues = {T: sum(u for _, t, u in transfers if t == T), U: 10 ** 6}
            ctx = _context(transfers, parents, dict(children), issues)
            oracle = _Oracle(transfers, parents, dict(children), issues)
            flag = FactorKind.MTTQF if case % 2 else FactorKind.ATTNF
            cfg = WindowSearchConfig(window, pieces, flag)

            size = window // pieces
            count = len(ctx.actions) // size
            arr = [oracle.factors(i * size, (i + 1) * size)[flag.value] for i in range(count)]
            best, best_sum = 0, None
            for i in range(count - pieces + 1):
                total = sum(arr[i:i + pieces])
                if best_sum is None or total > best_sum:
                    best, best_sum = i, total
            start, end = best * size, min(best * size + window, len(ctx.actions))

            result = search_max_factor(ctx, cfg)
            self.assertEqual((result.start, result.end), (start, end))
            self.assertEqual(result.value, oracle.factors(start, end)[flag.value])

    def test3_burst_is_found(self):
        rng = random.Random(3)
        users = ["u{:03d}".format(i) for i in range(200)]
        bots = ["b{:03d}".format(i) for i in range(50)]
        parents = {u: "registrar{}".format(i % 2) for i, u in enumerate(users)}
        parents.update({b: "farm" for b in bots})
        children = {"registrar0": 1000, "registrar1": 1000, "farm": 50}
        transfers = []
        for i in range(4000):
            if 1700 <= i < 2700:
                transfers.append((bots[(i - 1700) % 50], T, 7))
            else:
                u = rng.choice(users)
                transfers += [(u, T, rng.randint(1, 99)), (u, U, rng.randint(1, 99))]
        issues = {T: 10 ** 7, U: 10 ** 7}
        ctx = _context(transfers, parents, children, issues)
        self.assertEqual(ctx.actions[1700].sender, "b000")
        result = search_max_factor(ctx, WindowSearchConfig(1000, 10, FactorKind.ATTNF))
        covered = min(result.end, 2700) - max(result.start, 1700)
        self.assertGreaterEqual(covered, 900)
        self.assertEqual(result.value, 50)
        size = 100
        for i in range(len(ctx.actions) // size - 10 + 1):
            self.assertGreaterEqual(result.value, compute_attnf(ctx, (i * size, i * size + 1000)))


class TestWindowSearch(unittest.TestCase):

    def test1_single_window(self):
        rng = random.Random(4)
        transfers, parents, children, issues = _random_case(rng)
        ctx = _context(transfers, parents, children, issues)
        n = len(ctx.actions)
        result = search_max_factor(ctx, WindowSearchConfig(n * 10, 10))
        self.assertEqual((result.value, result.start, result.end), (compute_attnf(ctx), 0, n))

    def test2_uniform_actions_pick_first_window(self):
        senders = ["a", "b", "c", "d"]
        transfers = [(senders[i % 4], T, 5) for i in range(400)]
        ctx = _context(transfers, {s: "p" for s in senders}, {"p": 8}, {T: 10 ** 4})
        for flag in FactorKind:
            result = search_max_factor(ctx, WindowSearchConfig(100, 10, flag))
            self.assertEqual((result.start, result.end), (0, 100))
            self.assertEqual(result.value, search_max_factor(ctx, WindowSearchConfig(1000, 10, flag)).value / 4)

    def test3_trailing_actions_in_window(self):
        senders = ["a", "b"]
        transfers = [(senders[i % 2], T, 5) for i in range(25)]
        ctx = _context(transfers, {"a": "p", "b": "p"}, {"p": 2}, {T: 10 ** 4})
        result = search_max_factor(ctx, WindowSearchConfig(20, 10))
        self.assertEqual((result.start, result.end), (0, 20))
        result = search_max_factor(ctx, WindowSearchConfig(10, 1))
        self.assertEqual(result.end - result.start, 10)

    def test4_parallel_pieces_are_identical(self):
        rng = random.Random(5)
        transfers, parents, children, issues = _random_case(rng)
        ctx = _context(transfers, parents, children, issues)
        cfg = WindowSearchConfig(20, 10, FactorKind.MTTQF)
        with ThreadPoolExecutor(max_workers=4) as pool:
            self.assertEqual(search_max_factor(ctx, cfg, pool), search_max_factor(ctx, cfg))

    def test5_config_validation(self):
        for window, pieces in [(100, 0), (5, 10), (105, 10)]:
            with self.assertRaises(exceptions.InvalidConfigException):
                WindowSearchConfig(window, pieces)
        with self.assertRaises(exceptions.InvalidConfigException):
            DetectionConfig(attnf_threshold=-1)
        self.assertEqual(WindowSearchConfig().piece_size, 10_000)

    def test6_empty_actions(self):
        ctx = DetectionContext(T, [], SenderIndex({}), {}, {})
        with self.assertRaises(exceptions.EmptyInputException):
            search_max_factor(ctx, WindowSearchConfig())


class TestInvariants(unittest.TestCase):

    def test1_properties_hold_on_random_contexts(self):
        rng = random.Random(6)
        for _ in range(1000):
            transfers, parents, children, issues = _random_case(rng, max_senders=12, max_actions=60)
            anf_sums: Dict[str, Fraction] = defaultdict(Fraction)
            for token in sorted({t for _, t, _ in transfers}):
                ctx = _context(transfers, parents, children, issues, token)
                senders = sorted({a.sender for a in ctx.actions})
                tanf = compute_tanf(ctx)
                for s in senders:
                    anf = compute_anf(ctx, s)
                    self.assertTrue(0 < anf <= 1)
                    anf_sums[s] += anf
                self.assertGreaterEqual(compute_acf(ctx), 1)
                self.assertLessEqual(compute_attnf(ctx), tanf)
                groups: Dict[Optional[str], List[str]] = defaultdict(list)
                for s in senders:
                    groups[parents.get(s, s)].append(s)
                for members in groups.values():
                    for s in members:
                        qua = compute_ttqf(ctx, [s])
                        self.assertTrue(0 < qua <= 1)
                    self.assertLessEqual(compute_ttqf(ctx, members), len(members))
                self.assertLessEqual(compute_mttqf(ctx), max(len(m) for m in groups.values()))
            for s, total in anf_sums.items():
                self.assertEqual(total, 1)

    def test2_more_children_lower_attnf(self):
        bots = ["b{}".format(i) for i in range(10)]
        transfers = [(b, T, 1) for b in bots] + [("u", T, 1), ("u", U, 1)]
        parents = {b: "p" for b in bots}
        parents["u"] = "q"
        previous = None
        for n in [10, 11, 50, 100, 1000, 10 ** 6]:
            value = compute_attnf(_context(transfers, parents, {"p": n, "q": 3}, {T: 10, U: 10}))
            if previous is not None:
                self.assertLess(value, previous)
            previous = value


class TestClassification(unittest.TestCase):

    def test1_strict_thresholds(self):
        self.assertEqual(classify([_report("a", 50, 10_000)]), [])
        self.assertEqual([r.token.contract for r in classify([_report("a", 51, 0)])], ["a"])
        self.assertEqual([r.token.contract for r in classify([_report("a", 0, 10_001)])], ["a"])
        self.assertEqual(classify([_report("a", 10, 10)], attnf_threshold=20, mttqf_threshold=20), [])

    def test2_ranking(self):
        reports = [_report("c", 60, 2), _report("a", 100, 1), _report("b", 60, 2), _report("d", 1, 1)]
        self.assertEqual([r.token.contract for r in classify(reports)], ["b", "c", "a"])
        self.assertEqual([r.token.contract for r in rank(reports)], ["b", "c", "a", "d"])
        self.assertTrue(all(r.suspicious for r in classify(reports)))


class TestDatasetDetection(unittest.TestCase):

    def test1_small_fixture(self):
        contexts = prepare_contexts(load_dataset(*small_paths()))
        aaa, bbb = TokenId("tokena", "AAA"), TokenId("tokenb", "BBB")
        self.assertEqual(sorted(contexts), [aaa, bbb])
        report = detect_token(contexts[aaa])
        self.assertEqual((report.acf, report.tanf, report.attnf), (1, Fraction(3, 2), Fraction(3, 10)))
        self.assertEqual((report.mttqf, report.suspect_parent), (1, "eosio"))
        self.assertEqual((report.n_actions, report.n_senders), (3, 2))
        report = detect_token(contexts[bbb])
        self.assertEqual((report.acf, report.attnf, report.mttqf), (2, Fraction(3, 2), Fraction(17, 9)))
        self.assertEqual(report.suspect_parent, "alice")
        self.assertFalse(report.suspicious)

    def test2_thread_count_does_not_change_reports(self):
        rng = random.Random(8)
        transfers, parents, children, issues = _random_case(rng)
        contexts = {t: _context(transfers, parents, children, issues, t) for t in {x[1] for x in transfers}}
        config = DetectionConfig(window=WindowSearchConfig(20, 10))
        self.assertEqual(detect_all(contexts, config, threads=1), detect_all(contexts, config, threads=4))

    def test3_whole_history(self):
        rng = random.Random(9)
        transfers, parents, children, issues = _random_case(rng)
        ctx = _context(transfers, parents, children, issues)
        report = detect_token(ctx, DetectionConfig(window=WindowSearchConfig(10, 10), whole_history=True))
        n = len(ctx.actions)
        self.assertEqual(report.attnf_window, (0, n))
        self.assertEqual(report.attnf, compute_attnf(ctx))
        self.assertEqual(report.mttqf, compute_mttqf(ctx))
        self.assertEqual(report.rank_score, report.attnf * report.mttqf)


if __name__ == '__main__':
    unittest.main()
