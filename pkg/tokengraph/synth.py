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
"""Seeded generator of labeled action logs.

The scenario mixes three populations:

* organic users, created by a few registrars, each holding several organic
  tokens chosen by popularity and moving irregular amounts at random times;
* the children of a wallet DApp, a large population of which only a small
  sample touches each organic token;
* manipulators, each creating a farm of bots with sequential names that
  repeatedly move a fixed quantity of a single token in short bursts.

Every entity draws from its own numpy stream, seeded by (seed, kind, index),
so the output files are byte-identical for the same ScenarioSpec.
"""
import enum
import hashlib
import json
import logging
import os
import string
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple, Union

import numpy as np

from .exceptions import InvalidConfigException, ParseException
from .ingest import FILE_NAMES, Action, action_to_record
from .model import (AccountCreation, ActionKind, CreateAction, IssueAction,
                    Quantity, TokenId, TransferAction, parse_quantity,
                    parse_token_id)
from .utility import ensure_dir, get_logger, write_json

GENESIS_MS = 1528502400000  # 2018-06-09T00:00:00
DAY_MS = 86_400_000
HOUR_MS = 3_600_000
PRECISION = 4
ROOT_ACCOUNT = "eosio"
WALLET_PARENT = "walletdapp"
LABELS_FILE = "labels.json"

_BASE5 = "12345"
_ORGANIC_MEMOS = ("thanks", "payment", "gift", "rent", "dinner", "trade",
                  "refund", "deposit", "withdraw", "bet", "")

_logger = get_logger("Synth")


class Label(enum.Enum):
    """Ground truth label of a generated token"""
    ORGANIC = "organic"
    MANIPULATED = "manipulated"


class _Stream(enum.IntEnum):
    USER = 1
    WALLET = 2
    MANIPULATED = 3
    SILENT = 4


def base5_name(prefix: str, index: int, width: int) -> str:
    """Function to build a regular account name: the prefix followed by the
    index written with the digits 1-5 on `width` characters."""
    digits = []
    for _ in range(width):
        index, r = divmod(index, 5)
        digits.append(_BASE5[r])
    if index:
        raise InvalidConfigException("Index does not fit in {} base-5 digits".format(width))
    return prefix + "".join(reversed(digits))


def bot_name(prefix: str, index: int, width: int = 4) -> str:
    """Function to build a bot name, the prefix followed by the zero-padded
    index (e.g. bnr0001), the naming observed in bot farms."""
    return "{}{}".format(prefix, str(index).zfill(width))


def _letters(index: int, width: int) -> str:
    out = []
    for _ in range(width):
        index, r = divmod(index, 26)
        out.append(string.ascii_uppercase[r])
    return "".join(reversed(out))


@dataclass
class ScenarioSpec:
    """Class to represent the parameters of a synthetic scenario

    Attributes:
        seed (int): The 64-bit seed. Default to 42.
        n_organic_tokens (int): Tokens moved by organic users and wallet children. Default to 20.
        n_manipulated_tokens (int): Tokens moved by bot farms only. Default to 5.
        n_silent_tokens (int): Tokens created and issued but never transferred. Default to 0.
        manipulator_children (int): Bots per manipulator. Default to 200.
        burst_actions_per_bot (int): Transfers sent by every bot. Default to 20.
        burst_rounds (int): Bursts per manipulated token. Default to 1.
        burst_memo (str): Memo of the bot transfers. Default to "mine".
        fixed_burst_quantity (Optional[str]): Decimal amount of every bot transfer,
            drawn per token if None. Default to None.
        wallet_children (int): Accounts created by the wallet DApp. Default to 1,000.
        wallet_participation_rate (float): Share of wallet children sending each
            organic token. Default to 0.01.
        wallet_actions_per_child (int): Transfers of a sampled wallet child. Default to 3.
        organic_users (int): Organic accounts. Default to 500.
        organic_actions_per_user (int): Transfers of an organic user. Default to 12.
        organic_registrars (int): Parents of the organic users. Default to 8.
        popularity_exponent (float): Zipf exponent of the organic token popularity. Default to 1.0.
        time_span (int): Milliseconds covered by the logs. Default to 30 days.
    """
    seed: int = 42
    n_organic_tokens: int = 20
    n_manipulated_tokens: int = 5
    n_silent_tokens: int = 0
    manipulator_children: int = 200
    burst_actions_per_bot: int = 20
    burst_rounds: int = 1
    burst_memo: str = "mine"
    fixed_burst_quantity: Optional[str] = None
    wallet_children: int = 1000
    wallet_participation_rate: float = 0.01
    wallet_actions_per_child: int = 3
    organic_users: int = 500
    organic_actions_per_user: int = 12
    organic_registrars: int = 8
    popularity_exponent: float = 1.0
    time_span: int = 30 * DAY_MS

    def __post_init__(self):
        counts = ("n_organic_tokens", "n_manipulated_tokens", "n_silent_tokens", "manipulator_children",
                  "burst_actions_per_bot", "wallet_children", "wallet_actions_per_child", "organic_users",
                  "organic_actions_per_user", "organic_registrars")
        for name in counts:
            if getattr(self, name) < 0:
                raise InvalidConfigException("{} must be >= 0".format(name))
        if not 0 <= self.wallet_participation_rate <= 1:
            raise InvalidConfigException("wallet_participation_rate must be in [0, 1]")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidConfigException("seed must be a 64-bit unsigned integer")
        if self.burst_rounds < 1:
            raise InvalidConfigException("burst_rounds must be >= 1")
        if self.popularity_exponent < 0:
            raise InvalidConfigException("popularity_exponent must be >= 0")
        if self.time_span < 3 * DAY_MS:
            raise InvalidConfigException("time_span must cover at least 3 days")
        if self.organic_users and not self.organic_registrars:
            raise InvalidConfigException("organic users need at least one registrar")
        # name spaces of the generated accounts
        limits = (("n_organic_tokens", 5 ** 4), ("n_manipulated_tokens", 5 ** 2),
                  ("n_silent_tokens", 5 ** 4), ("organic_users", 5 ** 6),
                  ("wallet_children", 5 ** 6), ("organic_registrars", 5 ** 3),
                  ("manipulator_children", 10 ** 8))
        for name, limit in limits:
            if getattr(self, name) > limit:
                raise InvalidConfigException("{} must be <= {}".format(name, limit))
        if self.fixed_burst_quantity is not None:
            self.burst_units()

    def burst_units(self) -> Optional[int]:
        """Method to return the fixed bot transfer amount in units of the
        generated precision, None if drawn per token."""
        if self.fixed_burst_quantity is None:
            return None
        try:
            q = parse_quantity("{} X".format(self.fixed_burst_quantity))
        except ParseException as e:
            raise InvalidConfigException("Invalid fixed_burst_quantity: {}".format(e))
        if q.precision > PRECISION or not q.units:
            raise InvalidConfigException("fixed_burst_quantity must be positive with at most {} decimals".format(
                PRECISION))
        return q.units * 10 ** (PRECISION - q.precision)


@dataclass
class GroundTruth:
    """Class to represent the labels of a generated scenario

    Attributes:
        labels (Dict[TokenId, Label]): Label of every generated token.
        bot_accounts (Set[str]): Accounts of the bot farms.
        wallet_accounts (Set[str]): Children of the wallet DApp.
        expected_counts (Dict[str, int]): Lines written per action kind.
        manipulator_parents (Dict[TokenId, str]): Creator of the bots of each manipulated token.
        wallet_parent (str): The wallet DApp account.
        wallet_tokens (Dict[TokenId, Set[str]]): Wallet children sending each organic token.
        burst_transfers (Dict[TokenId, int]): Bot transfers of each manipulated token.
    """
    labels: Dict[TokenId, Label] = field(default_factory=dict)
    bot_accounts: Set[str] = field(default_factory=set)
    wallet_accounts: Set[str] = field(default_factory=set)
    expected_counts: Dict[str, int] = field(default_factory=dict)
    manipulator_parents: Dict[TokenId, str] = field(default_factory=dict)
    wallet_parent: str = WALLET_PARENT
    wallet_tokens: Dict[TokenId, Set[str]] = field(default_factory=dict)
    burst_transfers: Dict[TokenId, int] = field(default_factory=dict)

    @property
    def manipulated(self) -> List[TokenId]:
        return sorted(t for t, label in self.labels.items() if label == Label.MANIPULATED)

    @property
    def organic(self) -> List[TokenId]:
        return sorted(t for t, label in self.labels.items() if label == Label.ORGANIC)

    @staticmethod
    def from_json(path: str) -> 'GroundTruth':
        """Method to read the labels written next to a scenario.

        Args:
            path (str): The labels file or the scenario directory.

        Returns:
            GroundTruth: The ground truth.
        """
        if os.path.isdir(path):
            path = os.path.join(path, LABELS_FILE)
        with open(path) as fp:
            raw = json.load(fp)
        return GroundTruth(
            labels={parse_token_id(k): Label(v) for k, v in raw["labels"].items()},
            bot_accounts=set(raw["bot_accounts"]),
            wallet_accounts=set(raw["wallet_accounts"]),
            expected_counts=dict(raw["expected_counts"]),
            manipulator_parents={parse_token_id(k): v for k, v in raw["manipulator_parents"].items()},
            wallet_parent=raw["wallet_parent"],
            wallet_tokens={parse_token_id(k): set(v) for k, v in raw["wallet_tokens"].items()},
            burst_transfers={parse_token_id(k): v for k, v in raw["burst_transfers"].items()})


@dataclass
class _PlannedTransfer:
    block_time: int
    seq: int
    sender: str
    token: TokenId
    receiver: str
    share: float
    memo: str


class _Emitter:
    """Collects the generated actions and writes them sorted by (block time, txid)."""

    def __init__(self, seed: int):
        self.seed = seed
        self.actions: Dict[ActionKind, List[Action]] = {k: [] for k in ActionKind}

    def txid(self, kind: ActionKind) -> str:
        text = "{}/{}/{}".format(self.seed, kind.value, len(self.actions[kind]))
        return hashlib.sha256(text.encode()).hexdigest()

    def account(self, block_time: int, creator: str, name: str):
        self.actions[ActionKind.ACCOUNT].append(
            AccountCreation(self.txid(ActionKind.ACCOUNT), int(block_time), creator, name))

    def create(self, block_time: int, token: TokenId, max_units: int):
        self.actions[ActionKind.CREATE].append(CreateAction(
            self.txid(ActionKind.CREATE), int(block_time), token, token.contract,
            Quantity(max_units, PRECISION, token.symbol)))

    def issue(self, block_time: int, token: TokenId, receiver: str, units: int, memo: str = "airdrop"):
        self.actions[ActionKind.ISSUE].append(IssueAction(
            self.txid(ActionKind.ISSUE), int(block_time), token, token.contract, receiver,
            Quantity(int(units), PRECISION, token.symbol), memo))

    def transfer(self, block_time: int, token: TokenId, sender: str, receiver: str, units: int, memo: str):
        self.actions[ActionKind.TRANSFER].append(TransferAction(
            self.txid(ActionKind.TRANSFER), int(block_time), token, sender, receiver,
            Quantity(int(units), PRECISION, token.symbol), memo))

    def write(self, out_dir: str) -> Dict[str, int]:
        counts = {}
        for kind, actions in self.actions.items():
            actions.sort(key=lambda a: (a.block_time, a.txid))
            with open(os.path.join(out_dir, FILE_NAMES[kind]), "w") as fp:
                for a in actions:
                    fp.write(json.dumps(action_to_record(a), sort_keys=True))
                    fp.write("\n")
            counts[kind.value] = len(actions)
        return counts


def _rng(spec: ScenarioSpec, stream: _Stream, index: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, int(stream), index])


def _popularity(spec: ScenarioSpec) -> np.ndarray:
    weights = 1.0 / np.arange(1, spec.n_organic_tokens + 1) ** spec.popularity_exponent
    return weights / weights.sum()


def _pick_time(rng: np.random.Generator, start: int, end: int) -> int:
    return int(rng.integers(start, end))


def _organic(spec: ScenarioSpec, em: _Emitter, truth: GroundTruth, tokens: List[TokenId]):
    t_issue, t_active, t_end = GENESIS_MS + DAY_MS, GENESIS_MS + 2 * DAY_MS, GENESIS_MS + spec.time_span
    registrars = [base5_name("registrar", r, 3) for r in range(spec.organic_registrars)]
    for r, name in enumerate(registrars):
        em.account(GENESIS_MS + 10 + r, ROOT_ACCOUNT, name)

    balances: Dict[Tuple[str, TokenId], int] = {}
    holdings: List[Tuple[str, np.random.Generator, List[TokenId]]] = []
    holders: Dict[TokenId, List[str]] = {t: [] for t in tokens}
    p = _popularity(spec) if tokens else None
    for j in range(spec.organic_users):
        rng = _rng(spec, _Stream.USER, j)
        user = base5_name("user", j, 6)
        em.account(GENESIS_MS + DAY_MS // 2 + j, registrars[j % len(registrars)], user)
        if not tokens:
            continue
        k = min(len(tokens), int(rng.integers(3, 6)))
        held = [tokens[i] for i in sorted(rng.choice(len(tokens), size=k, replace=False, p=p))]
        for t in held:
            units = int(rng.integers(1_000, 100_000)) * 10 ** PRECISION
            em.issue(_pick_time(rng, t_issue, t_active), t, user, units)
            balances[(user, t)] = units
            holders[t].append(user)
        holdings.append((user, rng, held))

    plans: List[_PlannedTransfer] = []

    def plan(rng: np.random.Generator, sender: str, token: TokenId, candidates: List[str]):
        others = [c for c in candidates if c != sender]
        receiver = others[int(rng.integers(len(others)))] if others else token.contract
        plans.append(_PlannedTransfer(_pick_time(rng, t_active, t_end), len(plans), sender, token, receiver,
                                      float(rng.uniform(0.001, 0.1)),
                                      _ORGANIC_MEMOS[int(rng.integers(len(_ORGANIC_MEMOS)))]))

    for user, rng, held in holdings:
        # round robin, so that no token takes most of the activity of a user
        for a in range(spec.organic_actions_per_user):
            t = held[a % len(held)]
            plan(rng, user, t, holders[t])

    em.account(GENESIS_MS + 5, ROOT_ACCOUNT, WALLET_PARENT)
    children = [base5_name("wallet", i, 6) for i in range(spec.wallet_children)]
    for i, child in enumerate(children):
        em.account(GENESIS_MS + DAY_MS // 2 + spec.organic_users + i, WALLET_PARENT, child)
    truth.wallet_accounts = set(children)
    truth.wallet_parent = WALLET_PARENT
    n_sample = int(round(spec.wallet_participation_rate * len(children)))
    for k, t in enumerate(tokens):
        rng = _rng(spec, _Stream.WALLET, k)
        sample = [children[i] for i in sorted(rng.choice(len(children), size=n_sample, replace=False))]
        truth.wallet_tokens[t] = set(sample)
        for child in sample:
            units = int(rng.integers(100, 10_000)) * 10 ** PRECISION
            em.issue(_pick_time(rng, t_issue, t_active), t, child, units)
            balances[(child, t)] = balances.get((child, t), 0) + units
            for _ in range(spec.wallet_actions_per_child):
                plan(rng, child, t, holders[t])

    plans.sort(key=lambda x: (x.block_time, x.seq))
    for x in plans:
        available = balances.get((x.sender, x.token), 0)
        units = min(available, max(1, int(available * x.share)))
        if not units:
            continue
        balances[(x.sender, x.token)] = available - units
        balances[(x.receiver, x.token)] = balances.get((x.receiver, x.token), 0) + units
        em.transfer(x.block_time, x.token, x.sender, x.receiver, units, x.memo)


def _manipulated(spec: ScenarioSpec, em: _Emitter, truth: GroundTruth, m: int, token: TokenId):
    rng = _rng(spec, _Stream.MANIPULATED, m)
    parent = base5_name("mastermind", m, 2)
    em.account(GENESIS_MS + 20 + m, ROOT_ACCOUNT, parent)
    truth.manipulator_parents[token] = parent

    prefix = "b" + _letters(m, 2).lower()
    width = max(4, len(str(spec.manipulator_children)))
    bots = [bot_name(prefix, i + 1, width) for i in range(spec.manipulator_children)]
    created = GENESIS_MS + DAY_MS + int(rng.integers(0, DAY_MS // 2))
    for i, bot in enumerate(bots):
        em.account(created + i, parent, bot)
    truth.bot_accounts.update(bots)

    fixed = spec.burst_units()
    if fixed is None:
        fixed = int(rng.integers(1, 100)) * 10 ** PRECISION
    for i, bot in enumerate(bots if spec.burst_actions_per_bot else []):
        em.issue(created + len(bots) + i, token, bot, fixed * spec.burst_actions_per_bot)

    starts = sorted(int(rng.integers(GENESIS_MS + 2 * DAY_MS, GENESIS_MS + spec.time_span - HOUR_MS))
                    for _ in range(spec.burst_rounds))
    for i, bot in enumerate(bots):
        for a in range(spec.burst_actions_per_bot):
            start = starts[a % spec.burst_rounds]
            if len(bots) > 1:
                j = int(rng.integers(len(bots) - 1))
                receiver = bots[j + 1] if j >= i else bots[j]
            else:
                receiver = token.contract
            em.transfer(start + int(rng.integers(0, HOUR_MS)), token, bot, receiver, fixed, spec.burst_memo)
    truth.burst_transfers[token] = len(bots) * spec.burst_actions_per_bot


def generate(spec: ScenarioSpec, out_dir: str, log_level: Union[str, int] = logging.INFO) -> GroundTruth:
    """Function to generate a labeled scenario and write its logs.

    Args:
        spec (ScenarioSpec): The scenario.
        out_dir (str): Destination directory, created if missing.
        log_level (Union[str, int], optional): The log level. Defaults to logging.INFO.

    Raises:
        OSError: When the files cannot be written.

    Returns:
        GroundTruth: The labels, also written in labels.json.
    """
    _logger.setLevel(log_level)
    ensure_dir(out_dir)
    em = _Emitter(spec.seed)
    truth = GroundTruth()
    max_units = 10 ** (10 + PRECISION)

    organic = [TokenId(base5_name("orgtoken", k, 4), "ORG" + _letters(k, 2))
               for k in range(spec.n_organic_tokens)]
    manipulated = [TokenId(base5_name("mantoken", m, 4), "MAN" + _letters(m, 2))
                   for m in range(spec.n_manipulated_tokens)]
    silent = [TokenId(base5_name("sltoken", s, 4), "SIL" + _letters(s, 2))
              for s in range(spec.n_silent_tokens)]
    for i, t in enumerate(organic + manipulated + silent):
        em.account(GENESIS_MS + 1000 + i, ROOT_ACCOUNT, t.contract)
        em.create(GENESIS_MS + DAY_MS // 4 + i, t, max_units)
    for t in organic + silent:
        truth.labels[t] = Label.ORGANIC
    for t in manipulated:
        truth.labels[t] = Label.MANIPULATED

    _organic(spec, em, truth, organic)
    for m, t in enumerate(manipulated):
        _manipulated(spec, em, truth, m, t)
    for s, t in enumerate(silent):
        rng = _rng(spec, _Stream.SILENT, s)
        receiver = base5_name("user", int(rng.integers(spec.organic_users)), 6) if spec.organic_users \
            else t.contract
        em.issue(GENESIS_MS + DAY_MS + s, t, receiver, int(rng.integers(1, 1_000)) * 10 ** PRECISION)

    truth.expected_counts = em.write(out_dir)
    write_json(os.path.join(out_dir, LABELS_FILE), truth)
    _logger.info("Generated {} tokens ({} manipulated) and {} transfers in {}".format(
        len(truth.labels), len(manipulated), truth.expected_counts[ActionKind.TRANSFER.value], out_dir))
    return truth
