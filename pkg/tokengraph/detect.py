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
"""Detection of tokens inflated by controlled accounts and fabricated transfers.

For every token, the transfers are turned into a DetectionContext: the
senders in time order with their parent (creator) account, plus read-only
global indexes shared by all tokens. Two factors are computed over action
windows with exact rational arithmetic:

* ATTNF: the per-sender share of activity on the token (ANF), summed over
  senders (TANF), divided by the sum over parents of
  children-created / children-sending (M).
* MTTQF: the per-sender share of normalized transferred quantity (Qua),
  summed per same-parent group (TTQF), maximised over groups.

`search_max_factor` looks for the window of W actions maximising a factor,
scoring pieces of W/P actions and picking the best run of P pieces.
"""
import bisect
import enum
import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

from .exceptions import (EmptyInputException, InconsistentIndexException,
                         InvalidConfigException, UndefinedQuantityException)
from .graph import AccountCreationForest, build_acg
from .ingest import Dataset
from .model import TokenId
from .utility import get_logger, write_csv

Span = Tuple[int, int]

_logger = get_logger("Detect")


class FactorKind(enum.Enum):
    """The factor searched by the window scan"""
    ATTNF = "attnf"
    MTTQF = "mttqf"


class AnfScope(enum.Enum):
    """Scope of the ANF denominator: the sender's lifetime transfers on all
    tokens (GLOBAL) or only those inside the block time span of the window (WINDOW)"""
    GLOBAL = "global"
    WINDOW = "window"


@dataclass(frozen=True)
class SenderAction:
    """A transfer of the token under analysis, seen from its sender.

    Attributes:
        sender (str): The sending account.
        units (int): The amount, in integer units of the token precision.
        parent (Optional[str]): The creator of the sender, None if unknown.
        block_time (int): Epoch milliseconds.
    """
    __slots__ = ("sender", "units", "parent", "block_time")
    sender: str
    units: int
    parent: Optional[str]
    block_time: int


class SenderRecord:
    """Lifetime activity of one sender over all tokens."""
    __slots__ = ("total", "counts", "units", "times", "qua_total")

    def __init__(self, keep_times: bool):
        self.total = 0
        self.counts: Dict[TokenId, int] = defaultdict(int)
        self.units: Dict[TokenId, int] = defaultdict(int)
        self.times: Optional[List[int]] = [] if keep_times else None
        self.qua_total: Optional[Fraction] = None


class SenderIndex:
    """Global, read-only index of every transfer sender, shared by all the
    detection contexts.

    Attributes:
        issue_totals (Dict[TokenId, int]): Issued units of every token.
        keep_times (bool): Whether per-sender block times are kept (window ANF scope).
    """

    def __init__(self, issue_totals: Dict[TokenId, int], keep_times: bool = False):
        self.issue_totals = issue_totals
        self.keep_times = keep_times
        self.__records: Dict[str, SenderRecord] = {}

    def add(self, sender: str, token: TokenId, units: int, block_time: int):
        """Method to record a transfer sent by `sender`."""
        record = self.__records.get(sender)
        if record is None:
            record = self.__records[sender] = SenderRecord(self.keep_times)
        record.total += 1
        record.counts[token] += 1
        record.units[token] += units
        if record.times is not None:
            bisect.insort(record.times, block_time)

    def __record(self, sender: str) -> SenderRecord:
        record = self.__records.get(sender)
        if record is None:
            raise InconsistentIndexException("Sender {} missing from the global index".format(sender))
        return record

    def __contains__(self, sender: str) -> bool:
        return sender in self.__records

    def total_count(self, sender: str) -> int:
        """Method to return the lifetime number of transfers of the sender on all tokens."""
        return self.__record(sender).total

    def token_count(self, sender: str, token: TokenId) -> int:
        """Method to return the lifetime number of transfers of the sender on a token."""
        return self.__record(sender).counts.get(token, 0)

    def count_between(self, sender: str, start_time: int, end_time: int) -> int:
        """Method to return the transfers of the sender on all tokens with
        start_time <= block time <= end_time.

        Raises:
            InvalidConfigException: When the index was built without block times.
        """
        record = self.__record(sender)
        if record.times is None:
            raise InvalidConfigException("Sender index built without block times")
        return bisect.bisect_right(record.times, end_time) - bisect.bisect_left(record.times, start_time)

    def qua(self, sender: str, token: TokenId) -> Fraction:
        """Method to return the lifetime transferred quantity of the sender on
        a token, normalized by the issued quantity of the token (0 if never issued)."""
        issued = self.issue_totals.get(token, 0)
        if issued <= 0:
            return Fraction(0)
        return Fraction(self.__record(sender).units.get(token, 0), issued)

    def qua_total(self, sender: str) -> Fraction:
        """Method to return the sum of the normalized lifetime quantities of
        the sender over all the issued tokens it transferred."""
        record = self.__record(sender)
        if record.qua_total is None:
            record.qua_total = sum((self.qua(sender, t) for t in sorted(record.units)), Fraction(0))
        return record.qua_total


@dataclass
class DetectionContext:
    """Input of the detection of one token.

    Attributes:
        token (TokenId): The token analysed.
        actions (List[SenderAction]): Its transfers, in block time order.
        sender_index (SenderIndex): Global index of senders.
        parent_children_count (Dict[str, int]): Parent -> number of accounts it created.
        issue_totals (Dict[TokenId, int]): Issued units of every token.
        anf_scope (AnfScope): Scope of the ANF denominator. Default to AnfScope.GLOBAL.
    """
    token: TokenId
    actions: List[SenderAction]
    sender_index: SenderIndex
    parent_children_count: Dict[str, int]
    issue_totals: Dict[TokenId, int]
    anf_scope: AnfScope = AnfScope.GLOBAL

    @property
    def quantity_defined(self) -> bool:
        """bool: True when the token has a positive issued total."""
        return self.issue_totals.get(self.token, 0) > 0


@dataclass
class WindowSearchConfig:
    """Class to represent the window search parameters

    Attributes:
        window_size (int): Number of actions in a window (W). Default to 100,000.
        pieces (int): Number of pieces in a window (P). Default to 10.
        flag (FactorKind): The factor searched. Default to FactorKind.ATTNF.
    """
    window_size: int = 100_000
    pieces: int = 10
    flag: FactorKind = FactorKind.ATTNF

    def __post_init__(self):
        if self.pieces < 1:
            raise InvalidConfigException("pieces must be >= 1")
        if self.window_size < self.pieces:
            raise InvalidConfigException("window_size must be >= pieces")
        if self.window_size % self.pieces:
            raise InvalidConfigException("window_size {} is not divisible by pieces {}".format(
                self.window_size, self.pieces))

    @property
    def piece_size(self) -> int:
        return self.window_size // self.pieces


@dataclass
class DetectionConfig:
    """Class to represent the detection parameters

    Attributes:
        window (WindowSearchConfig): The window search parameters.
        attnf_threshold (int): ATTNF above which a token is suspicious. Default to 50.
        mttqf_threshold (int): MTTQF above which a token is suspicious. Default to 10,000.
        whole_history (bool): Compute the factors over all the actions, without windows.
            Default to False.
        anf_scope (AnfScope): Scope of the ANF denominator. Default to AnfScope.GLOBAL.
    """
    window: WindowSearchConfig = field(default_factory=WindowSearchConfig)
    attnf_threshold: Union[int, Fraction] = 50
    mttqf_threshold: Union[int, Fraction] = 10_000
    whole_history: bool = False
    anf_scope: AnfScope = AnfScope.GLOBAL

    def __post_init__(self):
        if self.attnf_threshold < 0 or self.mttqf_threshold < 0:
            raise InvalidConfigException("Thresholds must be >= 0")


@dataclass
class TtqfGroup:
    """A same-parent group of senders and its TTQF.

    Attributes:
        value (Fraction): The TTQF of the group.
        parent (Optional[str]): The common parent, None for a sender of unknown parent.
        members (FrozenSet[str]): The senders of the group.
    """
    value: Fraction
    parent: Optional[str]
    members: FrozenSet[str]


@dataclass
class WindowResult:
    """Outcome of the window search.

    Attributes:
        value (Fraction): The factor computed over the selected window.
        start (int): First action index of the window.
        end (int): Action index after the last one of the window.
    """
    value: Fraction
    start: int
    end: int


@dataclass
class FactorReport:
    """Detection outcome of one token.

    Attributes:
        token (TokenId): The token.
        acf (Fraction): Senders per distinct parent, over the ATTNF window.
        tanf (Fraction): Sum of the ANF of the senders of the ATTNF window.
        attnf (Fraction): Maximum ATTNF found.
        mttqf (Fraction): Maximum MTTQF found (0 when undefined).
        attnf_window (Tuple[int, int]): Action span of the ATTNF window.
        mttqf_window (Tuple[int, int]): Action span of the MTTQF window.
        suspicious (bool): attnf > attnf_threshold or mttqf > mttqf_threshold.
        rank_score (Fraction): attnf * mttqf.
        n_actions (int): Transfers of the token.
        n_senders (int): Distinct senders of the token.
        mttqf_defined (bool): False when the token was never issued.
        suspect_parent (Optional[str]): Parent of the group achieving MTTQF.
    """
    token: TokenId
    acf: Fraction
    tanf: Fraction
    attnf: Fraction
    mttqf: Fraction
    attnf_window: Tuple[int, int]
    mttqf_window: Tuple[int, int]
    suspicious: bool
    rank_score: Fraction
    n_actions: int = 0
    n_senders: int = 0
    mttqf_defined: bool = True
    suspect_parent: Optional[str] = None


def _span(ctx: DetectionContext, span: Optional[Span]) -> Span:
    start, end = (0, len(ctx.actions)) if span is None else span
    start, end = max(start, 0), min(end, len(ctx.actions))
    if start >= end:
        raise EmptyInputException("Empty action range [{}, {}) for token {}".format(start, end, ctx.token))
    return start, end


def _parent_key(action: SenderAction) -> Union[str, Tuple[str, str]]:
    # senders of unknown parent get a parent of their own
    return action.parent if action.parent is not None else ("?", action.sender)


def _in_span(ctx: DetectionContext, span: Span) -> Tuple[Dict[str, int], Dict[str, int], Dict[str, Optional[str]]]:
    counts: Dict[str, int] = {}
    units: Dict[str, int] = {}
    parents: Dict[str, Optional[str]] = {}
    for a in ctx.actions[span[0]:span[1]]:
        if a.sender in counts:
            counts[a.sender] += 1
            units[a.sender] += a.units
        else:
            counts[a.sender] = 1
            units[a.sender] = a.units
            parents[a.sender] = a.parent
    return counts, units, parents


def _anf_denominator(ctx: DetectionContext, sender: str, span: Span) -> int:
    if ctx.anf_scope == AnfScope.WINDOW:
        return ctx.sender_index.count_between(
            sender, ctx.actions[span[0]].block_time, ctx.actions[span[1] - 1].block_time)
    return ctx.sender_index.total_count(sender)


def compute_acf(ctx: DetectionContext, span: Optional[Span] = None) -> Fraction:
    """Function to compute the Account Control Factor: distinct senders over
    their distinct parents.

    Args:
        ctx (DetectionContext): The token context.
        span (Optional[Span], optional): Half-open action range, all if None. Defaults to None.

    Raises:
        EmptyInputException: When the range is empty.

    Returns:
        Fraction: The ACF, >= 1.
    """
    span = _span(ctx, span)
    senders = set()
    parents = set()
    for a in ctx.actions[span[0]:span[1]]:
        senders.add(a.sender)
        parents.add(_parent_key(a))
    return Fraction(len(senders), len(parents))


def compute_anf(ctx: DetectionContext, sender: str, span: Optional[Span] = None) -> Fraction:
    """Function to compute the Action Number Factor of a sender: its transfers
    of the token in range over its transfers on all tokens.

    Args:
        ctx (DetectionContext): The token context.
        sender (str): The sender.
        span (Optional[Span], optional): Half-open action range, all if None. Defaults to None.

    Raises:
        EmptyInputException: When the sender has no action in range.
        InconsistentIndexException: When the global index does not cover the sender.

    Returns:
        Fraction: The ANF, in (0, 1].
    """
    span = _span(ctx, span)
    count = sum(1 for a in ctx.actions[span[0]:span[1]] if a.sender == sender)
    if not count:
        raise EmptyInputException("Sender {} has no action in range".format(sender))
    denominator = _anf_denominator(ctx, sender, span)
    if denominator < count:
        raise InconsistentIndexException("Sender {} has {} actions in range but {} overall".format(
            sender, count, denominator))
    return Fraction(count, denominator)


def compute_tanf(ctx: DetectionContext, span: Optional[Span] = None) -> Fraction:
    """Function to compute the Total Action Number Factor: the sum of the ANF
    of the distinct senders in range.

    Args:
        ctx (DetectionContext): The token context.
        span (Optional[Span], optional): Half-open action range, all if None. Defaults to None.

    Returns:
        Fraction: The TANF.
    """
    span = _span(ctx, span)
    counts, _, _ = _in_span(ctx, span)
    # numerators grouped by denominator keep the rational sum cheap
    by_denominator: Dict[int, int] = defaultdict(int)
    for sender, count in counts.items():
        denominator = _anf_denominator(ctx, sender, span)
        if denominator < count:
            raise InconsistentIndexException("Sender {} has {} actions in range but {} overall".format(
                sender, count, denominator))
        by_denominator[denominator] += count
    return sum((Fraction(n, d) for d, n in sorted(by_denominator.items())), Fraction(0))


def _parent_weight(ctx: DetectionContext, parents: Dict[str, Optional[str]]) -> Fraction:
    holders_per_parent: Dict[str, int] = defaultdict(int)
    unknown = 0
    for parent in parents.values():
        if parent is None:
            unknown += 1
        else:
            holders_per_parent[parent] += 1
    total = Fraction(unknown)
    for parent, holding in sorted(holders_per_parent.items()):
        created = ctx.parent_children_count.get(parent, 0)
        if created < holding:
            raise InconsistentIndexException("Parent {} created {} accounts but {} of them send {}".format(
                parent, created, holding, ctx.token))
        total += Fraction(created, holding)
    return total


def compute_attnf(ctx: DetectionContext, span: Optional[Span] = None) -> Fraction:
    """Function to compute the Average Token Transfer Number Factor: TANF over
    the sum of M of the parents of the senders in range, M being the accounts
    created by the parent over its children sending in range. Senders of
    unknown parent count M = 1.

    Args:
        ctx (DetectionContext): The token context.
        span (Optional[Span], optional): Half-open action range, all if None. Defaults to None.

    Returns:
        Fraction: The ATTNF, <= TANF.
    """
    span = _span(ctx, span)
    _, _, parents = _in_span(ctx, span)
    return compute_tanf(ctx, span) / _parent_weight(ctx, parents)


def _member_qua(ctx: DetectionContext, sender: str, units: int, issued: int) -> Fraction:
    lifetime = ctx.sender_index.qua_total(sender)
    if not lifetime:
        return Fraction(0)
    return Fraction(units, issued) / lifetime


def compute_ttqf(ctx: DetectionContext, group: Iterable[str], span: Optional[Span] = None) -> Fraction:
    """Function to compute the Token Transfer Quantity Factor of a group of
    senders: the sum over members of their in-range normalized quantity on the
    token over their lifetime normalized quantity on all tokens.

    Args:
        ctx (DetectionContext): The token context.
        group (Iterable[str]): The senders (same parent).
        span (Optional[Span], optional): Half-open action range, all if None. Defaults to None.

    Raises:
        EmptyInputException: When the group or the range is empty.
        UndefinedQuantityException: When the token was never issued.

    Returns:
        Fraction: The TTQF, <= group size.
    """
    group = sorted(set(group))
    if not group:
        raise EmptyInputException("Empty group")
    span = _span(ctx, span)
    issued = ctx.issue_totals.get(ctx.token, 0)
    if issued <= 0:
        raise UndefinedQuantityException("Token {} has no issued supply".format(ctx.token))
    _, units, _ = _in_span(ctx, span)
    return sum((_member_qua(ctx, s, units.get(s, 0), issued) for s in group), Fraction(0))


def max_ttqf_group(ctx: DetectionContext, span: Optional[Span] = None) -> Optional[TtqfGroup]:
    """Function to find the same-parent group of senders with the largest TTQF.
    Senders of unknown parent form groups of their own.

    Args:
        ctx (DetectionContext): The token context.
        span (Optional[Span], optional): Half-open action range, all if None. Defaults to None.

    Returns:
        Optional[TtqfGroup]: The group, None when the token was never issued.
    """
    span = _span(ctx, span)
    issued = ctx.issue_totals.get(ctx.token, 0)
    if issued <= 0:
        return None
    _, units, parents = _in_span(ctx, span)
    groups: Dict[Union[str, Tuple[str, str]], List[str]] = defaultdict(list)
    for sender, parent in parents.items():
        groups[parent if parent is not None else ("?", sender)].append(sender)
    best: Optional[TtqfGroup] = None
    for key in sorted(groups, key=lambda k: (isinstance(k, tuple), k if isinstance(k, str) else k[1])):
        members = groups[key]
        value = sum((_member_qua(ctx, s, units[s], issued) for s in members), Fraction(0))
        if best is None or value > best.value:
            best = TtqfGroup(value, key if isinstance(key, str) else None, frozenset(members))
    return best


def compute_mttqf(ctx: DetectionContext, span: Optional[Span] = None) -> Fraction:
    """Function to compute the Max Token Transfer Quantity Factor: the largest
    TTQF among the same-parent groups of senders in range.

    Args:
        ctx (DetectionContext): The token context.
        span (Optional[Span], optional): Half-open action range, all if None. Defaults to None.

    Returns:
        Fraction: The MTTQF, 0 when the token was never issued (see `quantity_defined`).
    """
    group = max_ttqf_group(ctx, span)
    return group.value if group is not None else Fraction(0)


_FACTORS: Dict[FactorKind, Callable[[DetectionContext, Span], Fraction]] = {
    FactorKind.ATTNF: compute_attnf,
    FactorKind.MTTQF: compute_mttqf,
}


def search_max_factor(ctx: DetectionContext, cfg: WindowSearchConfig,
                      executor: ThreadPoolExecutor = None) -> WindowResult:
    """Function to search the window of W actions with the largest factor.
    The actions are cut into pieces of W/P actions (a trailing remainder is not
    scored); the run of P consecutive pieces with the largest sum of piece
    factors is selected, the earliest one on ties, and the factor is computed
    again over the whole window. Lists shorter than W are scored as a whole.

    Args:
        ctx (DetectionContext): The token context.
        cfg (WindowSearchConfig): Window size, pieces and factor.
        executor (ThreadPoolExecutor, optional): Pool scoring pieces in parallel. Defaults to None.

    Raises:
        EmptyInputException: When the token has no action.

    Returns:
        WindowResult: The factor and the window span.
    """
    n = len(ctx.actions)
    if not n:
        raise EmptyInputException("Token {} has no action".format(ctx.token))
    factor = _FACTORS[cfg.flag]
    if n < cfg.window_size:
        return WindowResult(factor(ctx, (0, n)), 0, n)

    size = cfg.piece_size
    spans = [(i * size, (i + 1) * size) for i in range(n // size)]
    if executor is not None:
        arr = list(executor.map(lambda s: factor(ctx, s), spans))
    else:
        arr = [factor(ctx, s) for s in spans]

    sum_max = sum(arr[:cfg.pieces], Fraction(0))
    temp, index_max = sum_max, 0
    for i in range(cfg.pieces, len(arr)):
        temp = temp + arr[i] - arr[i - cfg.pieces]
        if temp > sum_max:
            sum_max, index_max = temp, i - cfg.pieces + 1
    start = index_max * size
    end = min(start + cfg.window_size, n)
    return WindowResult(factor(ctx, (start, end)), start, end)


def detect_token(ctx: DetectionContext, config: DetectionConfig = None) -> FactorReport:
    """Function to compute the factor report of a token.

    Args:
        ctx (DetectionContext): The token context, with at least one action.
        config (DetectionConfig, optional): The detection parameters. Defaults to None.

    Returns:
        FactorReport: The report.
    """
    config = config or DetectionConfig()
    n = len(ctx.actions)
    if config.whole_history:
        attnf = WindowResult(compute_attnf(ctx, (0, n)), 0, n)
        mttqf_span: Span = (0, n)
    else:
        attnf = search_max_factor(ctx, replace(config.window, flag=FactorKind.ATTNF))
        mttqf_span = (0, n)
        if ctx.quantity_defined:
            found = search_max_factor(ctx, replace(config.window, flag=FactorKind.MTTQF))
            mttqf_span = (found.start, found.end)
    if not ctx.quantity_defined:
        _logger.warning("Token {} has no issued supply, MTTQF undefined".format(ctx.token))
    group = max_ttqf_group(ctx, mttqf_span)
    mttqf = group.value if group is not None else Fraction(0)
    window = (attnf.start, attnf.end)
    return FactorReport(
        token=ctx.token,
        acf=compute_acf(ctx, window),
        tanf=compute_tanf(ctx, window),
        attnf=attnf.value,
        mttqf=mttqf,
        attnf_window=window,
        mttqf_window=mttqf_span,
        suspicious=attnf.value > config.attnf_threshold or mttqf > config.mttqf_threshold,
        rank_score=attnf.value * mttqf,
        n_actions=n,
        n_senders=len({a.sender for a in ctx.actions}),
        mttqf_defined=group is not None,
        suspect_parent=group.parent if group is not None else None)


def _rank_key(report: FactorReport):
    return (-report.rank_score, report.token)


def rank(reports: List[FactorReport]) -> List[FactorReport]:
    """Function to order reports by ATTNF x MTTQF descending, ties by TokenId."""
    return sorted(reports, key=_rank_key)


def classify(reports: List[FactorReport], attnf_threshold: Union[int, Fraction] = 50,
             mttqf_threshold: Union[int, Fraction] = 10_000) -> List[FactorReport]:
    """Function to flag the suspicious tokens (ATTNF > attnf_threshold or
    MTTQF > mttqf_threshold) and rank them.

    Args:
        reports (List[FactorReport]): The reports.
        attnf_threshold (Union[int, Fraction], optional): Defaults to 50.
        mttqf_threshold (Union[int, Fraction], optional): Defaults to 10,000.

    Returns:
        List[FactorReport]: The suspicious reports by ATTNF x MTTQF descending.
    """
    flagged = [replace(r, suspicious=r.attnf > attnf_threshold or r.mttqf > mttqf_threshold)
               for r in reports]
    return rank([r for r in flagged if r.suspicious])


def issue_totals(ds: Dataset) -> Tuple[Dict[TokenId, int], Dict[TokenId, int]]:
    """Function to sum the issued units of every token. The precision of a
    token is the one of its max supply, or of its first issue; issues with a
    different precision are ignored.

    Args:
        ds (Dataset): The frozen dataset.

    Returns:
        Tuple[Dict[TokenId, int], Dict[TokenId, int]]: Issued units and precision per token.
    """
    precisions = {t: c.max_supply.precision for t, c in ds.creates_by_token.items()}
    totals: Dict[TokenId, int] = defaultdict(int)
    for i in ds.issues:
        precision = precisions.setdefault(i.token, i.quantity.precision)
        if precision != i.quantity.precision:
            _logger.warning("Issue {} of {} ignored: unexpected precision".format(i.txid, i.token))
            continue
        totals[i.token] += i.quantity.units
    return dict(totals), precisions


def prepare_contexts(ds: Dataset, forest: AccountCreationForest = None,
                     anf_scope: AnfScope = AnfScope.GLOBAL) -> Dict[TokenId, DetectionContext]:
    """Function to build, in a single pass over the transfers, the global
    sender index and the detection context of every transferred token.

    Args:
        ds (Dataset): The frozen dataset.
        forest (AccountCreationForest, optional): The account-creation forest,
            built from the dataset if None. Defaults to None.
        anf_scope (AnfScope, optional): Scope of the ANF denominator. Defaults to AnfScope.GLOBAL.

    Returns:
        Dict[TokenId, DetectionContext]: The contexts, keyed by token.
    """
    forest = forest if forest is not None else build_acg(ds)
    totals, precisions = issue_totals(ds)
    index = SenderIndex(totals, keep_times=anf_scope == AnfScope.WINDOW)
    actions: Dict[TokenId, List[SenderAction]] = defaultdict(list)
    mismatched: Dict[TokenId, int] = defaultdict(int)
    for t in ds.transfers:
        precision = precisions.setdefault(t.token, t.quantity.precision)
        units = t.quantity.units
        if precision != t.quantity.precision:
            mismatched[t.token] += 1
            units = 0
        index.add(t.sender, t.token, units, t.block_time)
        actions[t.token].append(SenderAction(t.sender, units, forest.parent_of(t.sender), t.block_time))
    for token, count in sorted(mismatched.items()):
        _logger.warning("Token {}: {} transfers with unexpected precision count for zero quantity".format(
            token, count))
    return {token: DetectionContext(token, acts, index, forest.children_count, totals, anf_scope)
            for token, acts in sorted(actions.items())}


def detect_all(contexts: Dict[TokenId, DetectionContext], config: DetectionConfig = None,
               threads: int = 1, log_level: Union[str, int] = logging.INFO) -> List[FactorReport]:
    """Function to run the detection on every context, in parallel when
    threads > 1. The output does not depend on the number of threads.

    Args:
        contexts (Dict[TokenId, DetectionContext]): The contexts.
        config (DetectionConfig, optional): The detection parameters. Defaults to None.
        threads (int, optional): Number of worker threads. Defaults to 1.
        log_level (Union[str, int], optional): The log level. Defaults to logging.INFO.

    Returns:
        List[FactorReport]: The reports sorted by TokenId.
    """
    _logger.setLevel(log_level)
    config = config or DetectionConfig()
    tokens = sorted(contexts)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(lambda t: detect_token(contexts[t], config), tokens))
    else:
        reports = [detect_token(contexts[t], config) for t in tokens]
    _logger.info("Analysed {} tokens, {} suspicious".format(
        len(reports), sum(1 for r in reports if r.suspicious)))
    return reports


def write_reports_csv(reports: List[FactorReport], path: str):
    """Function to write the CSV summary of the reports."""
    write_csv(path, ["token", "attnf", "mttqf", "acf", "suspicious", "rank_score", "window_start", "window_end"],
              ((str(r.token), r.attnf, r.mttqf, r.acf, r.suspicious, r.rank_score,
                r.attnf_window[0], r.attnf_window[1]) for r in reports))
