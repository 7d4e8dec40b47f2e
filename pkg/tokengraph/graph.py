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
"""Graph abstractions of the token ecosystem and their metrics.

Builders consume a frozen Dataset:

* TCG: creators -> token symbols (BipartiteCreationGraph)
* TCCG: contracts -> tokens (BipartiteCreationGraph)
* THG: holders -> tokens weighted by holding share (HoldingGraph)
* TTG / CTTG: weighted directed transfer graph and its top-k center (TransferGraph)
* ACG: account-creation forest (AccountCreationForest)
"""
import enum
import heapq
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Hashable, Iterable, List, Optional, Set, Tuple, Union

import networkx as nx
import numpy as np
from scipy import sparse

from .exceptions import (DatasetFrozenException, EmptyInputException,
                         FitException, InvalidConfigException,
                         UnknownNodeException)
from .ingest import Dataset
from .model import IssueAction, Quantity, TokenId
from .utility import format_timestamp, get_logger, write_csv

_logger = get_logger("Graph")

_WORD_RE = re.compile(r'[^\W_]+')


class DegreeSelector(enum.Enum):
    """Which degree notion a histogram is built on"""
    LEFT = "left"
    RIGHT = "right"
    IN = "in"
    OUT = "out"
    TOTAL = "total"


@dataclass
class BipartiteCreationGraph:
    """Bipartite graph of token creations (TCG and TCCG).

    Attributes:
        left_nodes (Set[str]): Creators (TCG) or contracts (TCCG).
        right_nodes (Set[Hashable]): Token symbols (TCG) or TokenIds (TCCG).
        edges (List[Tuple[str, Hashable, int]]): One (left, right, block time) per create action.
    """
    left_nodes: Set[str] = field(default_factory=set)
    right_nodes: Set[Hashable] = field(default_factory=set)
    edges: List[Tuple[str, Hashable, int]] = field(default_factory=list)


@dataclass
class HoldingGraph:
    """Bipartite graph of holders and tokens (THG).

    Attributes:
        holders (Set[str]): Accounts with a positive final balance.
        tokens (Set[TokenId]): Tokens kept in the graph.
        edges (Dict[Tuple[str, TokenId], Fraction]): Holding share of the issued supply, in (0, 1].
        omitted (Dict[TokenId, str]): Tokens left out and the reason.
    """
    holders: Set[str] = field(default_factory=set)
    tokens: Set[TokenId] = field(default_factory=set)
    edges: Dict[Tuple[str, TokenId], Fraction] = field(default_factory=dict)
    omitted: Dict[TokenId, str] = field(default_factory=dict)


@dataclass
class TokenLedger:
    """Replayed balances of a token, in integer units of its precision.

    Attributes:
        token (TokenId): The token.
        precision (int): The precision the units refer to.
        issued (int): Total issued units.
        balances (Dict[str, int]): Final balance of every account touched.
        negative_events (int): Debits that left the sender with a negative balance.
        skipped (int): Actions ignored because of a precision different from the token one.
    """
    token: TokenId
    precision: int
    issued: int = 0
    balances: Dict[str, int] = field(default_factory=dict)
    negative_events: int = 0
    skipped: int = 0

    @property
    def deficits(self) -> int:
        """int: Sum of the negative final balances, as a positive number."""
        return -sum(b for b in self.balances.values() if b < 0)


class TransferGraph:
    """Weighted directed graph of transfers (TTG), the weight of an edge being
    the number of transfer actions from the sender to the receiver. The
    center graph (CTTG) is an induced instance of the same class.

    Attributes:
        graph (nx.DiGraph): The underlying graph, edge attribute `weight`.
    """

    def __init__(self, graph: nx.DiGraph = None):
        self.graph: nx.DiGraph = graph if graph is not None else nx.DiGraph()

    @staticmethod
    def from_counts(counts: Dict[Tuple[str, str], int]) -> 'TransferGraph':
        g = nx.DiGraph()
        g.add_weighted_edges_from((u, v, w) for (u, v), w in sorted(counts.items()))
        return TransferGraph(g)

    @property
    def nodes(self) -> Set[str]:
        return set(self.graph.nodes)

    @property
    def edges(self) -> Dict[Tuple[str, str], int]:
        return {(u, v): w for u, v, w in self.graph.edges(data="weight")}

    @property
    def total_weight(self) -> int:
        return sum(w for _, _, w in self.graph.edges(data="weight"))

    def weight(self, src: str, dst: str) -> int:
        """Method to return the number of transfers from src to dst (0 if none)."""
        data = self.graph.get_edge_data(src, dst)
        return data["weight"] if data else 0

    def in_weight(self, node: str) -> int:
        return self.graph.in_degree(node, weight="weight")

    def out_weight(self, node: str) -> int:
        return self.graph.out_degree(node, weight="weight")

    def subgraph(self, nodes: Iterable[str]) -> 'TransferGraph':
        """Method to return the subgraph induced by the nodes, as a copy."""
        return TransferGraph(self.graph.subgraph(nodes).copy())

    def __len__(self) -> int:
        return self.graph.number_of_nodes()


@dataclass
class AccountCreationForest:
    """Forest of account creations (ACG).

    Attributes:
        nodes (Set[str]): Every account seen as creator or created.
        parent (Dict[str, Tuple[str, int]]): Child -> (creator, block time).
        roots (Set[str]): Accounts without a recorded creator.
        children_count (Dict[str, int]): Creator -> number of accounts created.
        skipped (int): Records left out (self-creations, duplicates, cycles).
    """
    nodes: Set[str] = field(default_factory=set)
    parent: Dict[str, Tuple[str, int]] = field(default_factory=dict)
    roots: Set[str] = field(default_factory=set)
    children_count: Dict[str, int] = field(default_factory=dict)
    skipped: int = 0

    def parent_of(self, account: str) -> Optional[str]:
        entry = self.parent.get(account)
        return entry[0] if entry else None

    def children(self, account: str) -> List[str]:
        return sorted(c for c, (p, _) in self.parent.items() if p == account)


@dataclass
class TokenStats:
    """Per-token usage counters.

    Attributes:
        token (TokenId): The token.
        activeness (int): Number of transfer actions.
        n_holders (int): Distinct transfer senders, receivers and issue receivers.
        issue_total (Quantity): Total issued quantity.
    """
    token: TokenId
    activeness: int
    n_holders: int
    issue_total: Quantity


@dataclass
class PowerLawFit:
    """Least-squares fit of y ~ x^-beta on log-log axes.

    Attributes:
        beta (float): The exponent.
        r_squared (float): The coefficient of determination, in [0, 1].
        n_points (int): The number of (x, y) pairs fitted.
        intercept (float): The log10 intercept of the fitted line.
    """
    beta: float
    r_squared: float
    n_points: int
    intercept: float = 0.0


@dataclass
class PageRankResult:
    """Outcome of the PageRank power iteration.

    Attributes:
        scores (Dict[str, float]): Score of every node, summing to 1.
        iterations (int): Iterations performed.
        converged (bool): False when max_iter was reached before tol.
    """
    scores: Dict[str, float]
    iterations: int
    converged: bool


@dataclass
class MutualPair:
    """Two accounts transferring to each other.

    Attributes:
        a (str): The lexicographically smaller account.
        b (str): The other account.
        w_ab (int): Transfers from a to b.
        w_ba (int): Transfers from b to a.
    """
    a: str
    b: str
    w_ab: int
    w_ba: int


@dataclass
class DensityReport:
    """Density of the subgraph induced by a set of accounts (self-loops excluded).

    Attributes:
        edge_count (int): Directed edges among the nodes.
        possible_edges (int): n * (n - 1).
        density (Fraction): edge_count / possible_edges.
        total_weight (int): Transfers carried by those edges.
    """
    edge_count: int
    possible_edges: int
    density: Fraction
    total_weight: int


class ConcentrationStats:
    """Concentration of the token activity (the Matthew effect).

    Attributes:
        n_tokens (int): Number of tokens considered.
        total_activeness (int): Sum of the activeness of all tokens.
        pct_never_transferred (Fraction): Share of tokens never transferred.
    """

    def __init__(self, stats: List[TokenStats]):
        if not stats:
            raise EmptyInputException("Concentration requires at least one token")
        self.__ranked = sorted(stats, key=lambda s: (-s.activeness, s.token))
        self.n_tokens = len(stats)
        self.total_activeness = sum(s.activeness for s in stats)
        self.pct_never_transferred = Fraction(sum(1 for s in stats if not s.activeness), self.n_tokens)

    def pct_below(self, threshold: int) -> Fraction:
        """Method to return the share of tokens with activeness below the threshold."""
        return Fraction(sum(1 for s in self.__ranked if s.activeness < threshold), self.n_tokens)

    def top_share(self, fraction: Union[float, Fraction]) -> Fraction:
        """Method to return the share of the total activeness held by the top
        ceil(fraction * n) tokens.

        Args:
            fraction (Union[float, Fraction]): The share of tokens, e.g. 0.01.

        Returns:
            Fraction: The share of activity, 0 when no token was ever transferred.
        """
        exact = Fraction(str(fraction)) if isinstance(fraction, float) else Fraction(fraction)
        top = min(max(math.ceil(exact * self.n_tokens), 0), self.n_tokens)
        if not self.total_activeness:
            return Fraction(0)
        return Fraction(sum(s.activeness for s in self.__ranked[:top]), self.total_activeness)

    def summary(self, threshold: int = 100, fraction: float = 0.01) -> Dict[str, Any]:
        return {"n_tokens": self.n_tokens,
                "total_activeness": self.total_activeness,
                "pct_never_transferred": self.pct_never_transferred,
                "threshold": threshold,
                "pct_below": self.pct_below(threshold),
                "fraction": fraction,
                "top_share": self.top_share(fraction)}


def _require_frozen(ds: Dataset):
    if not ds.frozen:
        raise DatasetFrozenException("Dataset must be frozen before building graphs")


def build_tcg(ds: Dataset) -> BipartiteCreationGraph:
    """Function to build the token creator graph. Right nodes are bare symbols,
    so distinct tokens sharing a symbol collapse into one node.

    Args:
        ds (Dataset): The frozen dataset.

    Returns:
        BipartiteCreationGraph: One edge per create action.
    """
    _require_frozen(ds)
    g = BipartiteCreationGraph()
    for c in ds.creates:
        g.left_nodes.add(c.creator)
        g.right_nodes.add(c.token.symbol)
        g.edges.append((c.creator, c.token.symbol, c.block_time))
    return g


def build_tccg(ds: Dataset) -> BipartiteCreationGraph:
    """Function to build the token contract creator graph: contracts to full TokenIds.

    Args:
        ds (Dataset): The frozen dataset.

    Returns:
        BipartiteCreationGraph: One edge per create action.
    """
    _require_frozen(ds)
    g = BipartiteCreationGraph()
    for c in ds.creates:
        g.left_nodes.add(c.token.contract)
        g.right_nodes.add(c.token)
        g.edges.append((c.token.contract, c.token, c.block_time))
    return g


def replay_balances(ds: Dataset) -> Dict[TokenId, TokenLedger]:
    """Function to replay issues (credit the receiver) and transfers (debit the
    sender, credit the receiver) in block time order. Issues come before
    transfers of the same block time, otherwise the input order is kept.
    Negative balances are kept as they are in the ledger and counted.

    Args:
        ds (Dataset): The frozen dataset.

    Returns:
        Dict[TokenId, TokenLedger]: The ledger of every issued or transferred token.
    """
    _require_frozen(ds)
    ledgers: Dict[TokenId, TokenLedger] = {}

    def ledger_of(token: TokenId, precision: int) -> TokenLedger:
        ledger = ledgers.get(token)
        if ledger is None:
            create = ds.creates_by_token.get(token)
            ledger = ledgers[token] = TokenLedger(
                token, create.max_supply.precision if create else precision)
        return ledger

    for action in heapq.merge(ds.issues, ds.transfers, key=lambda a: a.block_time):
        ledger = ledger_of(action.token, action.quantity.precision)
        if action.quantity.precision != ledger.precision:
            ledger.skipped += 1
            continue
        units = action.quantity.units
        if isinstance(action, IssueAction):
            ledger.issued += units
        else:
            balance = ledger.balances.get(action.sender, 0) - units
            ledger.balances[action.sender] = balance
            if balance < 0:
                ledger.negative_events += 1
        ledger.balances[action.receiver] = ledger.balances.get(action.receiver, 0) + units

    for ledger in ledgers.values():
        if ledger.negative_events:
            _logger.warning("Token {}: {} transfers left the sender with a negative balance".format(
                ledger.token, ledger.negative_events))
        if ledger.skipped:
            _logger.warning("Token {}: {} actions with unexpected precision ignored".format(
                ledger.token, ledger.skipped))
    return ledgers


def build_thg(ds: Dataset) -> HoldingGraph:
    """Function to build the token holder graph. The share of a holder is its
    final balance over the issued total of the token; holders with a final
    balance <= 0 are left out, as are tokens never issued or with a negative
    final balance somewhere.

    Args:
        ds (Dataset): The frozen dataset.

    Returns:
        HoldingGraph: The holder graph.
    """
    g = HoldingGraph()
    for token, ledger in sorted(replay_balances(ds).items()):
        if ledger.issued <= 0:
            _logger.warning("Token {} has no issued supply, left out of the holder graph".format(token))
            g.omitted[token] = "no issued supply"
            continue
        if any(b < 0 for b in ledger.balances.values()):
            _logger.warning("Token {} has negative final balances, left out of the holder graph".format(token))
            g.omitted[token] = "negative final balance"
            continue
        g.tokens.add(token)
        for holder, balance in ledger.balances.items():
            if balance <= 0:
                continue
            g.holders.add(holder)
            g.edges[(holder, token)] = Fraction(balance, ledger.issued)
    return g


def build_ttg(ds: Dataset, token_filter: Optional[Set[TokenId]] = None) -> TransferGraph:
    """Function to build the token transfer graph, ignoring token type and amount.

    Args:
        ds (Dataset): The frozen dataset.
        token_filter (Optional[Set[TokenId]], optional): Restrict to these tokens. Defaults to None.

    Returns:
        TransferGraph: Edge weight = number of transfers from sender to receiver.
    """
    _require_frozen(ds)
    counts: Counter = Counter()
    for t in ds.transfers:
        if token_filter is None or t.token in token_filter:
            counts[(t.sender, t.receiver)] += 1
    return TransferGraph.from_counts(counts)


def build_cttg(ttg: TransferGraph, k: int = 14) -> TransferGraph:
    """Function to build the center transfer graph: the subgraph induced by the
    k accounts with the largest in + out weight (ties by account name).

    Args:
        ttg (TransferGraph): The transfer graph.
        k (int, optional): Number of center accounts. Defaults to 14.

    Raises:
        InvalidConfigException: When k is not positive.

    Returns:
        TransferGraph: The induced subgraph.
    """
    if k <= 0:
        raise InvalidConfigException("k must be positive")
    if k > len(ttg):
        _logger.warning("k={} exceeds the {} accounts of the graph, keeping all of them".format(k, len(ttg)))
    ranked = sorted(ttg.graph.nodes, key=lambda n: (-(ttg.in_weight(n) + ttg.out_weight(n)), n))
    return ttg.subgraph(ranked[:k])


def build_acg(ds: Dataset) -> AccountCreationForest:
    """Function to build the account-creation forest. Self-creations and links
    that would close a cycle are skipped with a warning.

    Args:
        ds (Dataset): The frozen dataset.

    Returns:
        AccountCreationForest: The forest.
    """
    _require_frozen(ds)
    forest = AccountCreationForest()
    for ac in ds.account_creations:
        if ac.creator == ac.name:
            _logger.warning("Account {} created by itself, skipped".format(ac.name))
            forest.skipped += 1
            continue
        if ac.name in forest.parent:
            _logger.warning("Account {} created twice, skipped".format(ac.name))
            forest.skipped += 1
            continue
        ancestor = ac.creator
        while ancestor is not None and ancestor != ac.name:
            ancestor = forest.parent_of(ancestor)
        if ancestor == ac.name:
            _logger.warning("Creation of {} by {} closes a cycle, skipped".format(ac.name, ac.creator))
            forest.skipped += 1
            continue
        forest.nodes.update((ac.creator, ac.name))
        forest.parent[ac.name] = (ac.creator, ac.block_time)
        forest.children_count[ac.creator] = forest.children_count.get(ac.creator, 0) + 1
    forest.roots = forest.nodes - set(forest.parent)
    return forest


def token_stats(ds: Dataset) -> List[TokenStats]:
    """Function to compute the usage counters of every token of the dataset.

    Args:
        ds (Dataset): The frozen dataset.

    Returns:
        List[TokenStats]: One entry per token, sorted by TokenId.
    """
    _require_frozen(ds)
    activeness: Counter = Counter()
    accounts: Dict[TokenId, Set[str]] = defaultdict(set)
    issued: Dict[TokenId, Quantity] = {}
    for t in ds.transfers:
        activeness[t.token] += 1
        accounts[t.token].update((t.sender, t.receiver))
    for i in ds.issues:
        accounts[i.token].add(i.receiver)
        total = issued.get(i.token)
        if total is None:
            issued[i.token] = i.quantity
        elif total.precision == i.quantity.precision:
            issued[i.token] = total + i.quantity
    ret = []
    for token in sorted(ds.tokens):
        total = issued.get(token)
        if total is None:
            create = ds.creates_by_token.get(token)
            total = Quantity.zero(token.symbol, create.max_supply.precision if create else 0)
        ret.append(TokenStats(token, activeness[token], len(accounts.get(token, ())), total))
    return ret


def activeness_distribution(stats: List[TokenStats]) -> Dict[int, int]:
    """Function to return the histogram activeness -> number of tokens."""
    return dict(sorted(Counter(s.activeness for s in stats).items()))


def concentration_stats(stats: List[TokenStats]) -> ConcentrationStats:
    """Function to compute the concentration of activity among tokens.

    Args:
        stats (List[TokenStats]): The token counters.

    Raises:
        EmptyInputException: When the list is empty.

    Returns:
        ConcentrationStats: Never-transferred share, pct_below(t) and top_share(f).
    """
    return ConcentrationStats(stats)


def _node_degrees(g: Any, selector: DegreeSelector, weighted: bool) -> Dict[Hashable, Union[int, float]]:
    if weighted and not isinstance(g, TransferGraph):
        raise InvalidConfigException("Weighted degrees are defined on transfer graphs only")
    if isinstance(g, (BipartiteCreationGraph, HoldingGraph)):
        left, right = (g.left_nodes, g.right_nodes) if isinstance(g, BipartiteCreationGraph) \
            else (g.holders, g.tokens)
        pairs = [(e[0], e[1]) for e in g.edges]
        if selector in (DegreeSelector.LEFT, DegreeSelector.OUT):
            ret = dict.fromkeys(left, 0)
            for u, _ in pairs:
                ret[u] += 1
        elif selector in (DegreeSelector.RIGHT, DegreeSelector.IN):
            ret = dict.fromkeys(right, 0)
            for _, v in pairs:
                ret[v] += 1
        else:
            raise InvalidConfigException("Bipartite graphs support left/right degrees only")
        return ret
    if isinstance(g, AccountCreationForest):
        out = {n: g.children_count.get(n, 0) for n in g.nodes}
        if selector == DegreeSelector.OUT:
            return out
        if selector == DegreeSelector.IN:
            return {n: int(n in g.parent) for n in g.nodes}
        if selector == DegreeSelector.TOTAL:
            return {n: out[n] + int(n in g.parent) for n in g.nodes}
        raise InvalidConfigException("Forests support in/out/total degrees only")
    if isinstance(g, TransferGraph):
        weight = "weight" if weighted else None
        if selector == DegreeSelector.IN:
            return dict(g.graph.in_degree(weight=weight))
        if selector == DegreeSelector.OUT:
            return dict(g.graph.out_degree(weight=weight))
        if selector == DegreeSelector.TOTAL:
            return dict(g.graph.degree(weight=weight))
        raise InvalidConfigException("Transfer graphs support in/out/total degrees only")
    raise InvalidConfigException("Unsupported graph type {}".format(type(g).__name__))


def degree_distribution(g: Any, selector: DegreeSelector, weighted: bool = False) -> Dict[int, int]:
    """Function to return the histogram degree -> number of nodes over the
    selected side or direction. Every node of the side is counted, including
    the ones with degree 0.

    Args:
        g (Any): A graph built by this module.
        selector (DegreeSelector): Side (bipartite graphs) or direction.
        weighted (bool, optional): Sum edge weights instead of counting edges
            (transfer graphs only). Defaults to False.

    Raises:
        InvalidConfigException: When the selector does not apply to the graph.

    Returns:
        Dict[int, int]: The histogram sorted by degree.
    """
    return dict(sorted(Counter(_node_degrees(g, selector, weighted).values()).items()))


def top_nodes(g: Any, selector: DegreeSelector, n: int,
              weighted: bool = False) -> List[Tuple[Hashable, Union[int, float]]]:
    """Function to rank the nodes of the selected side or direction by degree,
    e.g. the most active tokens or the creators with most tokens. Ties are
    broken by node name.

    Args:
        g (Any): A graph built by this module.
        selector (DegreeSelector): Side (bipartite graphs) or direction.
        n (int): Number of nodes returned.
        weighted (bool, optional): Sum edge weights instead of counting edges
            (transfer graphs only). Defaults to False.

    Raises:
        InvalidConfigException: When the selector does not apply to the graph or n is negative.

    Returns:
        List[Tuple[Hashable, Union[int, float]]]: Up to n (node, degree) pairs, highest degree first.
    """
    if n < 0:
        raise InvalidConfigException("n must be >= 0")
    degrees = _node_degrees(g, selector, weighted)
    return heapq.nsmallest(n, degrees.items(), key=lambda x: (-x[1], str(x[0])))


def fit_power_law(hist: Dict[Union[int, float], Union[int, float]]) -> PowerLawFit:
    """Function to fit y ~ x^-beta with ordinary least squares on (log x, log y).
    Entries with x <= 0 or y <= 0 are ignored.

    Args:
        hist (Dict[Union[int, float], Union[int, float]]): The distribution.

    Raises:
        FitException: When less than 2 usable points or a single distinct x remain.

    Returns:
        PowerLawFit: Exponent, goodness of fit and number of points.
    """
    points = sorted((x, y) for x, y in hist.items() if x > 0 and y > 0)
    if len(points) < 2:
        raise FitException("At least 2 points with x, y > 0 are required, got {}".format(len(points)))
    lx = np.log10(np.array([p[0] for p in points], dtype=float))
    ly = np.log10(np.array([p[1] for p in points], dtype=float))
    if np.ptp(lx) == 0:
        raise FitException("All points share the same x")
    design = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    ss_res = float(np.sum((ly - (slope * lx + intercept)) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0 else min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return PowerLawFit(beta=float(-slope), r_squared=r_squared, n_points=len(points),
                       intercept=float(intercept))


def pagerank(g: TransferGraph, damping: float = 0.85, tol: float = 1e-10,
             max_iter: int = 200) -> PageRankResult:
    """Function to compute the weighted PageRank by power iteration over a
    sparse transition matrix. The mass of dangling nodes is spread uniformly.

    Args:
        g (TransferGraph): The graph.
        damping (float, optional): Damping factor. Defaults to 0.85.
        tol (float, optional): L1 convergence threshold. Defaults to 1e-10.
        max_iter (int, optional): Maximum iterations. Defaults to 200.

    Raises:
        EmptyInputException: When the graph has no nodes.

    Returns:
        PageRankResult: The scores; `converged` is False when max_iter was hit.
    """
    nodes = sorted(g.graph.nodes)
    n = len(nodes)
    if not n:
        raise EmptyInputException("PageRank requires a non-empty graph")
    index = {node: i for i, node in enumerate(nodes)}
    rows, cols, data = [], [], []
    for u, v, w in g.graph.edges(data="weight"):
        rows.append(index[u])
        cols.append(index[v])
        data.append(float(w))
    weights = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
    out = np.asarray(weights.sum(axis=1)).ravel()
    dangling = out == 0
    inv = np.divide(1.0, out, out=np.zeros_like(out), where=~dangling)
    transition_t = (sparse.diags(inv) @ weights).T.tocsr()

    x = np.full(n, 1.0 / n)
    converged = False
    iterations = 0
    while iterations < max_iter:
        iterations += 1
        nxt = damping * (transition_t @ x + x[dangling].sum() / n) + (1.0 - damping) / n
        nxt /= nxt.sum()
        err = np.abs(nxt - x).sum()
        x = nxt
        if err < tol:
            converged = True
            break
    if not converged:
        _logger.warning("PageRank did not converge within {} iterations".format(max_iter))
    return PageRankResult({node: float(x[i]) for node, i in index.items()}, iterations, converged)


def memo_word_frequencies(ds: Dataset, top_n: Optional[int] = None,
                          include_issues: bool = True) -> List[Tuple[str, int]]:
    """Function to count the words of the memos: lowercased, split on
    non-alphanumerics, words shorter than 2 characters dropped.

    Args:
        ds (Dataset): The frozen dataset.
        top_n (Optional[int], optional): Number of words returned, all if None. Defaults to None.
        include_issues (bool, optional): Count issue memos too. Defaults to True.

    Returns:
        List[Tuple[str, int]]: (word, count) by count descending, ties by word.
    """
    _require_frozen(ds)
    counts: Counter = Counter()
    sources = [ds.transfers, ds.issues] if include_issues else [ds.transfers]
    for source in sources:
        for action in source:
            if action.memo:
                counts.update(w for w in _WORD_RE.findall(action.memo.lower()) if len(w) >= 2)
    ranked = sorted(counts.items(), key=lambda x: (-x[1], x[0]))
    return ranked if top_n is None else ranked[:max(top_n, 0)]


def mutual_pairs(g: TransferGraph, min_weight: int = 1) -> List[MutualPair]:
    """Function to list the account pairs transferring in both directions with
    at least `min_weight` transfers each way.

    Args:
        g (TransferGraph): The graph.
        min_weight (int, optional): Minimum weight of both edges. Defaults to 1.

    Returns:
        List[MutualPair]: Pairs by min(w_ab, w_ba) descending, then by names.
    """
    ret = []
    for u, v, w in g.graph.edges(data="weight"):
        if u >= v:
            continue
        back = g.weight(v, u)
        if back and min(w, back) >= min_weight:
            ret.append(MutualPair(u, v, w, back))
    ret.sort(key=lambda p: (-min(p.w_ab, p.w_ba), p.a, p.b))
    return ret


def subgraph_density(g: TransferGraph, nodes: Set[str]) -> DensityReport:
    """Function to measure how densely a set of accounts transfer among themselves.

    Args:
        g (TransferGraph): The graph.
        nodes (Set[str]): The accounts.

    Raises:
        EmptyInputException: When less than 2 accounts are given.
        UnknownNodeException: When some account is not in the graph.

    Returns:
        DensityReport: Edge count, possible edges, density and weight.
    """
    nodes = set(nodes)
    if len(nodes) < 2:
        raise EmptyInputException("Density requires at least 2 accounts")
    missing = nodes - g.nodes
    if missing:
        raise UnknownNodeException("Accounts not in graph: {}".format(", ".join(sorted(missing))))
    edges = [(u, v, w) for u, v, w in g.graph.subgraph(nodes).edges(data="weight") if u != v]
    possible = len(nodes) * (len(nodes) - 1)
    return DensityReport(len(edges), possible, Fraction(len(edges), possible), sum(e[2] for e in edges))


def edge_rows(g: Any) -> Tuple[List[str], List[Tuple[Any, ...]]]:
    """Function to return the edge list of a graph, ready for CSV export.

    Args:
        g (Any): A graph built by this module.

    Returns:
        Tuple[List[str], List[Tuple[Any, ...]]]: Header and sorted rows.
    """
    if isinstance(g, TransferGraph):
        return ["src", "dst", "weight"], sorted(g.graph.edges(data="weight"))
    if isinstance(g, BipartiteCreationGraph):
        return ["src", "dst", "weight", "timestamp"], sorted(
            ((u, str(v), 1, format_timestamp(d)) for u, v, d in g.edges), key=lambda r: (r[3], r[0], r[1]))
    if isinstance(g, HoldingGraph):
        return ["src", "dst", "weight"], sorted((h, str(t), w) for (h, t), w in g.edges.items())
    if isinstance(g, AccountCreationForest):
        return ["src", "dst", "weight", "timestamp"], sorted(
            ((p, c, 1, format_timestamp(d)) for c, (p, d) in g.parent.items()), key=lambda r: (r[3], r[0], r[1]))
    raise InvalidConfigException("Unsupported graph type {}".format(type(g).__name__))


def write_edge_list(g: Any, path: str):
    """Function to write the edge list CSV `src,dst,weight[,timestamp]`."""
    header, rows = edge_rows(g)
    write_csv(path, header, rows)


_SELECTORS = {
    BipartiteCreationGraph: (DegreeSelector.LEFT, DegreeSelector.RIGHT),
    HoldingGraph: (DegreeSelector.LEFT, DegreeSelector.RIGHT),
    AccountCreationForest: (DegreeSelector.IN, DegreeSelector.OUT),
    TransferGraph: (DegreeSelector.IN, DegreeSelector.OUT),
}


def graph_summary(g: Any) -> Dict[str, Any]:
    """Function to summarize a graph: node and edge counts plus its degree histograms.

    Args:
        g (Any): A graph built by this module.

    Returns:
        Dict[str, Any]: The summary.
    """
    _, rows = edge_rows(g)
    ret: Dict[str, Any] = {"type": type(g).__name__, "n_edges": len(rows)}
    if isinstance(g, BipartiteCreationGraph):
        ret.update(n_left=len(g.left_nodes), n_right=len(g.right_nodes))
    elif isinstance(g, HoldingGraph):
        ret.update(n_left=len(g.holders), n_right=len(g.tokens), omitted=g.omitted)
    elif isinstance(g, AccountCreationForest):
        ret.update(n_nodes=len(g.nodes), n_roots=len(g.roots), skipped=g.skipped)
    else:
        ret.update(n_nodes=len(g), total_weight=g.total_weight)
    ret["degrees"] = {s.value: degree_distribution(g, s) for s in _SELECTORS[type(g)]}
    return ret
