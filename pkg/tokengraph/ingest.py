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
"""Streaming reader for line-delimited JSON action logs.

Each input file holds one action per line. Files are parsed line by line
through a bounded reorder buffer, so the memory used while reading does not
depend on the file size; transfer bodies can optionally be dropped after
indexing and re-streamed from disk when needed."""
import heapq
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Iterator, List, Optional, Set, Tuple, Union

from tqdm import tqdm

from .exceptions import (DatasetFrozenException, IngestException,
                         InvalidConfigException, TokenGraphException)
from .model import (AccountCreation, ActionKind, CreateAction, IssueAction,
                    TokenId, TransferAction, parse_account, parse_quantity,
                    parse_token_id)
from .utility import format_timestamp, get_logger, parse_timestamp

Action = Union[TransferAction, IssueAction, CreateAction, AccountCreation]

# file names used for a directory of logs
FILE_NAMES: Dict[ActionKind, str] = {
    ActionKind.ACCOUNT: "account_creations.jsonl",
    ActionKind.CREATE: "creates.jsonl",
    ActionKind.ISSUE: "issues.jsonl",
    ActionKind.TRANSFER: "transfers.jsonl",
}


@dataclass
class IngestConfig:
    """Class to represent the ingest configuration

    Attributes:
        retain_transfers (bool): Keep transfer bodies in memory; when False they are
            re-streamed from the input files on every pass. Default to True.
        reorder_buffer (int): Number of records held to repair local disorder. Default to 10,000.
        threads (int): Number of files parsed concurrently (retained mode only). Default to 1.
        progress (bool): Show a progress bar while reading. Default to False.
    """
    retain_transfers: bool = True
    reorder_buffer: int = 10_000
    threads: int = 1
    progress: bool = False

    def __post_init__(self):
        if self.reorder_buffer < 0:
            raise InvalidConfigException("reorder_buffer must be >= 0")
        if self.threads < 1:
            raise InvalidConfigException("threads must be >= 1")


@dataclass
class IngestReport:
    """Per-file outcome of an ingest run

    Attributes:
        path (str): The file read.
        kind (ActionKind): The kind of actions it contains.
        accepted (int): Lines turned into actions.
        skipped (int): Malformed lines and rejected duplicates.
        duplicates (int): Duplicate creations (tokens or accounts) among the skipped lines.
        out_of_order (int): Records arrived earlier than a preceding one and repaired.
        late (int): Records arrived too late for the buffer, kept in arrival order.
        irregular_names (int): Accepted records with account names outside the regular charset.
    """
    path: str
    kind: ActionKind
    accepted: int = 0
    skipped: int = 0
    duplicates: int = 0
    out_of_order: int = 0
    late: int = 0
    irregular_names: int = 0


@dataclass
class DatasetStats:
    """Whole-dataset counters

    Attributes:
        n_creates (int): Number of create actions.
        n_issues (int): Number of issue actions.
        n_transfers (int): Number of transfer actions.
        n_account_creations (int): Number of account creations.
        n_tokens (int): Distinct tokens over creates, issues and transfers.
        n_holders (int): Distinct accounts appearing as sender or receiver of a transfer.
        n_creators (int): Distinct creators of accounts.
    """
    n_creates: int = 0
    n_issues: int = 0
    n_transfers: int = 0
    n_account_creations: int = 0
    n_tokens: int = 0
    n_holders: int = 0
    n_creators: int = 0


class ReorderBuffer:
    """Bounded min-heap repairing local disorder of a near-sorted stream.

    Items whose key precedes the last emitted one cannot be repaired anymore
    and are emitted immediately, keeping their arrival order.

    Attributes:
        capacity (int): Number of items held before emitting the smallest one.
        out_of_order (int): Items repaired.
        late (int): Items emitted in arrival order because beyond the buffer.
    """

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.out_of_order = 0
        self.late = 0
        self.__heap: List[Tuple[int, int, Any]] = []
        self.__seq = 0
        self.__last: Optional[int] = None
        self.__max_seen: Optional[int] = None

    def push(self, key: int, item: Any) -> List[Any]:
        """Method to insert an item and return the ones ready to be emitted.

        Args:
            key (int): The ordering key (block time).
            item (Any): The item.

        Returns:
            List[Any]: The items leaving the buffer, in order.
        """
        if self.__max_seen is not None and key < self.__max_seen:
            if self.__last is not None and key < self.__last:
                self.late += 1
                return [item]
            self.out_of_order += 1
        if self.__max_seen is None or key > self.__max_seen:
            self.__max_seen = key
        heapq.heappush(self.__heap, (key, self.__seq, item))
        self.__seq += 1
        ret = []
        while len(self.__heap) > self.capacity:
            self.__last, _, it = heapq.heappop(self.__heap)
            ret.append(it)
        return ret

    def flush(self) -> List[Any]:
        """Method to empty the buffer.

        Returns:
            List[Any]: The remaining items, in order.
        """
        ret = []
        while self.__heap:
            self.__last, _, it = heapq.heappop(self.__heap)
            ret.append(it)
        return ret


def _account(obj: Dict[str, Any], key: str, irregular: List[str]) -> str:
    name, regular = parse_account(obj[key], key)
    if not regular:
        irregular.append(name)
    return sys.intern(name)


def _token(text: str, tokens: Optional[Dict[str, TokenId]]) -> TokenId:
    if tokens is None:
        return parse_token_id(text)
    token = tokens.get(text) if isinstance(text, str) else None
    if token is None:
        token = parse_token_id(text)
        tokens[text] = token
    return token


def _text(obj: Dict[str, Any], key: str, default: str = None) -> str:
    value = obj.get(key, default)
    if not isinstance(value, str):
        raise ValueError("field {} must be a string".format(key))
    return value


def record_to_action(kind: ActionKind, obj: Dict[str, Any], irregular: List[int] = None,
                     tokens: Dict[str, TokenId] = None) -> Action:
    """Function to convert a decoded JSON record into the action of the given kind.
    Unknown keys are ignored.

    Args:
        kind (ActionKind): The kind of action expected.
        obj (Dict[str, Any]): The decoded record.
        irregular (List[int], optional): Single-item counter of records with irregular
            account names. Defaults to None.
        tokens (Dict[str, TokenId], optional): Table of the tokens already parsed, shared so that
            records of the same token reference a single TokenId. Defaults to None.

    Raises:
        KeyError: A required field is missing.
        ValueError: A field has an invalid value.
        ParseException: A field does not respect its grammar.

    Returns:
        Action: The action.
    """
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    names: List[str] = []
    txid = _text(obj, "txid")
    block_time = parse_timestamp(obj["block_time"])
    if kind == ActionKind.ACCOUNT:
        action = AccountCreation(txid, block_time, _account(obj, "creator", names),
                                 _account(obj, "name", names))
    else:
        token = _token(obj["token"], tokens)
        if kind == ActionKind.CREATE:
            action = CreateAction(txid, block_time, token, _account(obj, "creator", names),
                                  parse_quantity(obj["max_supply"]))
        else:
            quantity = parse_quantity(obj["quantity"])
            memo = _text(obj, "memo", "")
            if kind == ActionKind.ISSUE:
                action = IssueAction(txid, block_time, token, _account(obj, "issuer", names),
                                     _account(obj, "to", names), quantity, memo)
            else:
                action = TransferAction(txid, block_time, token, _account(obj, "from", names),
                                        _account(obj, "to", names), quantity, memo)
    if names and irregular is not None:
        irregular[0] += 1
    return action


def action_to_record(action: Action) -> Dict[str, str]:
    """Function to convert an action into the record written in the logs.

    Args:
        action (Action): The action.

    Returns:
        Dict[str, str]: The record, using the exported key names.
    """
    ret = {"txid": action.txid, "block_time": format_timestamp(action.block_time)}
    if isinstance(action, AccountCreation):
        ret.update(creator=action.creator, name=action.name)
    elif isinstance(action, CreateAction):
        ret.update(token=str(action.token), creator=action.creator, max_supply=action.max_supply.render())
    elif isinstance(action, IssueAction):
        ret.update(token=str(action.token), issuer=action.issuer, to=action.receiver,
                   quantity=action.quantity.render(), memo=action.memo)
    else:
        ret.update(token=str(action.token), to=action.receiver, quantity=action.quantity.render(),
                   memo=action.memo, **{"from": action.sender})
    return ret


class _Segment:
    """Actions of one kind read from one file, in emission order. When the
    items are not retained, they are re-read from `path`."""

    def __init__(self, path: str, kind: ActionKind, items: Optional[List[Action]]):
        self.path = path
        self.kind = kind
        self.items = items


class Dataset:
    """Class holding the actions read from the logs and the indexes required
    by the analyses. The dataset is filled by `ingest_files` and then frozen;
    after `freeze` it is immutable and can be shared between threads.

    Attributes:
        config (IngestConfig): The ingest configuration.
        reports (List[IngestReport]): One report per file read.
        creates_by_token (Dict[TokenId, CreateAction]): Token creations, keyed by token.
        orphan_tokens (Set[TokenId]): Tokens transferred or issued without a create action.
        time_range (Tuple[int, int]): First and last block time seen, None if empty.
    """
    _logger: logging.Logger = get_logger("Ingest")

    def __init__(self, config: IngestConfig = None, log_level: Union[str, int] = logging.INFO):
        Dataset._logger = get_logger("Ingest", log_level=log_level)
        self.config = config or IngestConfig()
        self.reports: List[IngestReport] = []
        self.creates_by_token: Dict[TokenId, CreateAction] = {}
        self.orphan_tokens: Set[TokenId] = set()
        self.time_range: Optional[Tuple[int, int]] = None
        self.__segments: Dict[ActionKind, List[_Segment]] = {k: [] for k in ActionKind}
        self.__merged: Dict[ActionKind, List[Action]] = {}
        self.__frozen = False
        self.__counts: Dict[ActionKind, int] = {k: 0 for k in ActionKind}
        self.__tokens: Set[TokenId] = set()
        self.__used_tokens: Set[TokenId] = set()
        self.__holders: Set[str] = set()
        self.__account_creators: Set[str] = set()
        self.__created_accounts: Set[str] = set()
        # raw token text to the single TokenId shared by every record
        self._token_table: Dict[str, TokenId] = {}

    @property
    def frozen(self) -> bool:
        return self.__frozen

    def count(self, kind: ActionKind) -> int:
        """Method to return the number of accepted actions of a kind.

        Args:
            kind (ActionKind): The kind of action.

        Returns:
            int: The number of actions.
        """
        return self.__counts[kind]

    @property
    def tokens(self) -> Set[TokenId]:
        """Set[TokenId]: Every token seen in creates, issues or transfers."""
        return self.__tokens

    @property
    def holders(self) -> Set[str]:
        """Set[str]: Every account seen as sender or receiver of a transfer."""
        return self.__holders

    @property
    def account_creators(self) -> Set[str]:
        """Set[str]: Every creator of accounts."""
        return self.__account_creators

    def __require_frozen(self):
        if not self.__frozen:
            raise DatasetFrozenException("Dataset must be frozen before being analysed")

    @property
    def transfers(self) -> Iterable[TransferAction]:
        """Iterable[TransferAction]: The transfers in block time order (a list when
        retained, otherwise a new stream over the input files)."""
        self.__require_frozen()
        if ActionKind.TRANSFER in self.__merged:
            return self.__merged[ActionKind.TRANSFER]
        return _Restream(self.__segments[ActionKind.TRANSFER], self.config.reorder_buffer,
                         self._token_table)

    @property
    def issues(self) -> List[IssueAction]:
        self.__require_frozen()
        return self.__merged[ActionKind.ISSUE]

    @property
    def creates(self) -> List[CreateAction]:
        self.__require_frozen()
        return self.__merged[ActionKind.CREATE]

    @property
    def account_creations(self) -> List[AccountCreation]:
        self.__require_frozen()
        return self.__merged[ActionKind.ACCOUNT]

    def __accept(self, kind: ActionKind, lineno: int, action: Action, report: IngestReport) -> bool:
        if kind == ActionKind.CREATE:
            if action.token in self.creates_by_token:
                Dataset._logger.warning("{}:{}: duplicate create of token {}, skipped".format(
                    report.path, lineno, action.token))
                report.duplicates += 1
                return False
            self.creates_by_token[action.token] = action
            self.__tokens.add(action.token)
        elif kind == ActionKind.ACCOUNT:
            if action.name in self.__created_accounts:
                Dataset._logger.warning("{}:{}: duplicate creation of account {}, skipped".format(
                    report.path, lineno, action.name))
                report.duplicates += 1
                return False
            self.__created_accounts.add(action.name)
            self.__account_creators.add(action.creator)
        else:
            self.__tokens.add(action.token)
            self.__used_tokens.add(action.token)
            if kind == ActionKind.TRANSFER:
                self.__holders.add(action.sender)
                self.__holders.add(action.receiver)
        self.__counts[kind] += 1
        if self.time_range is None:
            self.time_range = (action.block_time, action.block_time)
        else:
            self.time_range = (min(self.time_range[0], action.block_time),
                               max(self.time_range[1], action.block_time))
        return True

    def _add_file(self, path: str, kind: ActionKind, parsed: Iterable[Tuple[int, Action]],
                  report: IngestReport):
        if self.__frozen:
            raise DatasetFrozenException("Cannot ingest into a frozen dataset")
        retain = kind != ActionKind.TRANSFER or self.config.retain_transfers
        items: List[Action] = []
        for lineno, action in parsed:
            if not self.__accept(kind, lineno, action, report):
                report.skipped += 1
                continue
            report.accepted += 1
            if retain:
                items.append(action)
        self.__segments[kind].append(_Segment(path, kind, items if retain else None))
        self.reports.append(report)
        if report.irregular_names:
            Dataset._logger.warning("{}: {} records with irregular account names".format(
                path, report.irregular_names))
        if report.late:
            Dataset._logger.warning("{}: {} records beyond the reorder buffer kept in arrival order".format(
                path, report.late))
        Dataset._logger.info("{}: accepted {} {} actions, skipped {}".format(
            path, report.accepted, kind.value, report.skipped))

    def freeze(self) -> 'Dataset':
        """Method to complete the ingest: per-file streams are merged by block
        time and orphan tokens are computed. Further ingest is refused.

        Returns:
            Dataset: The dataset itself.
        """
        if self.__frozen:
            return self
        for kind, segments in self.__segments.items():
            if kind == ActionKind.TRANSFER and not self.config.retain_transfers:
                continue
            self.__merged[kind] = list(heapq.merge(
                *[s.items for s in segments], key=lambda a: a.block_time))
            for s in segments:
                s.items = None
        self.orphan_tokens = self.__used_tokens - set(self.creates_by_token)
        if self.orphan_tokens:
            Dataset._logger.info("{} tokens without create action".format(len(self.orphan_tokens)))
        self.__frozen = True
        return self

    def reports_json(self) -> List[Dict[str, Any]]:
        """Method to return the ingest reports in a serializable form.

        Returns:
            List[Dict[str, Any]]: One object per file read.
        """
        return [{"path": r.path, "kind": r.kind.value, "accepted": r.accepted, "skipped": r.skipped,
                 "duplicates": r.duplicates, "out_of_order": r.out_of_order, "late": r.late,
                 "irregular_names": r.irregular_names} for r in self.reports]


class _Restream:
    """Re-readable view over the transfer files of a non-retaining dataset."""

    def __init__(self, segments: List[_Segment], reorder_buffer: int, tokens: Dict[str, TokenId]):
        self.__segments = segments
        self.__reorder_buffer = reorder_buffer
        self.__tokens = tokens

    def __iter__(self) -> Iterator[TransferAction]:
        streams = [(a for _, a in _read_file(s.path, s.kind, self.__reorder_buffer, tokens=self.__tokens))
                   for s in self.__segments]
        return heapq.merge(*streams, key=lambda a: a.block_time)


def _read_file(path: str, kind: ActionKind, reorder_buffer: int, report: IngestReport = None,
               progress: bool = False, tokens: Dict[str, TokenId] = None) -> Iterator[Tuple[int, Action]]:
    """Function to parse a file line by line through a reorder buffer. Lines are
    decoded one at a time, so that invalid UTF-8 only discards its own line. Errors
    are logged and counted only when a report is given (first pass).

    Args:
        path (str): The file.
        kind (ActionKind): The kind of actions in the file.
        reorder_buffer (int): The buffer capacity.
        report (IngestReport, optional): The report to be filled. Defaults to None.
        progress (bool, optional): Show a progress bar. Defaults to False.
        tokens (Dict[str, TokenId], optional): Table of the tokens already parsed. Defaults to None.

    Yields:
        Iterator[Tuple[int, Action]]: Line number and action.
    """
    buffer = ReorderBuffer(reorder_buffer)
    irregular = [0]
    with open(path, "rb") as fp:
        for lineno, line in enumerate(tqdm(fp, desc=os.path.basename(path), unit=" lines",
                                           disable=not progress), start=1):
            if not line.strip():
                continue
            # UnicodeDecodeError is a ValueError, RecursionError comes from deeply nested arrays
            try:
                action = record_to_action(kind, json.loads(line.decode("utf-8")), irregular, tokens)
            except (ValueError, KeyError, TypeError, RecursionError, TokenGraphException) as e:
                if report is not None:
                    report.skipped += 1
                    Dataset._logger.warning("{}:{}: skipped malformed line: {}".format(path, lineno, e))
                continue
            for item in buffer.push(action.block_time, (lineno, action)):
                yield item
        for item in buffer.flush():
            yield item
    if report is not None:
        report.out_of_order += buffer.out_of_order
        report.late += buffer.late
        report.irregular_names += irregular[0]


def _check_readable(path: str):
    if not os.path.isfile(path) or not os.access(path, os.R_OK):
        raise IngestException("Unable to read file {}".format(path))


def ingest_files(paths: List[str], kind: ActionKind, dataset: Dataset = None,
                 config: IngestConfig = None) -> Dataset:
    """Function to read line-delimited JSON files of one kind of action into
    a dataset, creating it if not provided. Can be called several times on the
    same dataset before `freeze`.

    Args:
        paths (List[str]): The files to read.
        kind (ActionKind): The kind of actions contained.
        dataset (Dataset, optional): The dataset to extend. Defaults to None.
        config (IngestConfig, optional): The configuration of a new dataset; an existing
            dataset keeps its own. Defaults to None.

    Raises:
        InvalidConfigException: When both a dataset and a configuration are given.
        IngestException: When a file cannot be read.
        DatasetFrozenException: When the dataset is already frozen.

    Returns:
        Dataset: The dataset.
    """
    if dataset is not None and config is not None:
        raise InvalidConfigException("An existing dataset keeps its own configuration")
    ds = dataset if dataset is not None else Dataset(config)
    if ds.frozen:
        raise DatasetFrozenException("Cannot ingest into a frozen dataset")
    for path in paths:
        _check_readable(path)
    cfg = ds.config
    reports = [IngestReport(path, kind) for path in paths]

    def parse(idx: int) -> List[Tuple[int, Action]]:
        return list(_read_file(paths[idx], kind, cfg.reorder_buffer, reports[idx], cfg.progress,
                               ds._token_table))

    try:
        if kind == ActionKind.TRANSFER and not cfg.retain_transfers:
            for path, report in zip(paths, reports):
                ds._add_file(path, kind, _read_file(path, kind, cfg.reorder_buffer, report, cfg.progress,
                                                    ds._token_table), report)
        elif cfg.threads > 1 and len(paths) > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                parsed = list(pool.map(parse, range(len(paths))))
            for path, report, items in zip(paths, reports, parsed):
                ds._add_file(path, kind, items, report)
        else:
            for idx, (path, report) in enumerate(zip(paths, reports)):
                ds._add_file(path, kind, parse(idx), report)
    except OSError as e:
        raise IngestException("Unable to read {}: {}".format(paths, e))
    return ds


def dataset_stats(ds: Dataset) -> DatasetStats:
    """Function to return the whole-dataset counters.

    Args:
        ds (Dataset): The dataset.

    Returns:
        DatasetStats: The counters.
    """
    return DatasetStats(
        n_creates=ds.count(ActionKind.CREATE),
        n_issues=ds.count(ActionKind.ISSUE),
        n_transfers=ds.count(ActionKind.TRANSFER),
        n_account_creations=ds.count(ActionKind.ACCOUNT),
        n_tokens=len(ds.tokens),
        n_holders=len(ds.holders),
        n_creators=len(ds.account_creators))


def load_dataset(transfers: List[str] = (), issues: List[str] = (), creates: List[str] = (),
                 accounts: List[str] = (), config: IngestConfig = None,
                 log_level: Union[str, int] = logging.INFO) -> Dataset:
    """Function to read every kind of action and return the frozen dataset.

    Args:
        transfers (List[str], optional): Transfer files. Defaults to ().
        issues (List[str], optional): Issue files. Defaults to ().
        creates (List[str], optional): Create files. Defaults to ().
        accounts (List[str], optional): Account creation files. Defaults to ().
        config (IngestConfig, optional): The ingest configuration. Defaults to None.
        log_level (Union[str, int], optional): The log level. Defaults to logging.INFO.

    Returns:
        Dataset: The frozen dataset.
    """
    ds = Dataset(config, log_level=log_level)
    for kind, paths in ((ActionKind.ACCOUNT, accounts), (ActionKind.CREATE, creates),
                        (ActionKind.ISSUE, issues), (ActionKind.TRANSFER, transfers)):
        if paths:
            ingest_files(list(paths), kind, ds)
    return ds.freeze()
