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
import logging
import os
from dataclasses import dataclass, field
from threading import RLock
from typing import Any, Dict, List, Optional, Union

from .detect import (AnfScope, DetectionConfig, DetectionContext, FactorReport,
                     detect_all, prepare_contexts)
from .exceptions import IngestException, InvalidConfigException
from .graph import (AccountCreationForest, TokenStats, TransferGraph, build_acg,
                    build_cttg, build_tccg, build_tcg, build_thg, build_ttg,
                    token_stats)
from .ingest import FILE_NAMES, Dataset, IngestConfig, load_dataset
from .model import ActionKind
from .utility import ensure_dir, get_logger, to_log_level

OUTPUT_DIR_ENV = "TOKENGRAPH_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "./tokengraph-out"
FORMATS = ("json", "csv")


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR


@dataclass
class RunConfig:
    """Class to represent the inputs and outputs of a run

    Attributes:
        transfers (List[str]): Transfer log files.
        issues (List[str]): Issue log files.
        creates (List[str]): Create log files.
        accounts (List[str]): Account creation log files.
        out_dir (str): Output directory. Default to $TOKENGRAPH_OUTPUT_DIR or ./tokengraph-out.
        fmt (str): Output format of tables, json or csv. Default to json.
        threads (int): Worker threads. Default to the available cores.
        log_level (Union[str, int]): The log level. Default to logging.INFO.
        ingest (IngestConfig): The ingest configuration.
    """
    transfers: List[str] = field(default_factory=list)
    issues: List[str] = field(default_factory=list)
    creates: List[str] = field(default_factory=list)
    accounts: List[str] = field(default_factory=list)
    out_dir: str = field(default_factory=default_output_dir)
    fmt: str = "json"
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    log_level: Union[str, int] = logging.INFO
    ingest: IngestConfig = field(default_factory=IngestConfig)

    def __post_init__(self):
        if self.fmt not in FORMATS:
            raise InvalidConfigException("Unknown format {}".format(self.fmt))
        if self.threads < 1:
            raise InvalidConfigException("threads must be >= 1")
        self.log_level = to_log_level(self.log_level)

    def add_data_dir(self, path: str):
        """Method to add the logs found in a directory written by `synth`
        (or following the same file names)."""
        if not os.path.isdir(path):
            raise IngestException("Data directory {} not found".format(path))
        targets = {ActionKind.TRANSFER: self.transfers, ActionKind.ISSUE: self.issues,
                   ActionKind.CREATE: self.creates, ActionKind.ACCOUNT: self.accounts}
        for kind, name in FILE_NAMES.items():
            candidate = os.path.join(path, name)
            if os.path.isfile(candidate):
                targets[kind].append(candidate)

    @property
    def inputs(self) -> List[str]:
        return self.transfers + self.issues + self.creates + self.accounts

    def validate_inputs(self):
        """Method to check that every input is readable before any work starts.

        Raises:
            IngestException: When a file is missing or unreadable.
        """
        for path in self.inputs:
            if not os.path.isfile(path) or not os.access(path, os.R_OK):
                raise IngestException("Input file {} is not readable".format(path))


class Controller:
    """Class managing a run: it loads the dataset once and caches the
    structures derived from it, so that several analyses can share them.

    Static Attributes:
        _logger (Logger): The class logger.

    Attributes:
        config (RunConfig): The run configuration.
    """
    _logger: logging.Logger = get_logger("Controller")

    def __init__(self, config: RunConfig):
        Controller._logger.setLevel(config.log_level)
        self.config = config
        self.__lock: RLock = RLock()
        self.__dataset: Optional[Dataset] = None
        self.__forest: Optional[AccountCreationForest] = None
        self.__ttg: Optional[TransferGraph] = None
        self.__stats: Optional[List[TokenStats]] = None
        self.__contexts: Dict[AnfScope, Dict[Any, DetectionContext]] = {}

    @property
    def dataset(self) -> Dataset:
        """Dataset: The frozen dataset, loaded on first access."""
        with self.__lock:
            if self.__dataset is None:
                self.config.validate_inputs()
                self.__dataset = load_dataset(
                    self.config.transfers, self.config.issues, self.config.creates, self.config.accounts,
                    config=self.config.ingest, log_level=self.config.log_level)
                Controller._logger.info("Loaded {} input files".format(len(self.config.inputs)))
            return self.__dataset

    def output(self, name: str) -> str:
        """Method to return the path of an output file, creating the directory."""
        return os.path.join(ensure_dir(self.config.out_dir), name)

    def graph(self, kind: str) -> Any:
        """Method to build one of the graphs by its short name (tcg, tccg, thg, ttg, acg)."""
        builders = {"tcg": build_tcg, "tccg": build_tccg, "thg": build_thg}
        if kind == "ttg":
            return self.ttg()
        if kind == "acg":
            return self.forest()
        if kind not in builders:
            raise InvalidConfigException("Unknown graph {}".format(kind))
        return builders[kind](self.dataset)

    def forest(self) -> AccountCreationForest:
        with self.__lock:
            if self.__forest is None:
                self.__forest = build_acg(self.dataset)
            return self.__forest

    def ttg(self) -> TransferGraph:
        with self.__lock:
            if self.__ttg is None:
                self.__ttg = build_ttg(self.dataset)
            return self.__ttg

    def cttg(self, k: int = 14) -> TransferGraph:
        return build_cttg(self.ttg(), k)

    def token_stats(self) -> List[TokenStats]:
        with self.__lock:
            if self.__stats is None:
                self.__stats = token_stats(self.dataset)
            return self.__stats

    def contexts(self, anf_scope: AnfScope = AnfScope.GLOBAL) -> Dict[Any, DetectionContext]:
        with self.__lock:
            if anf_scope not in self.__contexts:
                self.__contexts[anf_scope] = prepare_contexts(self.dataset, self.forest(), anf_scope)
            return self.__contexts[anf_scope]

    def detect(self, config: DetectionConfig = None) -> List[FactorReport]:
        """Method to run the detection over every transferred token.

        Args:
            config (DetectionConfig, optional): The detection parameters. Defaults to None.

        Returns:
            List[FactorReport]: The reports, sorted by token.
        """
        config = config or DetectionConfig()
        return detect_all(self.contexts(config.anf_scope), config, threads=self.config.threads,
                          log_level=self.config.log_level)
