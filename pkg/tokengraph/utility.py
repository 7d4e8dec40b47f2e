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
import calendar
import csv
import dataclasses
import enum
import json
import logging
import os
import re
from datetime import datetime, timezone
from fractions import Fraction
from typing import Any, Iterable, List, Sequence, Union

_TIMESTAMP_RE = re.compile(
    r'^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d{1,6})?Z?$')


def parse_timestamp(text: str) -> int:
    """Function to convert an ISO-8601 block timestamp into epoch milliseconds.
    Timestamps without offset are UTC, as exported by the node; a trailing `Z`
    is accepted.

    Args:
        text (str): The timestamp, e.g. 2018-06-10T14:23:39.000

    Raises:
        ValueError: When the text is not a valid timestamp.

    Returns:
        int: The epoch milliseconds.
    """
    match = _TIMESTAMP_RE.match(text) if isinstance(text, str) else None
    if not match:
        raise ValueError("Invalid timestamp {!r}".format(text))
    base = datetime.strptime(text[:19], '%Y-%m-%dT%H:%M:%S')
    # sub-millisecond digits are truncated
    millis = int((match.group(1) or '.')[1:].ljust(3, '0')[:3])
    return calendar.timegm(base.utctimetuple()) * 1000 + millis


def format_timestamp(epoch_ms: int) -> str:
    """Function to render epoch milliseconds the way block timestamps are exported.

    Args:
        epoch_ms (int): The epoch milliseconds.

    Returns:
        str: The timestamp with millisecond precision and no offset.
    """
    seconds, millis = divmod(epoch_ms, 1000)
    dt = datetime.fromtimestamp(seconds, tz=timezone.utc)
    return "{}.{:03d}".format(dt.strftime('%Y-%m-%dT%H:%M:%S'), millis)


def to_serializable(obj: Any) -> Any:
    """Function to convert an object of the package into a JSON serializable one.
    Fractions become floats, sets become sorted lists, dataclasses become
    dictionaries and objects exposing `__str__`-based identities (TokenId,
    Quantity) become their canonical text.

    Args:
        obj (Any): The object to be converted

    Returns:
        Any: The object converted
    """
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj

    if isinstance(obj, Fraction):
        return float(obj)

    if isinstance(obj, enum.Enum):
        return obj.value

    if hasattr(obj, "__json__"):
        return obj.__json__()

    if dataclasses.is_dataclass(obj):
        return {f.name: to_serializable(getattr(obj, f.name))
                for f in dataclasses.fields(obj) if not f.name.startswith('_')}

    if isinstance(obj, dict):
        return {str(to_serializable(k)): to_serializable(v) for k, v in obj.items()}

    if isinstance(obj, (set, frozenset)):
        return sorted(to_serializable(e) for e in obj)

    if isinstance(obj, (list, tuple)):
        return [to_serializable(e) for e in obj]

    return str(obj)


def write_json(path: str, obj: Any):
    """Function to write an object as JSON with sorted keys, so that identical
    inputs always produce byte-identical files.

    Args:
        path (str): The destination file.
        obj (Any): The object to be written.
    """
    with open(path, "w") as fp:
        json.dump(to_serializable(obj), fp, sort_keys=True, indent=2)
        fp.write("\n")


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]):
    """Function to write a CSV file with a header line.

    Args:
        path (str): The destination file.
        header (Sequence[str]): The column names.
        rows (Iterable[Sequence[Any]]): The rows, serialized cell by cell.
    """
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([to_serializable(x) for x in row])


def ensure_dir(path: str) -> str:
    """Function to create a directory if missing.

    Args:
        path (str): The directory.

    Returns:
        str: The same path.
    """
    os.makedirs(path, exist_ok=True)
    return path


def to_log_level(level: Union[str, int]) -> int:
    """Function to return the numeric logging level from its name or value

    Args:
        level (Union[str, int]): The level, e.g. "DEBUG" or logging.DEBUG

    Returns:
        int: The logging level
    """
    if isinstance(level, str):
        return logging._nameToLevel[level.upper()]
    return level


def get_logger(name: str, filepath: str = None, log_level: Union[str, int] = logging.INFO) -> logging.Logger:
    """Function to create a logger or retrieve it if already created.

    Args:
        name (str): The name of the logger.
        filepath (str, optional): Path to the logging file, if required. Defaults to None.
        log_level (Union[str, int], optional): Log Level taken from the logging module. Defaults to logging.INFO.

    Returns:
        logging.Logger: The logger created/retrieved.
    """
    log_level = to_log_level(log_level)
    logger = logging.getLogger(name)
    logger.setLevel(log_level)
    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    handlers: List[logging.Handler] = []
    if not logger.handlers:
        handlers.append(logging.StreamHandler())
    if filepath:
        handlers.append(logging.FileHandler(filepath, mode="w"))
    for h in handlers:
        h.setFormatter(formatter)
        logger.addHandler(h)
    for h in logger.handlers:
        h.setLevel(log_level)
    return logger
