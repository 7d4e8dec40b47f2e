import json
import os
from typing import List

from tokengraph.ingest import (FILE_NAMES, Dataset, IngestConfig, action_to_record,
                               load_dataset)
from tokengraph.model import (AccountCreation, ActionKind, CreateAction,
                              IssueAction, TokenId, TransferAction,
                              parse_quantity)

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
SMALL = os.path.join(FIXTURES, "small")
BASE_MS = 1528588800000


def fixture(*parts: str) -> str:
    return os.path.join(FIXTURES, *parts)


def small_paths() -> List[List[str]]:
    return [[os.path.join(SMALL, FILE_NAMES[k])] for k in (
        ActionKind.TRANSFER, ActionKind.ISSUE, ActionKind.CREATE, ActionKind.ACCOUNT)]


def transfer(i: int, token: str, sender: str, receiver: str, quantity: str, memo: str = "") -> TransferAction:
    contract, symbol = token.split("@")
    return TransferAction("t{}".format(i), BASE_MS + i * 1000, TokenId(contract, symbol), sender, receiver,
                          parse_quantity(quantity), memo)


def issue(i: int, token: str, receiver: str, quantity: str, memo: str = "") -> IssueAction:
    contract, symbol = token.split("@")
    return IssueAction("i{}".format(i), BASE_MS + i * 1000, TokenId(contract, symbol), contract, receiver,
                       parse_quantity(quantity), memo)


def create(i: int, token: str, creator: str, max_supply: str) -> CreateAction:
    contract, symbol = token.split("@")
    return CreateAction("c{}".format(i), BASE_MS + i * 1000, TokenId(contract, symbol), creator,
                        parse_quantity(max_supply))


def account(i: int, creator: str, name: str) -> AccountCreation:
    return AccountCreation("a{}".format(i), BASE_MS + i * 1000, creator, name)


def write_dataset(directory: str, transfers=(), issues=(), creates=(), accounts=(),
                  config: IngestConfig = None) -> Dataset:
    """Writes the actions as logs in the directory and loads them back."""
    paths = []
    for kind, actions in ((ActionKind.TRANSFER, transfers), (ActionKind.ISSUE, issues),
                          (ActionKind.CREATE, creates), (ActionKind.ACCOUNT, accounts)):
        path = os.path.join(directory, FILE_NAMES[kind])
        with open(path, "w") as fp:
            for a in actions:
                fp.write(json.dumps(action_to_record(a)) + "\n")
        paths.append([path])
    return load_dataset(*paths, config=config)
