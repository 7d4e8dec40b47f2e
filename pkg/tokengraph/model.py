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
"""Core domain types shared by every module: token identities, fixed-point
quantities and the four kinds of actions exported from the chain."""
import enum
import re
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple

from .exceptions import ParseException, QuantityMismatchException
from .utility import get_logger

MAX_PRECISION = 18
MAX_ACCOUNT_LENGTH = 13
REGULAR_SYMBOL_LENGTH = 7

_ACCOUNT_RE = re.compile(r'^[a-z1-5.]{1,12}$')
_DECIMAL_RE = re.compile(r'^(0|[1-9][0-9]*)(?:\.([0-9]+))?$')
_SYMBOL_RE = re.compile(r'^[A-Z]+$')

_logger = get_logger("Model")


class ActionKind(enum.Enum):
    """The kinds of actions found in the exported logs"""
    TRANSFER = "transfer"
    ISSUE = "issue"
    CREATE = "create"
    ACCOUNT = "account"


@dataclass(frozen=True, order=True)
class TokenId:
    """Identity of a token, i.e. the hosting contract plus the symbol.
    Tokens sharing a symbol under different contracts are distinct.

    Attributes:
        contract (str): The account hosting the token contract.
        symbol (str): The uppercase token symbol.
    """
    __slots__ = ("contract", "symbol")
    contract: str
    symbol: str

    def __str__(self) -> str:
        return "{}@{}".format(self.contract, self.symbol)

    def __json__(self) -> str:
        return str(self)


@dataclass(frozen=True)
class Quantity:
    """Fixed-point token quantity stored as an integer mantissa, so that sums
    over millions of actions stay exact.

    Attributes:
        units (int): The mantissa, i.e. the amount times 10^precision.
        precision (int): Number of digits after the decimal point.
        symbol (str): The token symbol.
    """
    __slots__ = ("units", "precision", "symbol")
    units: int
    precision: int
    symbol: str

    def __post_init__(self):
        if self.units < 0:
            raise ValueError("Quantity cannot be negative")
        if not 0 <= self.precision <= MAX_PRECISION:
            raise ValueError("Precision {} out of range".format(self.precision))

    @staticmethod
    def zero(symbol: str, precision: int = 0) -> 'Quantity':
        return Quantity(0, precision, symbol)

    @property
    def amount(self) -> Fraction:
        """Fraction: The exact decimal amount."""
        return Fraction(self.units, 10 ** self.precision)

    def render(self) -> str:
        """Method to render the quantity using exactly `precision` fractional digits.

        Returns:
            str: The textual quantity, e.g. 10000.0000 EOSNOW
        """
        if not self.precision:
            return "{} {}".format(self.units, self.symbol)
        integer, fraction = divmod(self.units, 10 ** self.precision)
        return "{}.{} {}".format(integer, str(fraction).zfill(self.precision), self.symbol)

    def __str__(self) -> str:
        return self.render()

    def __json__(self) -> str:
        return self.render()

    def __check_compatible(self, other: 'Quantity'):
        if not isinstance(other, Quantity):
            raise TypeError("Cannot combine a Quantity with {}".format(type(other).__name__))
        if other.symbol != self.symbol or other.precision != self.precision:
            raise QuantityMismatchException(
                "Cannot combine {} with {}".format(self, other))

    def __add__(self, other: 'Quantity') -> 'Quantity':
        self.__check_compatible(other)
        return Quantity(self.units + other.units, self.precision, self.symbol)

    def __sub__(self, other: 'Quantity') -> 'Quantity':
        self.__check_compatible(other)
        return Quantity(self.units - other.units, self.precision, self.symbol)


@dataclass(frozen=True)
class TransferAction:
    """A token transfer, as in the exported transfer table.

    Attributes:
        txid (str): The transaction id.
        block_time (int): Block timestamp in epoch milliseconds (UTC).
        token (TokenId): The token transferred.
        sender (str): The account sending the tokens (`from` in the logs).
        receiver (str): The account receiving the tokens (`to` in the logs).
        quantity (Quantity): The amount transferred.
        memo (str): The free transfer memo.
    """
    __slots__ = ("txid", "block_time", "token", "sender", "receiver", "quantity", "memo")
    txid: str
    block_time: int
    token: TokenId
    sender: str
    receiver: str
    quantity: Quantity
    memo: str

    def __post_init__(self):
        if not self.sender or not self.receiver:
            raise ValueError("Transfer endpoints cannot be empty")
        if self.quantity.symbol != self.token.symbol:
            raise QuantityMismatchException("Quantity symbol {} does not match token {}".format(
                self.quantity.symbol, self.token))


@dataclass(frozen=True)
class IssueAction:
    """An issue of new tokens from the issuer to an account.

    Attributes:
        txid (str): The transaction id.
        block_time (int): Block timestamp in epoch milliseconds (UTC).
        token (TokenId): The token issued.
        issuer (str): The issuing account.
        receiver (str): The account credited (`to` in the logs).
        quantity (Quantity): The amount issued, strictly positive.
        memo (str): The issue memo.
    """
    __slots__ = ("txid", "block_time", "token", "issuer", "receiver", "quantity", "memo")
    txid: str
    block_time: int
    token: TokenId
    issuer: str
    receiver: str
    quantity: Quantity
    memo: str

    def __post_init__(self):
        if self.quantity.units <= 0:
            raise ValueError("Issued quantity must be positive")
        if self.quantity.symbol != self.token.symbol:
            raise QuantityMismatchException("Quantity symbol {} does not match token {}".format(
                self.quantity.symbol, self.token))


@dataclass(frozen=True)
class CreateAction:
    """The creation of a token through a token contract.

    Attributes:
        txid (str): The transaction id.
        block_time (int): Block timestamp in epoch milliseconds (UTC).
        token (TokenId): The token created.
        creator (str): The account creating the token.
        max_supply (Quantity): The maximum supply declared.
    """
    __slots__ = ("txid", "block_time", "token", "creator", "max_supply")
    txid: str
    block_time: int
    token: TokenId
    creator: str
    max_supply: Quantity

    def __post_init__(self):
        if self.max_supply.symbol != self.token.symbol:
            raise QuantityMismatchException("Max supply symbol {} does not match token {}".format(
                self.max_supply.symbol, self.token))


@dataclass(frozen=True)
class AccountCreation:
    """The creation of the account `name` paid by `creator`.

    Attributes:
        txid (str): The transaction id.
        block_time (int): Block timestamp in epoch milliseconds (UTC).
        creator (str): The creator (parent) account.
        name (str): The new account.
    """
    __slots__ = ("txid", "block_time", "creator", "name")
    txid: str
    block_time: int
    creator: str
    name: str


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def _first_mismatch(text: str, allowed: str) -> int:
    for i, ch in enumerate(text):
        if ch not in allowed:
            return i
    return len(text)


def _decimal_error_index(number: str) -> int:
    seen_dot = False
    for i, ch in enumerate(number):
        if ch == '.':
            if seen_dot or i == 0 or i == len(number) - 1:
                return i
            seen_dot = True
        elif not ch.isdigit() or not ch.isascii():
            return i
        elif i == 1 and number[0] == '0':
            # leading zero
            return i
    return 0


def parse_symbol(text: str, base_offset: int = 0) -> str:
    """Function to validate a token symbol. Uppercase letters only; symbols
    longer than the usual 7 characters are accepted with a warning.

    Args:
        text (str): The symbol.
        base_offset (int, optional): Offset of the symbol in the enclosing text. Defaults to 0.

    Raises:
        ParseException: When the symbol is empty or contains other characters.

    Returns:
        str: The symbol.
    """
    if not text:
        raise ParseException("missing symbol", base_offset)
    if not _SYMBOL_RE.match(text):
        bad = _first_mismatch(text, "ABCDEFGHIJKLMNOPQRSTUVWXYZ")
        raise ParseException("invalid symbol {!r}".format(text), base_offset + _byte_offset(text, bad))
    if len(text) > REGULAR_SYMBOL_LENGTH:
        _logger.warning("Symbol {} longer than {} characters".format(text, REGULAR_SYMBOL_LENGTH))
    return text


def parse_quantity(text: str) -> Quantity:
    """Function to parse a textual quantity `<decimal> <SYMBOL>`.

    Args:
        text (str): The text, e.g. 10000.0000 EOSNOW

    Raises:
        ParseException: When the symbol is missing, the amount negative or the decimal malformed.

    Returns:
        Quantity: The parsed quantity; rendering it gives back the same text.
    """
    if not isinstance(text, str):
        raise ParseException("quantity must be a string", 0)
    if text.startswith('-'):
        raise ParseException("negative amount", 0)
    space = text.find(' ')
    if space < 0:
        raise ParseException("missing symbol", _byte_offset(text, len(text)))
    number, symbol = text[:space], text[space + 1:]
    match = _DECIMAL_RE.match(number)
    if not match:
        bad = _decimal_error_index(number)
        raise ParseException("malformed decimal {!r}".format(number), _byte_offset(text, bad))
    integer, fraction = match.group(1), match.group(2) or ''
    if len(fraction) > MAX_PRECISION:
        raise ParseException("precision above {}".format(MAX_PRECISION),
                             _byte_offset(text, len(integer) + 1 + MAX_PRECISION))
    parse_symbol(symbol, _byte_offset(text, space + 1))
    return Quantity(int(integer + fraction), len(fraction), sys.intern(symbol))


def parse_token_id(text: str) -> TokenId:
    """Function to parse the `contract@symbol` identity of a token.

    Args:
        text (str): The text, e.g. eosnowbanker@EOSNOW

    Raises:
        ParseException: When there is not exactly one `@`, a side is empty, the contract
            is not a valid account name or the symbol not a valid symbol.

    Returns:
        TokenId: The token identity.
    """
    if not isinstance(text, str):
        raise ParseException("token must be a string", 0)
    count = text.count('@')
    if count != 1:
        offset = len(text) if not count else text.index('@', text.index('@') + 1)
        raise ParseException("expected exactly one '@' in {!r}".format(text), _byte_offset(text, offset))
    contract, symbol = text.split('@')
    if not contract:
        raise ParseException("empty contract", 0)
    if not symbol:
        raise ParseException("empty symbol", _byte_offset(text, len(text)))
    parse_account(contract, "contract")
    parse_symbol(symbol, _byte_offset(text, len(contract) + 1))
    return TokenId(contract, symbol)


def parse_account(name: str, field: str = "account") -> Tuple[str, bool]:
    """Function to validate an account name. Only emptiness and length are
    errors; names outside the regular charset are returned as irregular so
    that callers can report them, since real chain data contains such names.

    Args:
        name (str): The account name.
        field (str, optional): The field name used in error messages. Defaults to "account".

    Raises:
        ParseException: When the name is empty or too long.

    Returns:
        Tuple[str, bool]: The name and whether it is regular.
    """
    if not isinstance(name, str) or not name:
        raise ParseException("empty {}".format(field), 0)
    if len(name) > MAX_ACCOUNT_LENGTH:
        raise ParseException("{} {!r} longer than {} characters".format(
            field, name, MAX_ACCOUNT_LENGTH), _byte_offset(name, MAX_ACCOUNT_LENGTH))
    return name, bool(_ACCOUNT_RE.match(name))
