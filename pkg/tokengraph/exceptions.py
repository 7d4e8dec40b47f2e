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


class TokenGraphException(Exception):
    """Base class of every exception raised by the package"""
    pass


class ParseException(TokenGraphException):
    """Exception to be thrown when a textual field does not respect its grammar

    Attributes:
        offset (int): The byte offset in the input text where the problem was found.
    """

    def __init__(self, message: str, offset: int = 0):
        super().__init__("{} (at offset {})".format(message, offset))
        self.offset = offset


class QuantityMismatchException(TokenGraphException):
    """Exception to be thrown when combining quantities of different symbol or precision"""
    pass


class IngestException(TokenGraphException):
    """Exception to be thrown when an input file cannot be read"""
    pass


class DatasetFrozenException(TokenGraphException):
    """Exception to be thrown when modifying a frozen dataset or analysing an unfrozen one"""
    pass


class FitException(TokenGraphException):
    """Exception to be thrown when a distribution has not enough usable points to be fitted"""
    pass


class EmptyInputException(TokenGraphException):
    """Exception to be thrown when an operation requires a non-empty range, list or set"""
    pass


class UnknownNodeException(TokenGraphException):
    """Exception to be thrown when the requested nodes do not belong to the graph"""
    pass


class InconsistentIndexException(TokenGraphException):
    """Exception to be thrown when the global sender index does not cover a sender of a context"""
    pass


class UndefinedQuantityException(TokenGraphException):
    """Exception to be thrown when quantity factors are requested for a token never issued"""
    pass


class InvalidConfigException(TokenGraphException):
    """Exception to be thrown when a configuration violates its constraints"""
    pass


class UsageException(TokenGraphException):
    """Exception to be thrown when the command line is not valid"""
    pass
