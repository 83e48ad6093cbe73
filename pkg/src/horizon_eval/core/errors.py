"""
Exception hierarchy for horizon-eval.
The CLI catches HorizonEvalError and turns it into an exit code.
"""

from typing import Optional


class HorizonEvalError(Exception):
    """Base class for all errors raised by horizon-eval."""


class ParseError(HorizonEvalError):
    """A line of an input file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        self.line = line
        self.source = source
        where = ""
        if source:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class FormatError(HorizonEvalError):
    """Input is syntactically valid but violates a format rule."""


class ContractError(HorizonEvalError, ValueError):
    """A caller violated a documented precondition."""


class ConfigError(HorizonEvalError):
    """Invalid configuration value."""
