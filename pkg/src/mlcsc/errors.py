"""Exception types shared across the package."""

from __future__ import annotations


class MlcscError(Exception):
    """Base class for all package-specific errors."""


class PgmParseError(MlcscError, ValueError):
    """Malformed PGM file; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class DegenerateAtomError(MlcscError, ValueError):
    """An atom norm is (numerically) zero or non-finite; carries the indices."""

    def __init__(self, message: str, atom_indices):
        super().__init__(f"{message}: atoms {list(atom_indices)}")
        self.atom_indices = tuple(int(i) for i in atom_indices)


class DivergenceError(MlcscError, ArithmeticError):
    """Non-finite values appeared during optimization (step size too large)."""


class ConfigError(MlcscError, ValueError):
    """Invalid run configuration; message names the offending section/field."""


class DataError(MlcscError, ValueError):
    """Corpus or input file cannot be read or is inconsistent."""
