"""Domain exceptions raised by the simulation, counterfactual and storage layers.

Configuration and input problems subclass ``ValueError`` so callers that only
care about "bad arguments" can catch them together with pydantic's
``ValidationError``.
"""

from __future__ import annotations

from collections.abc import Iterable
from pathlib import Path


class SimulationError(Exception):
    """Base class for every error raised by this package."""


class InvalidConfigError(SimulationError, ValueError):
    """Market or experiment parameters outside their valid domain."""


class InvalidInputError(SimulationError, ValueError):
    """Arguments that are individually well-typed but mutually inconsistent."""


class BracketError(SimulationError):
    """The threshold predicate does not change sign over the search interval."""

    def __init__(
        self,
        kind: str,
        d_lo: int,
        d_hi: int,
        estimate_lo: float,
        estimate_hi: float,
    ) -> None:
        self.kind = kind
        self.d_lo = d_lo
        self.d_hi = d_hi
        self.estimate_lo = estimate_lo
        self.estimate_hi = estimate_hi
        super().__init__(
            f"{kind} threshold not bracketed by [{d_lo}, {d_hi}]: "
            f"estimate at d={d_lo} is {estimate_lo:.6g}, at d={d_hi} is {estimate_hi:.6g}"
        )


class RosterParseError(SimulationError, ValueError):
    """An input file (roster, programs, result table) does not match its schema."""

    def __init__(self, path: Path | str, line: int, message: str) -> None:
        self.path = Path(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class ReferentialIntegrityError(SimulationError, ValueError):
    """Duplicate or dangling identifiers across roster and programs."""

    def __init__(self, message: str, offenders: Iterable[str]) -> None:
        self.offenders = sorted(set(offenders))
        super().__init__(f"{message}: {', '.join(self.offenders)}")


class EnumerationLimitError(SimulationError):
    """Instance too large for brute-force enumeration."""

    def __init__(self, size: int, limit: int) -> None:
        self.size = size
        self.limit = limit
        super().__init__(
            f"brute-force enumeration refuses {size} agents on one side (limit is {limit})"
        )


class TableWriteError(SimulationError, OSError):
    """Writing a result file failed."""

    def __init__(self, path: Path | str, cause: BaseException) -> None:
        self.path = Path(path)
        super().__init__(f"cannot write {self.path}: {cause}")
