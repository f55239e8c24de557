"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: DataError subclasses signal bad input
(exit 2), InvariantError subclasses signal an internal contract violation
(exit 3). Control-flow signals like NoTriggers derive from the base class
and are normally caught by callers.
"""


class AptwarnError(Exception):
    """Base class for all package errors."""


class DataError(AptwarnError):
    """Malformed or inconsistent input data."""


class InvariantError(AptwarnError):
    """An internal invariant was violated; indicates a bug upstream."""


class OutOfRange(InvariantError):
    """A time point lies outside the thread's 1..t_max range."""


class NoTriggers(AptwarnError):
    """The condition never holds, so the frequency ratio is undefined."""


class EmptyThread(DataError):
    """A thread with zero days cannot be learned from."""


class ZeroPrior(AptwarnError):
    """Percent increase is undefined for a head that never occurs."""


class StrictSpanError(DataError):
    """A record falls outside the requested date span in strict mode."""


class ParseError(DataError):
    """An input file row could not be parsed; message carries the location."""


class MissingProvenance(InvariantError):
    """A triggered condition has no provenance entry for its day."""


class EmptyHistogram(DataError):
    """The baseline generator needs at least one observed daily count."""


class ConfigInvalid(DataError):
    """A configuration value violates its documented constraints."""
