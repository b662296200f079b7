"""Exception hierarchy shared across the package.

Domain / validation problems derive from ValueError so they behave like
ordinary bad-argument errors; numeric failures derive from RuntimeError.
The CLI maps the two groups to distinct exit codes.
"""


class GauselabError(Exception):
    """Base class for every error raised by this package."""


class InvalidParams(GauselabError, ValueError):
    """A parameter or option is out of its admissible range."""


class DomainError(GauselabError, ValueError):
    """An operation was evaluated outside its mathematical domain
    (e.g. the coexistence state does not exist at this delay)."""


class IntegrationError(GauselabError, RuntimeError):
    """The integrator left the admissible region (negative or
    non-finite state)."""


class ConsistencyError(GauselabError, RuntimeError):
    """An internal cross-check failed; results would not be trustworthy."""
