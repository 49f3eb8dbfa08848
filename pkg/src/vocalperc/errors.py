"""Exception types shared across the package.

The split matters to the CLI: usage problems exit 1, data/config problems
exit 2. Everything here is a ValueError subclass so plain scripts can catch
broadly.
"""


class VocalPercError(ValueError):
    """Base class for all package-specific errors."""


class UnsupportedFormatError(VocalPercError):
    """An input file is readable but uses an unsupported encoding/rate."""


class ParseError(VocalPercError):
    """An input file is malformed (truncated RIFF chunk, bad CSV row...)."""


class ConfigError(VocalPercError):
    """A configuration value is outside its documented set."""


class ContractError(VocalPercError):
    """An argument violates a documented precondition."""
