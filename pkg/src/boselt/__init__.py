"""Lieb-Thirring lower bounds for interacting Bose gases: exclusion functions,
scattering lengths, explicit constants, density functionals and numerical
verifiers."""

__version__ = "0.1.0"

from .errors import (BoseltError, ConfigurationError, DegenerateConcentration, DomainError,  # noqa: F401
                     NumericalError, OracleFailure, ParseError, PreconditionError)
