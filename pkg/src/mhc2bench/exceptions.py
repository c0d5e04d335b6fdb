"""Exception and warning classes raised across the toolkit.

The CLI maps the three error families onto exit codes: format errors -> 2,
validation errors -> 3, degenerate metrics -> 4.
"""


class Mhc2BenchError(Exception):
    """Base class for every error raised by mhc2bench."""


class FormatError(Mhc2BenchError):
    """Malformed input file."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class ValidationError(Mhc2BenchError, ValueError):
    """Input violates a domain rule."""


class EmptySequence(ValidationError):
    pass


class InvalidResidue(ValidationError):
    def __init__(self, position, char):
        self.position = position
        self.char = char
        super().__init__(f"invalid residue {char!r} at position {position}")


class UnparsableAllele(ValidationError):
    pass


class NonPositiveIC50(ValidationError):
    pass


class NoValidPerturbation(ValidationError):
    pass


class NoValidWindow(ValidationError):
    def __init__(self, k, antigen_id=None):
        self.k = k
        self.antigen_id = antigen_id
        super().__init__(f"no uncut window of size {k} in antigen {antigen_id!r}")


class LengthMismatch(ValidationError):
    pass


class PeptideTooShort(ValidationError):
    pass


class UnknownAllele(ValidationError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class NoPositives(ValidationError):
    pass


class DegenerateMetricError(Mhc2BenchError, ValueError):
    """A metric is undefined for the given input."""


class EmptyInput(DegenerateMetricError):
    pass


class DegenerateClasses(DegenerateMetricError):
    pass


class NoCandidates(DegenerateMetricError):
    pass


class NoGroundTruth(DegenerateMetricError):
    pass


class NoCases(DegenerateMetricError):
    pass


class EmptyTestWarning(UserWarning):
    """Leakage repair moved every test record to train."""


class InsufficientStratumWarning(UserWarning):
    """An allele stratum is too small to contribute to a stratified sample."""


class FewNegativesWarning(UserWarning):
    """Fewer eligible negative windows than requested."""
