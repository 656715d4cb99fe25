"""Exception hierarchy shared by all psi_lab modules."""


class PsiLabError(Exception):
    """Base class for all package errors."""


class ConfigError(PsiLabError, ValueError):
    """Invalid physical parameter or configuration document."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class DomainError(PsiLabError, ValueError):
    """Input outside the domain where a formula is defined."""


class EstimationError(PsiLabError):
    """Base class for fringe-extraction failures."""


class FringesUnresolvedError(EstimationError):
    """No fringe side peak stands out of the spectral noise floor."""


class UnidentifiableError(EstimationError):
    """The fringe parameters cannot be separated on this pixel geometry."""


class AmbiguityError(PsiLabError, ValueError):
    """Coarse acceleration is too uncertain to pick the fringe order."""


class SequencerError(PsiLabError, ValueError):
    """A measurement cycle cannot be compiled under the given constraints."""
