"""Exception hierarchy shared by all pipeline stages.

Exit-code mapping for the CLI lives in cli.py; library code raises these
and never calls sys.exit.
"""


class CcdError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(CcdError):
    """A document (manifest, config, spec file) violates its schema."""


class PhaseOverlap(SchemaError):
    """Phase annotations overlap or are mis-ordered."""


class MissingFile(CcdError):
    """A referenced frame or mask file does not exist on disk."""


class DimensionMismatch(CcdError):
    """Stored image dimensions disagree with the manifest resolution."""


class EmptyMask(CcdError):
    """Operation requires a non-empty mask."""


class EmptyInput(CcdError):
    """Operation requires non-empty input."""


class FramesUnavailable(CcdError):
    """The requested stage needs frame pixels but the bundle has none."""


class BothMasksEmpty(CcdError):
    """Crop requested but neither iris nor pupil mask has any pixels."""


class ParseError(CcdError):
    """Adjudicator response could not be parsed into a verdict."""


class EndpointUnreachable(CcdError):
    """VLM endpoint did not answer after all retries."""


class Misconfigured(CcdError):
    """Invalid or contradictory configuration."""


class MixedKinds(CcdError):
    """Verdicts or decisions of different complication kinds were mixed."""


class LabelMissing(CcdError):
    """Ground-truth labels file does not cover a corpus video."""


class InvalidSpec(CcdError):
    """Phantom spec violates its invariants."""
