"""Exception family shared across the pipeline.

Validation-type errors (bad config, broken files, integrity violations)
map to CLI exit code 1; transport/runtime failures map to exit code 2.
"""


class LexRagError(Exception):
    """Base class for all package errors."""


class ValidationError(LexRagError):
    """Configuration or precondition problem detected before real work."""


class CorpusLoadError(ValidationError):
    """A corpus file could not be read or decoded."""


class IntegrityError(ValidationError):
    """Data violates a structural invariant (spans, quotes, vectors, ids)."""


class SamplingError(ValidationError):
    """Benchmark subsetting cannot satisfy the requested sizes."""


class ProvenanceError(ValidationError):
    """An artifact was produced under a different configuration than requested."""


class TemplateError(ValidationError):
    """A prompt template has an unresolvable slot."""


class TransportError(LexRagError):
    """A remote call failed after retries.

    ``attempts`` records how many tries were made before giving up.
    """

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts
