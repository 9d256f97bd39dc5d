"""Exception types shared across the toolkit.

Every error carries a stable machine-readable ``code`` so callers (and the
CLI's JSON error output) can dispatch on it without parsing messages.
"""


class SpxError(Exception):
    """Base error with a stable code string."""

    code = "error"

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code

    def to_json(self):
        return {"code": self.code, "message": str(self)}


class RasterIOError(SpxError):
    """File decode/encode failures (corrupt image, bad magic, ...)."""

    code = "io-error"


class ValidationError(SpxError):
    """Inputs violating a documented precondition."""

    code = "invalid-input"


class RefineBatchError(SpxError):
    """One or more proposals in a batch failed; carries (index, error) pairs."""

    code = "refine-batch"

    def __init__(self, failures):
        self.failures = list(failures)
        lines = "; ".join(f"[{i}] {err}" for i, err in self.failures)
        super().__init__(f"{len(self.failures)} proposal(s) failed: {lines}")
