"""Exception types shared across the package."""

from __future__ import annotations


class FactorError(ValueError):
    """Base error; ``code`` is a stable machine-readable identifier."""

    code = "factor_error"

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


class IngestError(FactorError):
    code = "ingest_error"


class DimensionError(FactorError):
    code = "dimension_error"


class RankError(FactorError):
    code = "rank_error"


class HermitianError(FactorError):
    code = "not_hermitian"


class GridError(FactorError):
    code = "grid_error"
