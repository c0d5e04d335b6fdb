"""Input checking helpers in the spirit of sklearn.utils.validation."""

from __future__ import annotations

import numpy as np

from .core import validate_sequence
from .exceptions import ValidationError


def check_peptide_allele_pairs(X) -> list[tuple[str, str]]:
    """Coerce ``X`` into a list of validated ``(peptide, allele)`` pairs.

    Accepts a sequence of pairs, a 2-column array, or a DataFrame with
    ``peptide`` and ``allele`` columns.
    """
    if hasattr(X, "columns") and {"peptide", "allele"} <= set(X.columns):
        rows = zip(X["peptide"], X["allele"])
    else:
        rows = X
    out = []
    for row in rows:
        try:
            peptide, allele = row
        except (TypeError, ValueError):
            raise ValidationError(f"expected (peptide, allele) pairs, got {row!r}") from None
        out.append((validate_sequence(str(peptide)), str(allele)))
    return out


def check_scores(y, name: str = "y", n: int | None = None) -> np.ndarray:
    """1-d float array in [0, 1] with optional length check."""
    arr = np.asarray(y, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if n is not None and arr.size != n:
        raise ValidationError(f"{name} has {arr.size} entries, expected {n}")
    if np.isnan(arr).any() or (arr < 0).any() or (arr > 1).any():
        raise ValidationError(f"{name} must lie in [0, 1]")
    return arr
