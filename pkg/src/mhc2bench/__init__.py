"""Curation and benchmark evaluation toolkit for MHC-II antigen presentation data."""

__version__ = "0.1.0"

from .core import (AMINO_ACIDS, AlleleId, Antigen, AssayRecord, DatasetSplit, EpitopeAnnotation,
                   normalize_allele, validate_sequence)
from .pssm import PSSMPredictor

__all__ = [
    "AMINO_ACIDS", "AlleleId", "Antigen", "AssayRecord", "DatasetSplit", "EpitopeAnnotation",
    "PSSMPredictor", "normalize_allele", "validate_sequence", "__version__",
]
