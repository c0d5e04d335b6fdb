"""Evaluation metrics at peptide, epitope and antigen scale."""

from .antigen import (
    CRCurve,
    coverage,
    cr_auc_aggregate,
    cr_curve,
    ground_truth_regions,
    predicted_regions,
    redundancy,
    regions,
    residue_labels,
    sliding_window_scores,
)
from .peptide import (
    EpitopeEvalCase,
    accuracy,
    auc_epitope,
    ba_roc_auc,
    el_filter_mixmhc2,
    frank,
    rmse,
    roc_auc,
)

__all__ = [
    "CRCurve", "EpitopeEvalCase", "accuracy", "auc_epitope", "ba_roc_auc", "coverage",
    "cr_auc_aggregate", "cr_curve", "el_filter_mixmhc2", "frank", "ground_truth_regions",
    "predicted_regions", "redundancy", "regions", "residue_labels", "rmse", "roc_auc",
    "sliding_window_scores",
]
