"""Interpretable within-subject EEG decoding of attention-shift intent.

Synthetic preparatory-window EEG generation, band-structured feature
extraction over a 16-region montage, stratified univariate selection,
a from-scratch random forest with exact per-tree attribution, and
cross-validated evaluation with topographic reporting.
"""

__version__ = "0.1.0"
