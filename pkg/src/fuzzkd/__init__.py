"""fuzzkd: fuzzy-weighted knowledge distillation at desk scale.

Subpackages cover the fuzzy weighting engine, distillation losses with
analytic gradients, pixel-level enhancement and wavelet fusion, a genetic
student-model search, a from-scratch training harness, evaluation metrics,
dataset splitting/balancing and the ``fuzzkd`` CLI.
"""

__version__ = "0.1.0"
