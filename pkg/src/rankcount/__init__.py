"""Weakly-supervised counting from pairwise ranking judgments.

Pairwise "which image has more people" judgments are stored in a DAG and
expanded by transitivity, a small potential network is trained with a
ranking hinge loss (optionally mixed with count regression), and potentials
are converted to absolute counts through a linear map fitted on a small
anchor set of images with known counts.
"""

__version__ = "0.1.0"
