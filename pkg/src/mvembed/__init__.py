"""Multiview embeddings: two-view CCA, MAXVAR and SUMCOR generalized CCA,
deep GCCA, synthetic fixtures and retrieval evaluation."""

__version__ = "0.1.0"
