"""Desk-scale curriculum-learning laboratory.

Subpackages/modules:
  nn          minimal deterministic trainer (MLP + small convnet)
  data        datasets, loaders, synthetic generator, label noise
  scoring     difficulty scoring functions (loss / learned epoch / c-score)
  pacing      closed-form pacing function families g_(a,b)(t)
  curriculum  ordered training loop with dynamic training-set size
  analysis    rank correlations, baselines, heatmaps, histograms
  harness     sweep orchestration and result persistence
  cli         command-line entry points
"""

__version__ = "0.1.0"
