"""
ICI Whitening Simulator

Two-cell MIMO-OFDM interference simulator with Z-score refined deep SVDD
interference detection, adaptive interference whitening, one-class baselines
and a Monte-Carlo check of the covariance concentration bound.
"""

__version__ = "1.0.0"
