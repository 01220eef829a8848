"""Probabilistic label trees and hierarchical softmax for extreme multi-label classification."""

__version__ = "0.1.0"
