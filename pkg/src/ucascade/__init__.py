"""Uncertainty-routed cascade between a small sentiment model and an MLLM."""

__version__ = "0.1.0"
