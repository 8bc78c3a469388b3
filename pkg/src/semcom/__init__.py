"""Semantic text transmission with adaptive-depth transformers, plus classic coding baselines."""

__all__ = ["__version__"]
__version__ = "0.1.0"
