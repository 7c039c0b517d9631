"""Forecasting neighbourhood cultural dimensions with graph neural networks."""
__version__ = "0.1.0"
