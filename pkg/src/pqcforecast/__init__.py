"""Time-series forecasting with a simulated parameterised quantum circuit and a BiLSTM baseline."""

__version__ = "0.1.0"
