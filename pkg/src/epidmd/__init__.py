"""Network SEIR epidemic simulation and exact dynamic mode decomposition forecasting."""

__version__ = "0.1.0"
