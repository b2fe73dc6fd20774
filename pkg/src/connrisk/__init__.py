"""Decision-support models for missed flight-connection risk."""

__version__ = "0.1.0"
