"""Multi-agent RB allocation for D2D pairs underlaying a cellular downlink."""

__version__ = "0.1.0"
