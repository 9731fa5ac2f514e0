"""Model-based generation of conformance test suites from EFSM protocol models."""

__version__ = "0.1.0"
