"""Radio-map sensing with a ceiling-mounted large intelligent surface."""

__version__ = "0.1.0"
