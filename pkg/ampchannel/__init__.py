"""Binary optical channels through linear and saturable amplifiers."""

__version__ = "0.3.0"
