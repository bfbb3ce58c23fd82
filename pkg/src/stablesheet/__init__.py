"""stablesheet: synthesis and verification of heavy-tailed anisotropic random sheets."""

__version__ = "0.1.0"
