"""
Utilities package for esmcheck
Logging setup and the shared exception hierarchy
"""

__version__ = "1.0.0"
