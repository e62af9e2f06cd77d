"""
Test suite for esmcheck
"""

__version__ = "1.0.0"
