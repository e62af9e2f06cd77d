"""
Geometry package for esmcheck
Target fields, finite differences and sampled spacetime fields
"""

__version__ = "1.0.0"
