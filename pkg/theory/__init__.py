"""
Theory package for esmcheck
Field-equation residuals, duality action and Dirac quantization
"""

__version__ = "1.0.0"
