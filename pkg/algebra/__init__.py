"""
Algebra package for esmcheck
Exact symplectic linear algebra, integer normal forms and local systems
"""

__version__ = "1.0.0"
