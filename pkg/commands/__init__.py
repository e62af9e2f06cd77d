"""
Commands package for esmcheck
One command class per CLI verb, all sharing BaseCommand
"""

__version__ = "1.0.0"
