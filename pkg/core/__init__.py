"""
esmcheck core module
Application object, scenario parsing, builders and report writing
"""

__version__ = "1.0.0"
