"""
Core Module

Version, settings, error types and seeded random streams shared by every other package.
"""

__version__ = "1.0.0"
__author__ = "ruinsim contributors"
