"""Sublinear core-sets and two-pass streaming for MaxCut and MAX-AGREE clustering"""

__version__ = "0.1.0"
