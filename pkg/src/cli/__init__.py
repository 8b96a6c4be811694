"""
Sparse2Dense - CLI Package
Command-line interface for the codec.
"""

from .cli import main, cli

__all__ = ['main', 'cli']
