"""
Sparse2Dense - Main Package
Keypoint-driven human video codec with dense motion synthesis.
"""

__version__ = '1.0.0'
__author__ = 'Sparse2Dense Team'
__license__ = 'MIT'

from .config import Config, CodecConfig
from .utils import Utils

__all__ = [
    'Config',
    'CodecConfig',
    'Utils',
    '__version__',
    '__author__',
    '__license__',
]
