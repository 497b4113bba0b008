"""
Utilities module - configuration, image I/O, masks and dataset preparation
"""

from .config import RunConfig
from .logging_setup import setup_logging

__all__ = ['RunConfig', 'setup_logging']
