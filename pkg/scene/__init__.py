"""Synthetic labeled shapes, partial scans and LPC files"""
from .errors import *
from .schemas import *
from .generator import *
from .partial import *
from .lpc import *
