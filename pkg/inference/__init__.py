"""Confidence scoring, selection, refinement and export of predicted primitives"""
from .errors import *
from .schemas import *
from .selection import *
from .export import *
from .predictor import *
