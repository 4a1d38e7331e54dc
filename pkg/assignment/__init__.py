"""Matching costs, Hungarian assignment and the training objective"""
from .errors import *
from .schemas import *
from .losses import *
from .matching import *
from .objective import *
