"""Geometric and primitive-quality evaluation"""
from .errors import *
from .schemas import *
from .geometric import *
from .primitive import *
from .evaluation import *
