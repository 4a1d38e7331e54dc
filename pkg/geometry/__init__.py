"""Quadric primitives: algebra, fitting, sampling, projection and RANSAC extraction"""
from .errors import *
from .schemas import *
from .quadric import *
from .fitting import *
from .sampling import *
from .ransac import *
