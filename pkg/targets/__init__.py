"""Online target induction: nearest-neighbour label transfer and patch voting"""
from .schemas import *
from .induction import *
