"""Two-pathway completion model with hand-written gradients, training and checkpoints"""
from .errors import *
from .schemas import *
from .layers import *
from .model import *
from .optimizer import *
from .checkpoint import *
from .training import *
from .gradcheck import *
