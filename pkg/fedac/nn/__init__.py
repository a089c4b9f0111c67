"""Neural-network core: MLP forward/backward and the regularized local step."""

from .mlp import *
