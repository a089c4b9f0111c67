from .config import *
from .records import *
