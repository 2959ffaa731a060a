# -*- coding: utf-8 -*-
from .popping import *
from .separation import *
from .semantic import *
