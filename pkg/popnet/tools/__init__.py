# -*- coding: utf-8 -*-

from popnet.tools.augment import *
from popnet.tools.training import *
from popnet.tools.evaluation import *
from popnet.tools.gradcheck import *
from popnet.tools.plot import *
