# -*- coding: utf-8 -*-
from popnet.testing.utils import *
