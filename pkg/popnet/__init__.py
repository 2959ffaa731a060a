# -*- coding: utf-8 -*-
import popnet.settings
from popnet.settings import *

import popnet.exceptions
from popnet.exceptions import *

import popnet.utils
from popnet.utils import *

import popnet.grids
from popnet.grids import *

import popnet.losses
from popnet.losses import *

import popnet.config
from popnet.config import *

import popnet.networks
from popnet.networks import *

import popnet.readwrite
from popnet.readwrite import *

import popnet.metrics
from popnet.metrics import *

import popnet.generators
from popnet.generators import *

import popnet.tools
from popnet.tools import *
