# -*- coding: utf-8 -*-
import sys
from popnet.cli import main

sys.exit(main())
