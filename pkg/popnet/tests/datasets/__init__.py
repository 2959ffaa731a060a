from popnet.tests.datasets.fixtures import *
