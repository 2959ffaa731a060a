# -*- coding: utf-8 -*-
"""Exceptions raised by popnet."""


class PopNetError(Exception):
    """Base class of all popnet errors."""


class ValidationError(PopNetError, ValueError):
    """A precondition or a type invariant is violated."""


class DegenerateInputError(ValidationError):
    """The input carries no usable scale (e.g. a constant raw depth map)."""


class DataError(PopNetError):
    """A dataset, report or checkpoint on disk cannot be used."""


class ConfigMismatchError(DataError):
    """A checkpoint was produced with another model configuration or format version."""


class NumericError(PopNetError, ArithmeticError):
    """A non-finite loss was met or a gradient verification failed.

    Parameters
    ----------
    message : str
        Diagnostic message.
    stems : list
        Stems of the samples involved (training batches), if any.
    dump_path : str
        Path of the diagnostic dump written before raising, if any.
    """

    def __init__(self, message, stems=None, dump_path=None):
        super(NumericError, self).__init__(message)
        self.stems = list(stems) if stems is not None else []
        self.dump_path = dump_path
