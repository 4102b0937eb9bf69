"""
ACP-PHONON - Common utilities

Exception hierarchy, logging mixin, thread configuration and stage timing
shared by the solver modules and the command line processes.

Copyright (c) 2019 The acp-phonon developers
"""
import os
import time
import logging
import contextlib
import collections

THREADS_ENV = "ACP_PHONON_THREADS"

class AcpException(RuntimeError):
    """
    Base class for all errors raised by the library

    The ``exit_code`` class attribute is the process exit status used by
    the command line interface when the error is not caught.
    """
    exit_code = 1

    def __init__(self, msg, **diagnostics):
        RuntimeError.__init__(self, msg)
        for key, value in diagnostics.items():
            setattr(self, key, value)

class ConfigError(AcpException):
    """ Invalid or unreadable run configuration """
    exit_code = 2

class ModelError(ConfigError):
    """ Invalid grid, kernel or atomic configuration arguments """

class ScfError(AcpException):
    """
    Failure of the self-consistent field iteration

    Carries ``residual_history`` and, during relaxation or finite
    differences, the ``step`` at which it happened.
    """
    exit_code = 3
    residual_history = ()
    step = None

class EigensolverError(ScfError):
    """ Eigensolver did not reach the requested residual """
    residual = None

class ResponseError(AcpException):
    """
    Failure in Sternheimer, Dyson, ACP or dynamical matrix assembly
    """
    exit_code = 4
    residual = None
    residual_history = ()
    index = None
    condition = None

class LogSource(object):
    """
    Mixin providing a per-class logger

    The logger name is ``<module>.<class>`` so that verbosity can be
    controlled per solver.
    """

    @property
    def logger(self):
        return logging.getLogger("%s.%s" % (type(self).__module__, type(self).__name__))

    def debug(self, *args, **kwargs):
        self.logger.debug(*args, **kwargs)

    def warn(self, *args, **kwargs):
        self.logger.warning(*args, **kwargs)

    def debug_enabled(self):
        return self.logger.isEnabledFor(logging.DEBUG)

def get_num_threads():
    """
    :return: Number of worker threads for parallel solves, from
             ``ACP_PHONON_THREADS`` if set, otherwise the CPU count
    """
    value = os.environ.get(THREADS_ENV, None)
    if value is None or value.strip() == "":
        return os.cpu_count() or 1
    try:
        nthreads = int(value)
    except ValueError:
        raise ConfigError("%s must be an integer, got '%s'" % (THREADS_ENV, value))
    if nthreads < 1:
        raise ConfigError("%s must be at least 1, got %i" % (THREADS_ENV, nthreads))
    return nthreads

class StageTimer(object):
    """
    Accumulates monotonic wall clock time per named stage
    """

    def __init__(self):
        self.timings = collections.OrderedDict()

    @contextlib.contextmanager
    def stage(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start

    def total(self):
        return sum(self.timings.values())

    def merge(self, other, prefix=""):
        """ Add the timings of another timer, optionally prefixing stage names """
        for name, seconds in other.timings.items():
            key = prefix + name
            self.timings[key] = self.timings.get(key, 0.0) + seconds
