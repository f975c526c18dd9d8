"""Exception hierarchy shared by all edgebench modules."""


class EdgebenchError(Exception):
    """Base class for every error raised by edgebench."""


# sampler
class CounterSourceUnavailable(EdgebenchError):
    pass


class NonMonotonicCounters(EdgebenchError):
    pass


class ProcessGone(EdgebenchError):
    pass


# harness
class WorkloadSpawnFailed(EdgebenchError):
    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class HookFailed(EdgebenchError):
    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class PlanError(EdgebenchError, ValueError):
    pass


# metrics
class MetricsError(EdgebenchError):
    pass


class EmptyWindow(MetricsError):
    pass


class IdleBaselineUnavailable(MetricsError):
    pass


class NoMemorySamples(MetricsError):
    pass


class IncompleteRun(MetricsError):
    pass


class AllRunsExcluded(MetricsError):
    pass


# tdms
class TdmsError(EdgebenchError):
    pass


class BadLeadIn(TdmsError):
    pass


class UnsupportedLayout(TdmsError):
    pass


class Truncated(TdmsError):
    pass


class MalformedPath(TdmsError):
    pass


class MalformedSegment(TdmsError):
    pass


class DimensionNotOne(TdmsError):
    pass


class UnsupportedDtype(TdmsError):
    pass


class NotFound(TdmsError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class NonNumericChannel(TdmsError):
    pass


class LossyWidening(TdmsError):
    pass


# shm pipeline
class EmptySeries(EdgebenchError, ValueError):
    pass


class NoNumericChannels(EdgebenchError):
    pass


# spool
class SpoolError(EdgebenchError):
    pass


class DirUnreadable(SpoolError):
    pass


class ReadFailed(SpoolError):
    pass


class JournalWriteFailed(SpoolError):
    pass


class SinkUnreachable(SpoolError):
    pass


class ChecksumMismatchAtSink(SpoolError):
    pass


# report
class MissingMetric(EdgebenchError):
    pass


# config
class ConfigError(EdgebenchError):
    pass


class ConfigSyntaxError(ConfigError):
    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class UnknownKey(ConfigError):
    def __init__(self, key_path):
        super().__init__(f"unknown configuration key: {key_path}")
        self.key_path = key_path


class InvalidValue(ConfigError):
    def __init__(self, key_path, reason):
        super().__init__(f"invalid value for {key_path}: {reason}")
        self.key_path = key_path
