"""Exception hierarchy shared by the scheduling, mapping and cost modules."""


class ConvDKError(Exception):
    """Base class for every error raised by the package."""


class ConditionViolation(ConvDKError):
    """A kernel geometry cannot be scheduled with duplicated kernels.

    The offending :class:`~convdk.schedule.ConditionReport` is kept on
    ``report`` so callers can print every flag, not just the first failure.
    """

    def __init__(self, report, message=None):
        self.report = report
        if message is None:
            failed = [name for name in ("cond1", "cond2", "cond3") if not getattr(report, name)]
            message = "k=%d, s=%d fails %s" % (
                report.geometry.k, report.geometry.s, ", ".join(failed))
        super().__init__(message)


class LengthMismatch(ConvDKError, ValueError):
    pass


class ShapeMismatch(ConvDKError, ValueError):
    pass


class AccumulatorOverflow(ConvDKError, OverflowError):
    """A MAC result left the signed 32-bit accumulator range."""


class TooNarrow(ConvDKError, ValueError):
    """Not even one kernel block fits the available width."""


class CapacityError(ConvDKError):
    pass


class ParseError(ConvDKError, ValueError):
    pass


class ValidationError(ConvDKError, ValueError):
    pass
