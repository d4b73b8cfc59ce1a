"""Exception hierarchy shared by all modules."""


class QmiError(Exception):
    """Base class for all errors raised by this package."""


class RankDeficient(QmiError):
    pass


class InconsistentInverse(QmiError):
    pass


class NotPsd(QmiError):
    pass


class NotSymmetric(QmiError):
    pass


class DimensionMismatch(QmiError):
    pass


class Singular(QmiError):
    pass


class WrongInertia(QmiError):
    pass


class NegativeMultiplier(QmiError):
    pass


class NonPositiveEpsilon(QmiError):
    pass


class HeterogeneousSamples(QmiError):
    pass


class SingularWeight(QmiError):
    pass


class Unbounded(QmiError):
    pass


class Unstable(QmiError):
    pass


class Infeasible(QmiError):
    pass


class SolverFailure(QmiError):
    pass


class SolverUnavailable(QmiError):
    pass


class MalformedProblem(QmiError):
    pass
