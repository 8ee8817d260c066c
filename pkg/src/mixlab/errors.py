"""Exception types shared across mixlab.

Every error carries an ``exit_code`` used by the command line front end:
2 for bad input, 3 for horizon problems, 4 for time-grid problems and
5 for violated preconditions.
"""


class MixlabError(Exception):
    exit_code = 2


# graph construction and parsing
class GraphError(MixlabError):
    pass


class DisconnectedGraph(GraphError):
    pass


class NonPositiveWeight(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class InvalidMetric(GraphError):
    pass


class ParseError(MixlabError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


# kernels
class NotMixedWithinHorizon(MixlabError):
    exit_code = 3


class SizeLimitExceeded(MixlabError):
    pass


# resistance
class OverlappingSets(MixlabError):
    pass


class EmptyComplement(MixlabError):
    pass


class VertexInTargets(MixlabError):
    pass


# bounds
class BallIsWholeGraph(MixlabError):
    exit_code = 5


class PreconditionFailed(MixlabError):
    exit_code = 5

    def __init__(self, clause, message=""):
        self.clause = clause
        text = f"precondition failed: {clause}"
        if message:
            text += f" ({message})"
        super().__init__(text)


class InsufficientDraws(MixlabError):
    exit_code = 5


class UnknownFamily(MixlabError):
    pass


class InsufficientSizes(MixlabError):
    pass


# ensembles
class DimensionTooLow(MixlabError):
    def __init__(self, d):
        self.d = d
        super().__init__(f"random walk range needs dimension >= 5, got {d}")


class SamplingBudgetExceeded(MixlabError):
    exit_code = 3


# spectral Gromov-Hausdorff
class GridMismatch(MixlabError):
    exit_code = 4


class AmbientTooLargeForExact(MixlabError):
    pass


class InvalidCorrespondence(MixlabError):
    pass
