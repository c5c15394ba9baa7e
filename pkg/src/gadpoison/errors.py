"""Exception types shared across the toolkit."""


class GadPoisonError(Exception):
    """Base class for all toolkit errors."""


class MalformedEdgeList(GadPoisonError):
    """An edge-list file could not be parsed; carries the offending line number."""

    def __init__(self, path, line_no, message):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class EmptyGraph(GadPoisonError):
    """No edges survived edge-list filtering."""


class InvalidFlip(GadPoisonError):
    """A flip in a plan is inconsistent with the graph state it is applied to."""

    def __init__(self, index, message):
        self.index = index
        super().__init__(f"flip #{index}: {message}")


class DegenerateFit(GadPoisonError):
    """The log-log regression system is singular (all masked ln N equal)."""


class NodeVanished(GadPoisonError):
    """A relaxed adjacency drove some node's degree below the log-safety floor."""


class NoValidMove(GadPoisonError):
    """Greedy search filtered out every candidate pair."""


class NoCandidate(GadPoisonError):
    """No optimization snapshot reached the requested number of flips."""


class ZeroBaseline(GadPoisonError):
    """The clean-graph target score sum is zero; tau_as is undefined."""


class NoConsensus(GadPoisonError):
    """RANSAC found no candidate line with at least two inliers."""


class EmptyTargets(GadPoisonError):
    """The transfer pipeline's classifier predicted no test node as anomalous."""
