"""Exception hierarchy shared by every module."""


class NodeAugError(Exception):
    """Base class for all package errors."""


class MalformedFile(NodeAugError, ValueError):
    pass


class IoFailure(NodeAugError, OSError):
    pass


class DegenerateGraph(NodeAugError, ValueError):
    pass


class NotEnoughNegatives(NodeAugError, ValueError):
    pass


class BadParams(NodeAugError, ValueError):
    pass


class ShapeMismatch(NodeAugError, ValueError):
    pass


class NotScalar(NodeAugError, ValueError):
    pass


class DetachedTensor(NodeAugError, ValueError):
    pass


class ConvergenceFailure(NodeAugError, RuntimeError):
    pass


class EmptyCluster(NodeAugError, ValueError):
    pass


class EmptyMask(NodeAugError, ValueError):
    pass


class BadNodeId(NodeAugError, IndexError):
    pass


class EmptyDataset(NodeAugError, ValueError):
    pass


class NotADistribution(NodeAugError, ValueError):
    pass


class NoPositiveEdges(NodeAugError, ValueError):
    pass


class UnlabeledEndpoint(NodeAugError, ValueError):
    pass


class OneClassOnly(NodeAugError, ValueError):
    pass


class KnowledgeMismatch(NodeAugError, ValueError):
    pass


class BadDelta(NodeAugError, ValueError):
    pass


class BadEpsilon(NodeAugError, ValueError):
    pass


class ConfigError(NodeAugError, ValueError):
    pass
