class HitstatsError(Exception):
    """Base class for estimator and model failures."""


class SingularChain(HitstatsError):
    pass


class QuadratureFailure(HitstatsError):
    pass


class InsufficientData(HitstatsError):
    pass


class ZeroMass(HitstatsError):
    pass


class MixedRescale(HitstatsError):
    pass


class RejectionStall(HitstatsError):
    pass
