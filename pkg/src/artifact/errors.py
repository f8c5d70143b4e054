"""Named failure modes shared across the solver stack."""


class ArtifactError(Exception):
    """Base class for every error raised by this package."""


class NonConcave(ArtifactError):
    pass


class DegenerateTerminal(ArtifactError):
    pass


class ZeroSignalResponse(ArtifactError):
    pass


class ChiSaturated(ArtifactError):
    pass


class DenominatorDegenerate(ArtifactError):
    pass


class SingularMatching(ArtifactError):
    def __init__(self, message, cond=float("inf")):
        super().__init__(f"{message} (condition number {cond:.3g})")
        self.cond = cond


class NoStaticEquilibrium(ArtifactError):
    def __init__(self, residual):
        super().__init__(f"time-T fixed point did not converge, residual {residual:.3g}")
        self.residual = residual


class NoBracket(ArtifactError):
    pass


class BlowUp(ArtifactError):
    def __init__(self, message, probe=None, time=None):
        super().__init__(message)
        self.probe = probe
        self.time = time


class IvpBlowUp(ArtifactError):
    def __init__(self, s, time):
        super().__init__(f"forward IVP exploded at t={time:.6g}")
        self.s = s
        self.time = time


class NoConvergence(ArtifactError):
    def __init__(self, best_residual, best_s=None):
        super().__init__(f"no fixed point found, best residual {best_residual:.3g}")
        self.best_residual = best_residual
        self.best_s = best_s


class AlphaVanishes(ArtifactError):
    def __init__(self, t):
        super().__init__(f"signaling coefficient vanishes at t={t:.6g}")
        self.t = t


class GridMismatch(ArtifactError):
    pass


class ConfigError(ArtifactError):
    pass


class NonFiniteDerivative(ArtifactError):
    pass
