"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line front end can map
failures to process status without a lookup table.
"""


class BeamCtlError(Exception):
    exit_code = 1


class ConfigError(BeamCtlError, ValueError):
    exit_code = 2


class RegimeMismatch(BeamCtlError):
    exit_code = 3


class VerificationFailed(BeamCtlError):
    exit_code = 4


# spectrum
class EpsilonTooLarge(ConfigError):
    pass


# modal
class GridTooCoarse(ConfigError):
    pass


class DegenerateInterval(ConfigError):
    pass


class NearParallel(BeamCtlError):
    pass


# biortho
class DecayInsufficient(BeamCtlError):
    pass


class SupportLeak(BeamCtlError):
    pass


class GridAliased(ConfigError):
    pass


class PrecisionLoss(BeamCtlError):
    """Dual functions are too large for the requested accuracy in float64."""


class IllConditioned(BeamCtlError):
    pass


# control
class DegenerateGap(BeamCtlError):
    pass


class UnresolvableCluster(BeamCtlError):
    pass


class TailDominant(BeamCtlError):
    pass


class SubsetNotSeparated(RegimeMismatch):
    pass


class CutoffTooLarge(BeamCtlError):
    pass


# beamsim
class StepTooCoarse(ConfigError):
    pass
