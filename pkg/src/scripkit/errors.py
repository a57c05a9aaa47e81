"""Exception hierarchy shared across scripkit."""


class ScripError(Exception):
    """Base class for every error raised by scripkit."""

    exit_code = 1


class ConfigError(ScripError):
    exit_code = 2


class BadParameter(ConfigError):
    pass


class NonIntegralPopulation(ConfigError):
    pass


class NonIntegralMoney(ConfigError):
    pass


class NumericError(ScripError):
    exit_code = 3


class InfeasibleMoney(NumericError):
    """Average money cannot be held by agents under the given thresholds."""


class DegenerateVolunteers(NumericError):
    """Nobody can volunteer, so earning probabilities are undefined."""


class UnboundedThreshold(NumericError):
    def __init__(self, k_max: int):
        super().__init__(f"volunteering still pays at the threshold cap {k_max}")
        self.k_max = k_max


class IterationCap(NumericError):
    pass


class NonConvergence(NumericError):
    pass


class BadBracket(NumericError):
    pass


class CrashedEconomy(NumericError):
    def __init__(self, message: str, welfare: float):
        super().__init__(message)
        self.welfare = welfare


class NegativeFraction(NumericError):
    def __init__(self, index: int, value: float):
        super().__init__(f"threshold {index} gets negative mass {value:.3g}")
        self.index = index
        self.value = value


class NoExplanation(NumericError):
    pass


class InconsistentLambda(NumericError):
    pass
