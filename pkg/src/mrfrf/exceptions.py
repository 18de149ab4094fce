"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """Malformed signal, spectrum or argument."""


class InvalidConfigError(ValueError):
    """Estimator configuration violates a uniqueness condition.

    ``labels`` holds the violated condition labels ("32a", "32b", "32c").
    """

    def __init__(self, message, labels=()):
        super().__init__(message)
        self.labels = tuple(labels)


class RankDeficientWindowError(ArithmeticError):
    """Regressor of a local window is (numerically) rank deficient."""

    def __init__(self, k, rcond):
        super().__init__(
            f"regressor at bin k={k} is rank deficient (reciprocal condition "
            f"{rcond:.3g}); the input spectrum is likely not rough enough "
            f"over the window and its aliased images (roughness condition, label 32c)"
        )
        self.k = k
        self.rcond = rcond


class DegreesOfFreedomError(ArithmeticError):
    """No residual degrees of freedom left to estimate the noise variance."""


class LocalPoleError(ArithmeticError):
    """Local denominator vanishes inside the window."""


class PoleOnGridError(ArithmeticError):
    """Rational system has a pole on an evaluated grid point."""
