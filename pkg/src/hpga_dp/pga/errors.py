class InvalidGradeError(ValueError):
    pass


class InvalidVersorError(ValueError):
    pass


class NormalizationError(ValueError):
    """A quaternion passed for embedding is not unit norm."""


class PointAtInfinityError(ValueError):
    pass


class DegenerateOrientationError(ValueError):
    pass
