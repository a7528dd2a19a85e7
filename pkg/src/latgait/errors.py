"""Exception types shared across the package."""


class Unreachable(ValueError):
    """Foot target lies outside the leg workspace."""


class InsufficientStance(ValueError):
    """Fewer than two stance feet; rigid registration is underdetermined."""


class DimensionMismatch(ValueError):
    """Latent code or input dimensionality does not match the model."""


class InvalidShape(ValueError):
    """Array argument has the wrong shape."""


class EmptyLibrary(ValueError):
    """Expert library contains no trajectories."""


class WrongTaskKind(ValueError):
    """Cost function applied to a task of a different kind."""


class InsufficientData(ValueError):
    """Dataset too small to train on."""


class MissingModel(ValueError):
    """Referenced model artifact is absent or incompatible."""


class ArtifactMismatch(ValueError):
    """Artifact files disagree about their upstream hashes or dimensions."""
