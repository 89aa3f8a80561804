"""Exception types shared across the package."""


class BiharmeigError(Exception):
    """Base class for all package errors."""


class DomainError(BiharmeigError):
    """Angle or parameter outside the admissible range."""


class NonConvergence(BiharmeigError):
    """An iterative solver exhausted its budget without converging.

    Eigenvalue solvers attach their best iterate so callers can inspect
    how far the iteration got; root solvers leave it as None.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class NoOscillation(BiharmeigError):
    """Requested oscillation ratios for a non-oscillatory exponent (beta = 0)."""


class InvalidSpec(BiharmeigError):
    """Mesh or run specification is malformed."""


class MeshTooLarge(BiharmeigError):
    """Generated mesh would exceed the vertex cap."""


class DegenerateDomain(BiharmeigError):
    """Domain degenerates (dumbbell waist pinches to zero width)."""


class QuadratureError(BiharmeigError):
    """Element mapping is singular or inverted."""


class SingularSystem(BiharmeigError):
    """Block factorization failed; the system is singular."""


class PointLocationFailure(BiharmeigError):
    """A sample point could not be located inside any triangle."""


class AsymmetricMesh(BiharmeigError):
    """Mirror pairing requested on a mesh that is not mirror symmetric."""


class UsageError(BiharmeigError):
    """Bad command line or config file input."""
