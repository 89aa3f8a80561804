"""Corner exponents of clamped plate eigenfunctions.

Near a corner of internal angle theta, an eigenfunction behaves like
c * r**z along the angle bisector, where r is the distance from the
corner and z = alpha + i*beta is the root with smallest admissible real
part of

    f(z) = (z - 1) + sin((z - 1) * theta) / sin(theta).

For theta below a critical angle theta_c the root is complex and the
eigenfunction changes sign infinitely often as r -> 0; consecutive zeros
along the bisector approach the geometric ratio exp(pi/beta) and the
extremum magnitudes approach the ratio exp(alpha*pi/beta).  Above
theta_c all admissible roots are real and the sign changes disappear.

Roots are found by complex Newton iteration with continuation in theta
from a fixed anchor angle, falling back to bisection on the real axis
once the imaginary part collapses.
"""

from __future__ import annotations

import math
import cmath
from dataclasses import dataclass

from .errors import DomainError, NoOscillation, NonConvergence

# Continuation starts here; the root at 10 degrees is near 25 + 13i.
_ANCHOR_DEG = 10.0
_ANCHOR_GUESS = 25.0 + 13.0j

# |Im z| below this is treated as a real root (beta = 0).
BETA_ZERO_TOL = 1e-8

# Admissibility: a clamped corner requires Re z > 2 (u and grad u vanish
# faster than the mirror root family allows).
REAL_PART_FLOOR = 2.0

_RESIDUAL_TOL = 1e-12
_NEWTON_MAX_ITER = 60

# integer-degree continuation anchors, filled lazily
_anchors: dict[int, complex] = {}


def _f(z: complex, theta: float) -> complex:
    return (z - 1.0) + cmath.sin((z - 1.0) * theta) / math.sin(theta)


def _fprime(z: complex, theta: float) -> complex:
    return 1.0 + theta * cmath.cos((z - 1.0) * theta) / math.sin(theta)


def _newton(z: complex, theta: float) -> complex:
    """Newton iteration from z; raises NonConvergence on failure."""
    for _ in range(_NEWTON_MAX_ITER):
        fz = _f(z, theta)
        dz = fz / _fprime(z, theta)
        z = z - dz
        if abs(dz) <= 1e-14 * (1.0 + abs(z)):
            break
    if abs(_f(z, theta)) > _RESIDUAL_TOL:
        raise NonConvergence(f"Newton stalled at theta={theta!r}")
    return z


def _walk(z: complex, th_from: float, th_to: float) -> complex:
    """Continue a root from th_from to th_to in small theta steps.

    Steps of 1 degree, halved down to 0.1 degree whenever Newton fails
    or the root jumps branch.
    """
    one_deg = math.pi / 180.0
    th = th_from
    step = one_deg if th_to >= th_from else -one_deg
    while th != th_to:
        t_next = th + step if abs(th_to - th) > abs(step) else th_to
        try:
            z_next = _newton(z, t_next)
            jumped = abs(z_next - z) > 0.5
        except NonConvergence:
            z_next, jumped = z, True
        if jumped:
            if abs(step) < 0.15 * one_deg:
                raise NonConvergence(
                    f"continuation lost the branch near theta={t_next!r}")
            step *= 0.5
            continue
        z, th = z_next, t_next
    return z


def _anchor(deg: int) -> complex:
    """Root at an integer angle in degrees, cached, built by continuation."""
    if deg in _anchors:
        return _anchors[deg]
    if not _anchors:
        _anchors[int(_ANCHOR_DEG)] = _newton(_ANCHOR_GUESS,
                                             math.radians(_ANCHOR_DEG))
    known = min(_anchors, key=lambda d: abs(d - deg))
    z = _anchors[known]
    direction = 1 if deg > known else -1
    for d in range(known, deg, direction):
        z = _walk(z, math.radians(d), math.radians(d + direction))
        _anchors[d + direction] = z
    return _anchors[deg]


def _real_roots(theta: float) -> list[float]:
    """All real roots z > REAL_PART_FLOOR, by scan and bisection.

    On the real axis |sin((z-1)theta)| <= 1, so roots satisfy
    z <= 1 + 1/sin(theta); the scan stops a little past that bound.
    """
    z_hi = 1.0 + 1.0 / math.sin(theta) + 0.5
    n = max(2000, int((z_hi - REAL_PART_FLOOR) * 4000))
    roots = []
    prev_z = REAL_PART_FLOOR + 1e-9
    prev_f = _f(prev_z, theta).real
    for k in range(1, n + 1):
        z = REAL_PART_FLOOR + 1e-9 + (z_hi - REAL_PART_FLOOR) * k / n
        fz = _f(z, theta).real
        if prev_f == 0.0:
            roots.append(prev_z)
        elif prev_f * fz < 0.0:
            lo, hi, flo = prev_z, z, prev_f
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                fm = _f(mid, theta).real
                if flo * fm <= 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fm
                if hi - lo <= 1e-15 * mid:
                    break
            roots.append(0.5 * (lo + hi))
        prev_z, prev_f = z, fz
    return roots


def _small_angle(theta: float) -> complex:
    """Root for theta below the anchor angle, via the scaled variable.

    As theta -> 0 the root escapes like 1/theta, but w = (z-1)*theta
    stays near a fixed root of w + sin(w) = 0, so Newton on
    g(w) = w + (theta/sin(theta))*sin(w) seeded from the anchor's w
    converges for any small theta in one shot.
    """
    z0 = _anchor(int(_ANCHOR_DEG))
    w = (z0 - 1.0) * math.radians(_ANCHOR_DEG)
    s = theta / math.sin(theta)
    for _ in range(_NEWTON_MAX_ITER):
        g = w + s * cmath.sin(w)
        dw = g / (1.0 + s * cmath.cos(w))
        w = w - dw
        if abs(dw) <= 1e-15 * (1.0 + abs(w)):
            break
    z = 1.0 + w / theta
    if abs(_f(z, theta)) > _RESIDUAL_TOL * max(1.0, abs(z)):
        raise NonConvergence(f"small-angle solve stalled at theta={theta!r}")
    return z


def _polish_near_fold(theta: float) -> complex | None:
    """Hunt for the root right at the complex-to-real collapse.

    Within a sliver of angles the continuation loses the branch (Newton
    is near-degenerate at the double root) while no real root exists
    yet.  Seed Newton from the real-axis minimizer of f with a ladder
    of imaginary offsets and keep the best admissible root.
    """
    z_hi = 1.0 + 1.0 / math.sin(theta) + 0.5
    n = 4000
    zmin, fmin = REAL_PART_FLOOR, math.inf
    for k in range(1, n):
        z = REAL_PART_FLOOR + (z_hi - REAL_PART_FLOOR) * k / n
        fz = abs(_f(z, theta).real)
        if fz < fmin:
            zmin, fmin = z, fz
    best = None
    for k in range(-8, 0):
        try:
            z = _newton(zmin + 1j * 10.0 ** k, theta)
        except NonConvergence:
            continue
        if z.real > REAL_PART_FLOOR and (best is None or z.real < best.real):
            best = z
    return best


@dataclass(frozen=True)
class CornerExponent:
    """Leading bisector exponent z = alpha + i*beta at one corner angle."""

    theta: float
    alpha: float
    beta: float
    residual: float

    @property
    def oscillatory(self) -> bool:
        return self.beta > 0.0

    @property
    def zero_ratio(self) -> float | None:
        """Limiting ratio of consecutive bisector zeros; None when the
        root is real and nothing oscillates."""
        return math.exp(math.pi / self.beta) if self.beta > 0.0 else None

    @property
    def extremum_value_ratio(self) -> float | None:
        """Limiting ratio of consecutive extremum magnitudes."""
        if self.beta <= 0.0:
            return None
        return math.exp(self.alpha * math.pi / self.beta)


def solve_exponent(theta: float) -> CornerExponent:
    """Leading admissible exponent for internal angle theta in (0, pi).

    Returns the root with smallest real part among Re z > 2, with
    beta >= 0 (conjugate pairs are reported by their upper member).
    """
    if not (0.0 < theta < math.pi):
        raise DomainError(f"internal angle must lie in (0, pi), got {theta!r}")
    deg = math.degrees(theta)
    try:
        if deg < _ANCHOR_DEG:
            z = _small_angle(theta)
        else:
            near = int(min(max(round(deg), int(_ANCHOR_DEG)), 179))
            z = _walk(_anchor(near), math.radians(near), theta)
    except NonConvergence:
        z = None
    if z is not None and abs(z.imag) >= BETA_ZERO_TOL:
        z = complex(z.real, abs(z.imag))
        return CornerExponent(theta, z.real, z.imag, abs(_f(z, theta)))
    # real branch: continuation collapsed (or failed) past the critical
    # angle; take the smallest real root directly
    roots = _real_roots(theta)
    if roots:
        alpha = roots[0]
        return CornerExponent(theta, alpha, 0.0, abs(_f(alpha, theta).real))
    z = _polish_near_fold(theta)
    if z is None:
        raise NonConvergence(f"no admissible root found at theta={theta!r}")
    beta = abs(z.imag)
    if beta < BETA_ZERO_TOL:
        beta = 0.0
    return CornerExponent(theta, z.real, beta, abs(_f(z, theta)))


def ratios(exponent: CornerExponent) -> tuple[float, float]:
    """(zero spacing ratio, extremum magnitude ratio) for an oscillatory root.

    Consecutive bisector zeros approach the spacing ratio
    exp(pi/beta); consecutive extremum magnitudes approach
    exp(alpha*pi/beta).
    """
    if not exponent.oscillatory:
        raise NoOscillation(
            f"beta = 0 at theta={exponent.theta!r}; no oscillation ratios")
    zero_ratio = math.exp(math.pi / exponent.beta)
    extremum_ratio = math.exp(exponent.alpha * math.pi / exponent.beta)
    return zero_ratio, extremum_ratio


def critical_angle(tol: float = 1e-8) -> float:
    """Angle where the oscillation dies, by bisection on beta > 0.

    The bracket [140 deg, 150 deg] is known to contain the transition.
    """
    lo, hi = math.radians(140.0), math.radians(150.0)
    if not solve_exponent(lo).oscillatory or solve_exponent(hi).oscillatory:
        raise NonConvergence("bisection bracket does not straddle beta = 0")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if solve_exponent(mid).oscillatory:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def exponent_table(thetas: list[float]) -> list[CornerExponent]:
    """solve_exponent over a list of angles (radians), in input order."""
    return [solve_exponent(t) for t in thetas]
