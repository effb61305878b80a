"""Integral audits of boundary singularities of a Beltrami coefficient.

Each test examines the tangent dilatation K_T(z, z0) (or a user-supplied
dominant Q >= K_T) on shrinking neighborhoods of a base point z0 and issues a
verdict for one solvability criterion:

    MEAN    - bounded disk means of K_T as the radius shrinks;
    FMO     - finite mean oscillation: bounded dispersion around disk means;
    BMO     - bounded mean oscillation over a dyadic disc family (norm lower
              bound; dominant test via refinement stability);
    CZ      - annulus integral of K_T / |z - z0|^2 growing strictly slower
              than log^2(1/eps);
    LEHTO   - divergence of the integral of dr / (r k_T(z0, r)) at 0, with
              k_T the circle mean;
    ORLICZ  - finiteness of integral Phi(K_T) dm together with divergence of
              the tail integral of log Phi(t) / t^2 (EXP is the exponential
              special case);
    PSI     - smallness of the annulus integral of K_T psi^2 against the
              square of I(eps) = integral of psi over [eps, eps0].

Improper integrals are truncated to dyadic shells eps_k = eps0 2^{-k} and the
verdict is fitted from the growth of the partial sums: a log-scale slope of
at least ``DIVERGENCE_SLOPE`` over the last points reads as divergent, a
relative Cauchy tail under ``CAUCHY_TAIL`` as convergent, anything else as
inconclusive.  Verdicts carry the full trace so that callers can always
inspect the evidence; a numerical auditor certifies trends, not limits.
Orlicz-type gauges constructed by the preset library carry exact tail
classifications (closed-form antiderivatives), which take precedence over the
truncated fit for slowly diverging gauges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from .fields import ComplexField, RealField

__all__ = [
    "OrliczFunction",
    "CriterionVerdict",
    "PsiFamily",
    "SATISFIED",
    "VIOLATED",
    "INCONCLUSIVE",
    "circle_mean",
    "mean_test",
    "fmo_test",
    "bmo_norm",
    "bmo_dominant_test",
    "cz_test",
    "lehto_test",
    "orlicz_test",
    "condition_equivalence_suite",
    "fmo_growth_check",
    "psi_condition_test",
    "tangent_profile_mu",
    "tangent_dilatation_callable",
    "default_eps0",
]

SATISFIED = "SATISFIED"
VIOLATED = "VIOLATED"
INCONCLUSIVE = "INCONCLUSIVE"

DIVERGENCE_SLOPE = 0.1   # log-scale growth slope declaring divergence
CAUCHY_TAIL = 1e-6       # relative tail declaring convergence
DEFAULT_LEVELS = 26      # dyadic shells per audit
DEEP_LEVELS = 340        # shells for ratio tests, which must out-run slow limits
SATURATION_CAP = 1e14    # dilatation beyond this is float-saturated; ladders stop
PLATEAU_SLOPE = 0.05     # |slope| under this reads as a stabilized ratio
PLATEAU_FLOOR = 1e-3     # stabilized ratio above this contradicts a little-o claim
E_MINUS_E = math.exp(-math.e)


# ----------------------------------------------------------------------
# Domain types
# ----------------------------------------------------------------------

@dataclass
class OrliczFunction:
    """Convex non-decreasing gauge Phi on [0, inf] with log and inverse.

    ``log_eval`` must return log Phi(t) (exact where possible; overflow-free).
    ``dlog`` optionally gives d(log Phi)/dt in closed form.  For gauges built
    by the preset library, ``tail_divergent`` records the exact closed-form
    classification of the tail integral of log Phi(t)/t^2; it takes
    precedence over truncated fits.
    """

    name: str
    log_eval: Callable[[np.ndarray], np.ndarray]
    dlog: Optional[Callable[[np.ndarray], np.ndarray]] = None
    tail_divergent: Optional[bool] = None
    convex_from: float = 0.0

    def eval(self, t: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_eval(np.asarray(t, dtype=float)))

    def inverse(self, tau: np.ndarray) -> np.ndarray:
        """Generalized inverse inf{t : Phi(t) >= tau} by monotone bisection."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        out = np.empty_like(tau)
        for i, tv in enumerate(tau):
            out[i] = self._inverse_scalar(math.log(tv) if tv > 0 else -math.inf)
        return out if out.size > 1 else out[0]

    def log_inverse(self, log_tau: float) -> float:
        return self._inverse_scalar(log_tau)

    def _inverse_scalar(self, log_tau: float) -> float:
        lo, hi = 0.0, 1.0
        for _ in range(2000):
            if float(self.log_eval(np.asarray([hi]))[0]) >= log_tau:
                break
            hi *= 2.0
            if hi > 1e300:
                return math.inf
        if float(self.log_eval(np.asarray([lo]))[0]) >= log_tau:
            return 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if float(self.log_eval(np.asarray([mid]))[0]) >= log_tau:
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-14 * max(1.0, hi):
                break
        return hi

    def validate(self, t_max: float = 100.0, samples: int = 400) -> None:
        """Check monotonicity, midpoint convexity (from ``convex_from`` on,
        since some admissible gauges only turn convex in the tail), and the
        inverse inequality on a sample lattice; raises ValueError on failure."""
        t = np.linspace(0.0, t_max, samples)
        lv = self.log_eval(t)
        v = np.exp(np.clip(lv, -745, 700))
        if np.any(np.diff(v) < -1e-9 * np.maximum(1.0, v[:-1])):
            raise ValueError(f"gauge {self.name}: not non-decreasing on the sample lattice")
        tc = np.linspace(self.convex_from, max(t_max, self.convex_from + 1), samples)
        vc = np.exp(np.clip(self.log_eval(tc), -745, 700))
        mid = 0.5 * (vc[:-2] + vc[2:])
        if np.any(vc[1:-1] > mid * (1 + 1e-9) + 1e-12):
            raise ValueError(
                f"gauge {self.name}: midpoint convexity fails on the sample lattice "
                f"beyond t = {self.convex_from}"
            )
        for tv in t[1::37]:
            phi_t = float(np.clip(lv[np.searchsorted(t, tv)], -745, 700))
            tb = self._inverse_scalar(phi_t)
            if tb > tv * (1 + 1e-6) + 1e-9:
                raise ValueError(f"gauge {self.name}: inverse(Phi(t)) > t at t = {tv}")


@dataclass
class CriterionVerdict:
    """Outcome of one boundary-singularity audit."""

    criterion: str
    verdict: str
    trace: list           # (eps_k, value_k) pairs, eps strictly decreasing
    growth_exponent: float
    params: dict = dc_field(default_factory=dict)
    note: str = ""

    def __post_init__(self):
        if not self.trace:
            raise ValueError("verdict trace must be non-empty")
        eps = [e for e, _ in self.trace]
        if np.any(np.diff(eps) >= 0):
            raise ValueError("trace eps values must be strictly decreasing")

    @property
    def satisfied(self) -> bool:
        return self.verdict == SATISFIED

    def __str__(self):
        return f"{self.criterion}: {self.verdict} (growth {self.growth_exponent:+.3f}) {self.note}"


@dataclass
class PsiFamily:
    """Radial weight family psi(t) > 0 with its tail integral I(eps, eps0)."""

    name: str
    psi: Callable[[np.ndarray], np.ndarray]
    integral: Optional[Callable[[float, float], float]] = None

    def I(self, eps: float, eps0: float) -> float:
        if self.integral is not None:
            return float(self.integral(eps, eps0))
        s = _panel_nodes(math.log(eps), math.log(eps0), 24)
        t = np.exp(s[0])
        val = float(np.sum(self.psi(t) * t * s[1]))
        return val


# ----------------------------------------------------------------------
# Quadrature helpers
# ----------------------------------------------------------------------

def _panel_nodes(a: float, b: float, panels: int, order: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _shell_integral(fn, z0: complex, r_in: float, r_out: float,
                    n_theta: int = 96, panels: int = 4) -> float:
    """Integral of fn over the annulus r_in < |z - z0| < r_out (log-radial GL)."""
    s, ws = _panel_nodes(math.log(r_in), math.log(r_out), panels)
    r = np.exp(s)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    Z = z0 + r[:, None] * np.exp(1j * th[None, :])
    vals = np.asarray(fn(Z), dtype=float)
    # dm = r dr dtheta = r^2 ds dtheta in the log variable
    return float(np.sum(vals * (r ** 2 * ws)[:, None]) * (2 * np.pi / n_theta))


def _shell_log_integral(log_fn, z0: complex, r_in: float, r_out: float,
                        n_theta: int = 96, panels: int = 4) -> float:
    """log of the same integral, for integrands given in the log domain."""
    s, ws = _panel_nodes(math.log(r_in), math.log(r_out), panels)
    r = np.exp(s)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    Z = z0 + r[:, None] * np.exp(1j * th[None, :])
    logv = np.asarray(log_fn(Z), dtype=float)
    logw = (2 * s + np.log(ws))[:, None] + math.log(2 * np.pi / n_theta)
    return float(logsumexp((logv + logw).ravel()))


def _disk_quadrature(fn, z0: complex, eps: float, n_theta: int = 64,
                     depth: float = 30.0, panels: int = 10) -> tuple[float, float]:
    """(integral over B(z0, eps), quadrature area); the r -> 0 core is
    truncated at relative radius e^-depth (immaterial for integrable
    singularities), and the reported area matches the truncation so that
    constants average exactly."""
    s, ws = _panel_nodes(math.log(eps) - depth, math.log(eps), panels)
    r = np.exp(s)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    Z = z0 + r[:, None] * np.exp(1j * th[None, :])
    vals = np.asarray(fn(Z), dtype=float)
    integral = float(np.sum(vals * (r ** 2 * ws)[:, None]) * (2 * np.pi / n_theta))
    area = math.pi * eps ** 2 * (1.0 - math.exp(-2.0 * depth))
    return integral, area


def _fit_slope(x: np.ndarray, y: np.ndarray, last: int = 4) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    good = np.isfinite(x) & np.isfinite(y)
    x, y = x[good], y[good]
    if x.size < 2:
        return float("nan")
    k = min(last, x.size)
    return float(np.polyfit(x[-k:], y[-k:], 1)[0])


def _as_callable(K: Union[RealField, ComplexField, Callable], kind: str = "real") -> Callable:
    if callable(K):
        return K
    field = K

    def fn(z):
        return field.interp(z).real if kind == "real" else field.interp(z)

    fn._grid_backed = field.grid  # noqa: SLF001 - marker for resolution floor checks
    return fn


def _resolution_floor(fn, r: float, what: str) -> None:
    g = getattr(fn, "_grid_backed", None)
    if g is not None and r < 4 * g.spacing:
        raise ValueError(
            f"{what}: radius {r:.3g} is below the resolution floor 4*spacing = "
            f"{4 * g.spacing:.3g} of the grid-backed field; supply a callable instead"
        )


def _clamp_levels(fn, eps0: float, levels: int, z0: complex = 0j) -> tuple[int, str]:
    """Shrink a dyadic ladder to what grid resolution and float64 allow.

    Grid-backed fields cannot resolve shells under 4 grid spacings.  For any
    input, shells of radius below ~1e-12 |z0| are unrepresentable as offsets
    from z0 in double precision (catastrophic cancellation), so the ladder
    stops above that floor; audits at z0 = 0 are exempt and can go deepest.
    """
    note = ""
    g = getattr(fn, "_grid_backed", None)
    if g is not None:
        floor = 4 * g.spacing
        usable = int(math.floor(math.log2(eps0 / floor))) if eps0 > floor else 0
        if usable < 2:
            raise ValueError(
                "grid-backed field cannot resolve any dyadic shell below eps0; "
                "supply a callable instead"
            )
        if usable < levels:
            levels = usable
            note = f"ladder clamped to {usable} shells by the grid resolution floor"
    cancel_floor = max(abs(z0) * 1e-12, 1e-290)
    usable = int(math.floor(math.log2(eps0 / cancel_floor))) if eps0 > cancel_floor else 0
    if usable < levels:
        levels = max(usable, 2)
        note = f"ladder clamped to {levels} shells by float64 cancellation at z0"
    return levels, note


def _safe_core_depth(z0: complex, eps: float, want: float = 30.0) -> float:
    """Log-depth of the disk-quadrature core that survives cancellation at z0."""
    cancel_floor = max(abs(z0) * 2e-13, 1e-290)
    usable = math.log(eps / cancel_floor) if eps > cancel_floor else want
    return float(min(want, max(usable, 5.0)))


def default_eps0(z0: complex, boundary: Optional[np.ndarray] = None) -> float:
    """Audit radius: half of min(e^-e, distance to the farthest boundary sample)."""
    if boundary is None:
        return 0.5 * E_MINUS_E
    far = float(np.max(np.abs(np.asarray(boundary, complex) - z0)))
    return 0.5 * min(E_MINUS_E, far)


# ----------------------------------------------------------------------
# Coefficient plumbing
# ----------------------------------------------------------------------

def tangent_profile_mu(profile: Callable[[np.ndarray], np.ndarray], z0: complex) -> Callable:
    """Beltrami coefficient whose tangent dilatation at z0 equals ``profile``.

    mu(z) = -k (z - z0)/conj(z - z0) with k = (Q - 1)/(Q + 1) realizes
    K_T(z, z0) = Q(|z - z0|) exactly (upper branch of the sandwich bound).
    """

    def mu(z):
        z = np.asarray(z, dtype=complex)
        d = z - z0
        r = np.abs(d)
        Q = np.maximum(np.asarray(profile(r), dtype=float), 1.0)
        # float64 saturation: (Q-1)/(Q+1) rounds to 1 for Q > ~1e16, so cap
        # strictly under 1 (the realized dilatation saturates near 2e15)
        k = np.minimum((Q - 1.0) / (Q + 1.0), 1.0 - 1e-15)
        phase = np.where(r > 0, d / np.where(r > 0, np.conj(d), 1.0), 0.0)
        return -k * phase

    return mu


def tangent_dilatation_callable(mu: Union[ComplexField, Callable], z0: complex) -> Callable:
    """K_T(z, z0) as a vectorized callable, from a coefficient field or callable."""
    mu_fn = _as_callable(mu, kind="complex")

    def KT(z):
        z = np.asarray(z, dtype=complex)
        m = np.asarray(mu_fn(z), dtype=complex)
        absm = np.abs(m)
        if np.any(absm >= 1.0):
            raise ValueError("|mu| >= 1 inside the audited neighborhood")
        d = z - z0
        safe = np.where(d == 0, 1.0, d)
        ratio = np.conj(safe) / safe
        out = np.abs(1.0 - ratio * m) ** 2 / (1.0 - absm ** 2)
        return np.where(d == 0, (1 + absm) / (1 - absm), out)

    if hasattr(mu_fn, "_grid_backed"):
        KT._grid_backed = mu_fn._grid_backed
    return KT


# ----------------------------------------------------------------------
# Elementary means
# ----------------------------------------------------------------------

def circle_mean(K: Union[RealField, Callable], z0: complex, r: float,
                n_theta: int = 256) -> float:
    """Mean of K over the circle |z - z0| = r (trapezoidal in angle)."""
    if r <= 0:
        raise ValueError("radius must be positive")
    fn = _as_callable(K)
    _resolution_floor(fn, r, "circle_mean")
    th = 2 * np.pi * np.arange(max(n_theta, 256)) / max(n_theta, 256)
    vals = np.asarray(fn(z0 + r * np.exp(1j * th)), dtype=float)
    return float(np.mean(vals))


# ----------------------------------------------------------------------
# Criterion: bounded disk means
# ----------------------------------------------------------------------

def mean_test(Q: Union[RealField, Callable], z0: complex, eps0: float,
              levels: int = DEFAULT_LEVELS) -> CriterionVerdict:
    """Bounded mean criterion: limsup of disk means of Q at z0 is finite.

    Fits the disk means against log(1/eps); a slope under 0.02 with finite
    means reads SATISFIED, growth at slope >= 0.05 reads VIOLATED.
    """
    fn = _as_callable(Q)
    levels, _ = _clamp_levels(fn, eps0, levels, z0)
    trace = []
    for k in range(1, levels + 1):
        eps = eps0 * 2.0 ** (-k)
        integral, area = _disk_quadrature(fn, z0, eps, depth=_safe_core_depth(z0, eps))
        trace.append((eps, integral / area))
    means = np.asarray([v for _, v in trace])
    u = np.log(1.0 / np.asarray([e for e, _ in trace]))
    slope = _fit_slope(u, means, last=6)
    if not np.all(np.isfinite(means)):
        verdict = VIOLATED
    elif slope >= 0.05:
        verdict = VIOLATED
    elif slope <= 0.02:
        verdict = SATISFIED
    else:
        verdict = INCONCLUSIVE
    return CriterionVerdict(
        criterion="MEAN",
        verdict=verdict,
        trace=trace,
        growth_exponent=slope,
        params={"z0": z0, "eps0": eps0},
        note="disk means vs log(1/eps)",
    )


# ----------------------------------------------------------------------
# Criterion: finite mean oscillation
# ----------------------------------------------------------------------

def fmo_test(Q: Union[RealField, Callable], z0: complex,
             eps_sequence: Optional[Sequence[float]] = None,
             eps0: float = E_MINUS_E / 2, levels: int = 20) -> CriterionVerdict:
    """Finite-mean-oscillation audit at z0.

    The dispersion d(eps) = dashint_B |Q - mean_B Q| must stay bounded as
    eps -> 0: the limsup estimate (max over the three smallest radii) must be
    finite with a non-increasing trend.  Polynomial growth of d (log-log
    slope >= 0.1) reads VIOLATED.
    """
    fn = _as_callable(Q)
    if eps_sequence is None:
        levels, _ = _clamp_levels(fn, eps0, levels, z0)
        eps_sequence = [eps0 * 2.0 ** (-k) for k in range(1, levels + 1)]
    eps_sequence = sorted(set(float(e) for e in eps_sequence), reverse=True)
    _resolution_floor(fn, eps_sequence[-1], "fmo_test")
    trace = []
    for eps in eps_sequence:
        depth = _safe_core_depth(z0, eps)
        total, area = _disk_quadrature(fn, z0, eps, depth=depth)
        mean = total / area
        disp, _ = _disk_quadrature(
            lambda z: np.abs(np.asarray(fn(z), float) - mean), z0, eps, depth=depth
        )
        trace.append((eps, disp / area))
    d = np.asarray([v for _, v in trace])
    scale = float(np.max(np.abs(d))) if d.size else 0.0
    mean_scale = abs(_disk_quadrature(fn, z0, eps_sequence[0],
                                      depth=_safe_core_depth(z0, eps_sequence[0]))[0])
    mean_scale /= math.pi * eps_sequence[0] ** 2
    if scale <= 1e-9 * max(1.0, mean_scale):
        return CriterionVerdict("FMO", SATISFIED, trace, 0.0,
                                {"z0": z0}, "zero dispersion")
    loge = np.log(1.0 / np.asarray([e for e, _ in trace]))
    with np.errstate(divide="ignore"):
        slope = _fit_slope(loge, np.log(np.maximum(d, 1e-300)), last=4)
    tail = float(np.max(d[-3:]))
    if np.isfinite(tail) and slope <= 0.05:
        verdict = SATISFIED
    elif slope >= DIVERGENCE_SLOPE:
        verdict = VIOLATED
    else:
        verdict = INCONCLUSIVE
    return CriterionVerdict(
        criterion="FMO",
        verdict=verdict,
        trace=trace,
        growth_exponent=slope,
        params={"z0": z0, "limsup_estimate": tail},
        note="dispersion log-log slope",
    )


# ----------------------------------------------------------------------
# BMO norm lower bound and dominant test
# ----------------------------------------------------------------------

def bmo_norm(Q: RealField, center: Optional[complex] = None,
             radius: Optional[float] = None, lattice: int = 8) -> float:
    """Lower bound of the BMO seminorm over a dyadic disc family.

    Discs are centered on a ``lattice`` x ``lattice`` grid inside the region
    (default: the whole unmasked box), with dyadic radii from half the region
    radius down to 4 grid spacings; the reported sup is over that finite
    family only, hence a lower bound of the true seminorm.
    """
    g = Q.grid
    if center is None:
        center = g.center
    if radius is None:
        radius = g.half_width
    Z = g.nodes()
    region = Q.unmasked & (np.abs(Z - center) <= radius)
    if not region.any():
        raise ValueError("region contains no unmasked nodes")
    best = 0.0
    # odd count so the region center itself is a disc center (singular
    # candidates concentrate there)
    cs = np.linspace(-radius, radius, lattice + 1 + (lattice % 2) + 2)[1:-1]
    r_max = radius / 2
    r = r_max
    while r >= 4 * g.spacing:
        for cx in cs:
            for cy in cs:
                c = center + cx + 1j * cy
                if abs(c - center) + r > radius:
                    continue
                disc = region & (np.abs(Z - c) <= r)
                cnt = int(disc.sum())
                if cnt < 8:
                    continue
                vals = Q.values[disc]
                mean = vals.mean()
                best = max(best, float(np.mean(np.abs(vals - mean))))
        r /= 2
    return best


def bmo_dominant_test(Q: Callable, center: complex, radius: float,
                      grid_factory: Callable[[int], RealField],
                      sizes: Sequence[int] = (128, 256, 512)) -> CriterionVerdict:
    """BMO-dominant audit: the dyadic-family norm must stabilize under refinement.

    ``grid_factory(n)`` must return Q sampled at resolution n over the region.
    A norm that keeps growing as the family refines (ratio >= 1.5 per
    doubling) reads VIOLATED; stable norms read SATISFIED.
    """
    norms = []
    for n in sizes:
        field = grid_factory(n)
        norms.append(bmo_norm(field, center=center, radius=radius))
    trace = [(1.0 / n, v) for n, v in zip(sizes, norms)]
    ratios = [b / max(a, 1e-300) for a, b in zip(norms[:-1], norms[1:])]
    growth = float(np.log2(max(ratios))) if ratios else 0.0
    if all(rt < 1.2 for rt in ratios):
        verdict = SATISFIED
    elif all(rt >= 1.5 for rt in ratios):
        verdict = VIOLATED
    else:
        verdict = INCONCLUSIVE
    return CriterionVerdict(
        criterion="BMO-dominant",
        verdict=verdict,
        trace=trace,
        growth_exponent=growth,
        params={"center": center, "radius": radius, "norms": norms},
        note="dyadic-family norm vs refinement",
    )


# ----------------------------------------------------------------------
# Criterion: Calderon-Zygmund growth
# ----------------------------------------------------------------------

def _saturated(KT, z0: complex, r: float) -> bool:
    probe = z0 + r * np.exp(1j * 2 * np.pi * np.arange(8) / 8)
    return bool(np.max(np.asarray(KT(probe), dtype=float)) >= SATURATION_CAP)


def _ratio_verdict(ratios: np.ndarray, eps: np.ndarray) -> tuple[str, float]:
    """Shared little-o decision: fit log(ratio) against log(log(1/eps)).

    Decreasing ratios (slope <= -PLATEAU_SLOPE) accept the little-o claim;
    growth (slope >= +PLATEAU_SLOPE) or a plateau above PLATEAU_FLOOR rejects
    it.  A plateau at a tiny level accepts (the ratio has effectively died).
    A ratio converging to a positive limit looks mildly decreasing until the
    ladder out-runs the O(1/log) correction, so ladders shallower than 150
    shells refuse to certify the ambiguous band (-0.35, -PLATEAU_SLOPE) and
    return INCONCLUSIVE there; audits at z0 = 0 reach full depth.
    """
    logu = np.log(np.log(1.0 / eps))
    slope = _fit_slope(logu, np.log(np.maximum(ratios, 1e-300)), last=8)
    if not np.all(np.isfinite(ratios)):
        return VIOLATED, slope
    if slope <= -PLATEAU_SLOPE:
        if len(ratios) < 150 and slope > -0.35 and ratios[-1] > PLATEAU_FLOOR:
            return INCONCLUSIVE, slope
        return SATISFIED, slope
    if slope >= PLATEAU_SLOPE:
        return VIOLATED, slope
    return (VIOLATED if ratios[-1] > PLATEAU_FLOOR else SATISFIED), slope


def cz_test(mu: Union[ComplexField, Callable], z0: complex, eps0: float,
            levels: int = DEEP_LEVELS, is_dilatation: bool = False) -> CriterionVerdict:
    """Annulus growth audit: the integral of K_T / |z-z0|^2 over
    eps < |z - z0| < eps0 must be o(log^2(1/eps)).

    The ratio of the truncated integral to log^2(1/eps) is fitted in the
    doubly logarithmic scale; a clearly decreasing ratio reads SATISFIED, a
    stabilized positive or growing ratio reads VIOLATED.
    """
    KT = _as_callable(mu) if is_dilatation else tangent_dilatation_callable(mu, z0)
    levels, clamp_note = _clamp_levels(KT, eps0, levels, z0)

    def integrand(z):
        return np.asarray(KT(z), float) / np.abs(z - z0) ** 2

    trace = []
    total = 0.0
    for k in range(1, levels + 1):
        hi = eps0 * 2.0 ** (-(k - 1))
        lo = eps0 * 2.0 ** (-k)
        total += _shell_integral(integrand, z0, lo, hi)
        trace.append((lo, total / math.log(1.0 / lo) ** 2))
        if k >= 8 and _saturated(KT, z0, lo):
            clamp_note = (clamp_note + f"; stopped at shell {k}: dilatation "
                          "saturates the float range").lstrip("; ")
            break
    ratios = np.asarray([v for _, v in trace])
    verdict, slope = _ratio_verdict(ratios, np.asarray([e for e, _ in trace]))
    return CriterionVerdict(
        criterion="CZ",
        verdict=verdict,
        trace=trace,
        growth_exponent=slope,
        params={"z0": z0, "eps0": eps0, "last_ratio": float(ratios[-1])},
        note=("ratio to log^2(1/eps); " + clamp_note).rstrip("; "),
    )


# ----------------------------------------------------------------------
# Criterion: Lehto integral
# ----------------------------------------------------------------------

def lehto_test(kfun: Callable[[float], float], eps0: float,
               levels: int = 30, z0: Optional[complex] = None) -> CriterionVerdict:
    """Lehto audit: T(eps) = integral_eps^eps0 dr / (r k_T(z0, r)) must diverge.

    ``kfun(r)`` is the circle mean of the tangent dilatation (build it from
    ``circle_mean`` / ``tangent_dilatation_callable``).  Unbounded growth
    with log-log slope away from 0 reads SATISFIED (divergent); a Cauchy
    tail under threshold reads VIOLATED (convergent).
    """
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")

    def integrand(s):
        r = np.exp(s)
        k = np.asarray([kfun(float(rv)) for rv in np.atleast_1d(r)], dtype=float)
        if np.any(~np.isfinite(k)) or np.any(k <= 0):
            raise ValueError("circle mean evaluated to zero or non-finite")
        return 1.0 / k

    trace = []
    total = 0.0
    for k in range(1, levels + 1):
        hi = eps0 * 2.0 ** (-(k - 1))
        lo = eps0 * 2.0 ** (-k)
        s, w = _panel_nodes(math.log(lo), math.log(hi), 3, order=10)
        total += float(np.sum(integrand(s) * w))
        trace.append((lo, total))
    T = np.asarray([v for _, v in trace])
    tail = (T[-1] - T[-5]) / max(T[-1], 1e-300) if len(T) >= 5 else 1.0
    logu = np.log(np.log(1.0 / np.asarray([e for e, _ in trace])))
    slope = _fit_slope(logu, np.log(np.maximum(T, 1e-300)), last=4)
    if tail < CAUCHY_TAIL:
        verdict = VIOLATED
    elif slope >= DIVERGENCE_SLOPE:
        verdict = SATISFIED
    else:
        verdict = INCONCLUSIVE
    return CriterionVerdict(
        criterion="LEHTO",
        verdict=verdict,
        trace=trace,
        growth_exponent=slope,
        params={"z0": z0, "eps0": eps0, "tail": float(tail)},
        note="truncated Lehto integral (heuristic divergence fit)",
    )


# ----------------------------------------------------------------------
# Criterion: Orlicz gauge
# ----------------------------------------------------------------------

def _tail_log_phi_over_t2(phi: OrliczFunction, delta: float,
                          levels: int = 60) -> tuple[str, list, float]:
    """Truncated dyadic audit of the tail integral of log Phi(t)/t^2."""

    def term(k):
        s, w = _panel_nodes(math.log(delta) + k * math.log(2),
                            math.log(delta) + (k + 1) * math.log(2), 2, order=10)
        t = np.exp(s)
        return float(np.sum(phi.log_eval(t) / t * w))  # log Phi / t^2 * t ds

    state, trace, decay = _dyadic_tail_audit(term, levels)
    if phi.tail_divergent is not None:
        return ("divergent" if phi.tail_divergent else "convergent"), trace, decay
    return state, trace, decay


def orlicz_test(K: Union[ComplexField, Callable], z0: complex, eps0: float,
                phi: OrliczFunction, delta: float = 1.0,
                levels: int = DEFAULT_LEVELS, is_dilatation: bool = True) -> CriterionVerdict:
    """Orlicz-type audit with gauge Phi.

    SATISFIED requires both (a) finiteness of the integral of Phi(K_T) over
    the punctured neighborhood (shell sums must form a convergent series) and
    (b) divergence of the tail integral of log Phi(t)/t^2 (closed form for
    preset gauges, truncated fit otherwise).  Shell sums are accumulated in
    the log domain, so exponential gauges never overflow.
    """
    KT = _as_callable(K) if is_dilatation else tangent_dilatation_callable(K, z0)
    levels, _ = _clamp_levels(KT, eps0, levels, z0)

    def log_integrand(z):
        return phi.log_eval(np.asarray(KT(z), dtype=float))

    log_shells = []
    for k in range(1, levels + 1):
        hi = eps0 * 2.0 ** (-(k - 1))
        lo = eps0 * 2.0 ** (-k)
        log_shells.append(_shell_log_integral(log_integrand, z0, lo, hi))
    log_shells = np.asarray(log_shells)
    log_total = float(logsumexp(log_shells))
    eps_grid = [eps0 * 2.0 ** (-k) for k in range(1, levels + 1)]
    trace = list(zip(eps_grid, np.exp(np.minimum(log_shells, 700.0))))
    shell_slope = _fit_slope(np.arange(len(log_shells)), log_shells, last=6)
    # series converges iff shell terms decay geometrically
    finite = shell_slope < -0.05 and log_shells[-1] - log_total < math.log(CAUCHY_TAIL) + 5
    diverging = shell_slope > 0.05
    tail_state, _tail_trace, tail_slope = _tail_log_phi_over_t2(phi, delta)
    if finite and tail_state == "divergent":
        verdict = SATISFIED
    elif diverging or tail_state == "convergent":
        verdict = VIOLATED
    else:
        verdict = INCONCLUSIVE
    return CriterionVerdict(
        criterion="ORLICZ" if phi.name != "exp" else "EXP",
        verdict=verdict,
        trace=trace,
        growth_exponent=shell_slope,
        params={
            "z0": z0,
            "eps0": eps0,
            "gauge": phi.name,
            "delta": delta,
            "tail": tail_state,
            "tail_slope": tail_slope,
        },
        note=f"shell sums of Phi(K_T); tail of log Phi/t^2 {tail_state}",
    )


# ----------------------------------------------------------------------
# Equivalent divergence conditions of an Orlicz gauge
# ----------------------------------------------------------------------

def _dyadic_tail_audit(term: Callable[[int], float], levels: int) -> tuple[str, list, float]:
    """Generic divergence audit of sum_k term(k) with nonnegative terms.

    The decisive statistic is the decay exponent p of the terms against the
    shell index (term_k ~ k^-p): summability needs p > 1, so clearly p >= 1.5
    reads convergent and p <= 0.9 divergent; a relative Cauchy tail under
    threshold also reads convergent (fast geometric decay).  The band in
    between (e.g. terms like 1/(k log k)) is inconclusive by truncation; for
    preset gauges the closed-form classification overrides.
    """
    terms = []
    total = 0.0
    trace = []
    for k in range(levels):
        t = float(term(k))
        terms.append(t)
        total += t
        trace.append((2.0 ** (-(k + 1)), total))
    T = np.asarray([v for _, v in trace])
    tm = np.asarray(terms)
    tail = (T[-1] - T[-5]) / max(abs(T[-1]), 1e-300) if len(T) >= 5 else 1.0
    ks = np.arange(1, len(tm) + 1, dtype=float)
    decay = -_fit_slope(np.log(ks), np.log(np.maximum(tm, 1e-300)), last=10)
    if tail < CAUCHY_TAIL:
        return "convergent", trace, decay
    if decay >= 1.5:
        return "convergent", trace, decay
    if decay <= 0.9:
        return "divergent", trace, decay
    return "inconclusive", trace, decay


def condition_equivalence_suite(phi: OrliczFunction, delta: float = 1.0,
                                levels: int = 60) -> dict:
    """Audit the five equivalent divergence conditions of a convex gauge.

    With H = log Phi, the conditions are

        (1) integral_D^inf H'(t) dt / t        = inf,
        (2) integral_D^inf H(t) dt / t^2       = inf,
        (3) integral_0^d  H(1/t) dt            = inf,
        (4) integral_D*^inf d eta / H^{-1}(eta) = inf,
        (5) integral_d*^inf d tau / (tau Phi^{-1}(tau)) = inf,

    equivalent for convex non-decreasing Phi.  For preset gauges the exact
    closed-form classification is used for the verdict and the truncated
    audits are reported as corroborating traces; otherwise verdicts come from
    the truncated fits.  Returns the verdict vector, its uniformity, and the
    traces.
    """
    t0 = max(delta, phi._inverse_scalar(math.log(1e-12)) + 1e-9, 1e-6)

    def dlog(t):
        if phi.dlog is not None:
            return np.asarray(phi.dlog(t), dtype=float)
        dt = np.maximum(1e-6 * t, 1e-9)
        return (phi.log_eval(t + dt) - phi.log_eval(np.maximum(t - dt, 0))) / (2 * dt)

    def term1(k):
        s, w = _panel_nodes(math.log(t0) + k * math.log(2), math.log(t0) + (k + 1) * math.log(2), 2, 10)
        t = np.exp(s)
        return float(np.sum(dlog(t) * w))  # H'(t)/t * t ds

    def term2(k):
        s, w = _panel_nodes(math.log(t0) + k * math.log(2), math.log(t0) + (k + 1) * math.log(2), 2, 10)
        t = np.exp(s)
        return float(np.sum(phi.log_eval(t) / t * w))

    def term3(k):
        # integral near 0 of H(1/t): dyadic shells downward from 1/t0
        hi = (1.0 / t0) * 2.0 ** (-k)
        lo = hi / 2
        s, w = _panel_nodes(math.log(lo), math.log(hi), 2, 10)
        t = np.exp(s)
        return float(np.sum(phi.log_eval(1.0 / t) * t * w))

    H0 = float(phi.log_eval(np.asarray([t0 * 2]))[0])
    eta0 = max(H0, 1e-6) + 1.0

    def term4(k):
        # H^{-1}(eta) = Phi^{-1}(e^eta) since H = log Phi shares Phi's monotonicity
        a = eta0 * 2.0 ** k
        b = eta0 * 2.0 ** (k + 1)
        y, w = _panel_nodes(math.log(a), math.log(b), 2, 10)
        eta = np.exp(y)
        vals = np.asarray([phi._inverse_scalar(float(e)) for e in eta])
        return float(np.sum(eta / vals * w))

    log_tau0 = float(phi.log_eval(np.asarray([t0 * 2]))[0]) + 1.0

    def term5(k):
        # tau = e^y, d tau/(tau Phi^{-1}) = dy / Phi^{-1}(e^y)
        a = log_tau0 + k * 2.0
        b = log_tau0 + (k + 1) * 2.0
        y, w = _panel_nodes(a, b, 2, 10)
        vals = np.asarray([phi._inverse_scalar(float(yy)) for yy in y])
        return float(np.sum(w / np.maximum(vals, 1e-300)))

    audits = {}
    names = ("Hprime_over_t", "H_over_t2", "H_inv_near_0", "inv_H", "inv_Phi")
    for name, term in zip(names, (term1, term2, term3, term4, term5)):
        state, trace, decay = _dyadic_tail_audit(term, levels)
        audits[name] = {"numeric": state, "trace": trace, "term_decay": decay}

    if phi.tail_divergent is not None:
        symbolic = "divergent" if phi.tail_divergent else "convergent"
        verdicts = {name: symbolic for name in names}
        for name in names:
            num = audits[name]["numeric"]
            audits[name]["contradicts"] = (
                num != "inconclusive" and num != symbolic
            )
        source = "closed-form"
    else:
        verdicts = {name: audits[name]["numeric"] for name in names}
        source = "truncated-fit"
    uniform = len(set(verdicts.values())) == 1
    return {
        "gauge": phi.name,
        "verdicts": verdicts,
        "uniform": uniform,
        "source": source,
        "audits": audits,
        "convex": True,
    }


# ----------------------------------------------------------------------
# FMO-driven growth bound
# ----------------------------------------------------------------------

def fmo_growth_check(phi: Callable, z0: complex, eps0: float,
                     eps_ladder: Optional[Sequence[float]] = None,
                     levels: int = 20) -> dict:
    """Growth audit of the weighted annulus integral of an FMO function.

    I(eps) = integral over eps < |z-z0| < eps0 of phi(z) dm / (|z-z0|
    log(1/|z-z0|))^2 is accumulated over dyadic shells and regressed against
    loglog(1/eps); the report carries the fitted slope and the ratio trace.
    Requires eps0 < e^-e (so the log factor stays away from 0).
    """
    if not (0 < eps0 < E_MINUS_E):
        raise ValueError(f"eps0 must lie in (0, e^-e = {E_MINUS_E:.4g})")
    fn = _as_callable(phi)

    def integrand(z):
        r = np.abs(z - z0)
        return np.asarray(fn(z), float) / (r * np.log(1.0 / r)) ** 2

    if eps_ladder is None:
        eps_ladder = [eps0 * 2.0 ** (-k) for k in range(1, levels + 1)]
    eps_ladder = sorted(set(float(e) for e in eps_ladder), reverse=True)
    trace = []
    total = 0.0
    hi = eps0
    for lo in eps_ladder:
        total += _shell_integral(integrand, z0, lo, hi)
        trace.append((lo, total))
        hi = lo
    I = np.asarray([v for _, v in trace])
    x = np.log(np.log(1.0 / np.asarray([e for e, _ in trace])))
    slope, intercept = np.polyfit(x, I, 1)
    ratios = I / x
    bounded = bool(np.isfinite(slope))
    return {
        "trace": trace,
        "fitted_slope": float(slope),
        "intercept": float(intercept),
        "ratio_trace": list(zip([e for e, _ in trace], ratios)),
        "bounded_ratio": bounded and float(np.max(np.abs(ratios))) < np.inf,
        "pass": bounded,
    }


# ----------------------------------------------------------------------
# General modulus condition
# ----------------------------------------------------------------------

def psi_condition_test(mu: Union[ComplexField, Callable], z0: complex,
                       family: PsiFamily, eps0: float,
                       levels: int = DEEP_LEVELS,
                       is_dilatation: bool = False) -> CriterionVerdict:
    """Audit of the modulus condition with weight family psi.

    The annulus integral of K_T psi^2(|z - z0|) must be o(I(eps)^2) with
    I(eps) the tail integral of psi.  The ratio is fitted in the log of
    log(1/eps); a decreasing ratio reads SATISFIED, growth or stabilization
    above threshold reads VIOLATED.
    """
    KT = _as_callable(mu) if is_dilatation else tangent_dilatation_callable(mu, z0)
    levels, clamp_note = _clamp_levels(KT, eps0, levels, z0)

    def integrand(z):
        r = np.abs(z - z0)
        return np.asarray(KT(z), float) * np.asarray(family.psi(r), float) ** 2

    trace = []
    num = 0.0
    for k in range(1, levels + 1):
        hi = eps0 * 2.0 ** (-(k - 1))
        lo = eps0 * 2.0 ** (-k)
        num += _shell_integral(integrand, z0, lo, hi)
        I = family.I(lo, eps0)
        if not np.isfinite(I) or I <= 0:
            raise ValueError("psi tail integral I(eps) evaluated to zero or non-finite")
        trace.append((lo, num / I ** 2))
        if k >= 8 and _saturated(KT, z0, lo):
            clamp_note = (clamp_note + f"; stopped at shell {k}: dilatation "
                          "saturates the float range").lstrip("; ")
            break
    ratios = np.asarray([v for _, v in trace])
    verdict, slope = _ratio_verdict(ratios, np.asarray([e for e, _ in trace]))
    return CriterionVerdict(
        criterion="PSI",
        verdict=verdict,
        trace=trace,
        growth_exponent=slope,
        params={"z0": z0, "eps0": eps0, "psi": family.name, "last_ratio": float(ratios[-1])},
        note=("ratio of weighted annulus integral to I(eps)^2; " + clamp_note).rstrip("; "),
    )
