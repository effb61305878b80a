"""Preset library: named domains, coefficient families, oscillation profiles,
Orlicz gauges, weight families and boundary data.

Every preset returns either a vectorized callable or a constructed object,
so the same name works for the high-level pipelines, the criteria audits and
the command line.  Radial coefficient presets place the distortion axis
along z/conj(z) (the orientation that attains the upper tangent-dilatation
bound when negated); point-degenerate presets use the tangent orientation
about their base point so their tangent dilatation equals the named profile
exactly.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from .criteria import OrliczFunction, PsiFamily
from .fields import BoundaryData, DomainSpec

__all__ = [
    "domain_preset",
    "mu_preset",
    "q_profile_preset",
    "phi_gauge_preset",
    "psi_family_preset",
    "boundary_data_preset",
    "radial_stretch_map",
    "radial_stretch_inverse",
    "PRESET_NAMES",
]


# ----------------------------------------------------------------------
# Domains
# ----------------------------------------------------------------------

def domain_preset(name: str, samples: int = 512, **params) -> DomainSpec:
    """Construct a named domain boundary.

    disk:    radius r (default 1), center c (default 0);
    ellipse: semi-axes a, b (defaults 1.5, 1.0), center c;
    polygon: vertices (list of complex), resampled along edges.
    """
    t = 2 * np.pi * np.arange(samples) / samples
    if name == "disk":
        r = float(params.get("radius", 1.0))
        c = complex(params.get("center", 0.0))
        if r <= 0:
            raise ValueError("disk radius must be positive")
        return DomainSpec(c + r * np.exp(1j * t))
    if name == "ellipse":
        a = float(params.get("a", 1.5))
        b = float(params.get("b", 1.0))
        c = complex(params.get("center", 0.0))
        if a <= 0 or b <= 0:
            raise ValueError("ellipse semi-axes must be positive")
        return DomainSpec(c + a * np.cos(t) + 1j * b * np.sin(t))
    if name == "polygon":
        verts = np.asarray(params["vertices"], dtype=complex).ravel()
        if verts.size < 3:
            raise ValueError("polygon needs at least 3 vertices")
        per_edge = max(1, samples // verts.size)
        pts = []
        for a_v, b_v in zip(verts, np.roll(verts, -1)):
            s = np.arange(per_edge) / per_edge
            pts.append(a_v + (b_v - a_v) * s)
        return DomainSpec(np.concatenate(pts))
    raise ValueError(f"unknown domain preset {name!r}")


# ----------------------------------------------------------------------
# Beltrami coefficient families
# ----------------------------------------------------------------------

def _phase_radial(z: np.ndarray) -> np.ndarray:
    """z / conj(z) with the (measure-zero) origin set to 0."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros_like(z)
    nz = z != 0
    out[nz] = z[nz] / np.conj(z[nz])
    return out


def _phase_tangent(z: np.ndarray, z0: complex) -> np.ndarray:
    d = np.asarray(z, dtype=complex) - z0
    out = np.zeros_like(d)
    nz = d != 0
    out[nz] = d[nz] / np.conj(d[nz])
    return out


def _k_of_K(K: np.ndarray) -> np.ndarray:
    """Modulus |mu| realizing pointwise dilatation K: k = (K-1)/(K+1)."""
    K = np.asarray(K, dtype=float)
    return (K - 1.0) / (K + 1.0)


def mu_preset(name: str, **params) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized Beltrami coefficient families on the unit disk.

    zero:             mu = 0;
    radial-stretch:   mu = ((K-1)/(K+1)) z/conj(z) on |z| < 1 (parameter K >= 1),
                      the coefficient of the radial stretch z |z|^(K-1);
    tangent:          mu = k (z - z0)/conj(z - z0) (parameters k in (-1, 1), z0);
    log-degenerate:   pointwise dilatation log^lam(e / |z - z0|) clipped below
                      at 1, tangent orientation about z0 (parameters lam, z0);
    exp-boundary:     dilatation 1 + log(e / (1 - |z|)) on the unit disk
                      (exponentially integrable boundary blow-up);
    inv-sq-boundary:  dilatation (1 - |z|)^{-2} on the unit disk (inadmissible
                      boundary blow-up; negative control).
    """
    if name == "zero":
        return lambda z: np.zeros_like(np.asarray(z, dtype=complex))
    if name == "radial-stretch":
        K = float(params.get("K", 2.0))
        if K < 1:
            raise ValueError("radial-stretch needs K >= 1")
        k = (K - 1.0) / (K + 1.0)

        def mu_rs(z):
            z = np.asarray(z, dtype=complex)
            out = k * _phase_radial(z)
            out[np.abs(z) >= 1] = 0
            return out

        return mu_rs
    if name == "tangent":
        k = float(params.get("k", 0.5))
        z0 = complex(params.get("z0", 0.0))
        if not (-1 < k < 1):
            raise ValueError(f"tangent preset needs |k| < 1 (ellipticity bound), got {k}")
        return lambda z: k * _phase_tangent(z, z0)
    if name == "log-degenerate":
        lam = float(params.get("lam", 0.5))
        z0 = complex(params.get("z0", 1.0))
        if lam <= 0:
            raise ValueError("log-degenerate needs lam > 0")

        def mu_ld(z):
            z = np.asarray(z, dtype=complex)
            r = np.abs(z - z0)
            K = np.ones_like(r)
            nz = (r > 0) & (r < math.e)
            K[nz] = np.maximum(np.log(math.e / r[nz]) ** lam, 1.0)
            return -_k_of_K(K) * _phase_tangent(z, z0)

        return mu_ld
    if name == "exp-boundary":
        def mu_eb(z):
            z = np.asarray(z, dtype=complex)
            r = np.abs(z)
            K = np.ones_like(r)
            inside = r < 1
            gap = np.maximum(1.0 - r[inside], 1e-12)
            K[inside] = 1.0 + np.log(math.e / gap)
            out = _k_of_K(K) * _phase_radial(z)
            out[~inside] = 0
            return out

        return mu_eb
    if name == "inv-sq-boundary":
        def mu_isb(z):
            z = np.asarray(z, dtype=complex)
            r = np.abs(z)
            K = np.ones_like(r)
            inside = r < 1
            gap = np.maximum(1.0 - r[inside], 1e-6)
            K[inside] = gap ** -2.0
            out = _k_of_K(K) * _phase_radial(z)
            out[~inside] = 0
            return out

        return mu_isb
    raise ValueError(f"unknown mu preset {name!r}")


def radial_stretch_map(K: float) -> Callable[[np.ndarray], np.ndarray]:
    """Closed-form radial stretch f(z) = z |z|^(K-1) inside the unit disk, z outside."""

    def f(z):
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        return np.where(r < 1, z * np.where(r > 0, r, 1.0) ** (K - 1.0), z)

    return f


def radial_stretch_inverse(K: float) -> Callable[[np.ndarray], np.ndarray]:
    """Inverse of the radial stretch: w |w|^(1/K - 1) inside the unit disk."""

    def finv(w):
        w = np.asarray(w, dtype=complex)
        r = np.abs(w)
        return np.where(r < 1, w * np.where(r > 0, r, 1.0) ** (1.0 / K - 1.0), w)

    return finv


# ----------------------------------------------------------------------
# Oscillation profiles (dominants Q around a base point)
# ----------------------------------------------------------------------

def q_profile_preset(name: str, **params) -> Callable[[np.ndarray], np.ndarray]:
    """Radial oscillation profiles Q(r) used as dilatation dominants.

    const:    Q = c (default 2);
    log:      Q = log(e / r);
    pow-log:  Q = log^lam(e / r) (parameter lam, default 0.5);
    inv-r:    Q = 1 / r;
    exp-integrable: Q = 1 + log(e / r) (exponentially integrable archetype).
    """
    if name == "const":
        c = float(params.get("c", 2.0))
        return lambda r: np.full_like(np.asarray(r, dtype=float), c)
    if name == "log":
        return lambda r: np.log(math.e / np.asarray(r, dtype=float))
    if name == "pow-log":
        lam = float(params.get("lam", 0.5))
        return lambda r: np.log(math.e / np.asarray(r, dtype=float)) ** lam
    if name == "inv-r":
        return lambda r: 1.0 / np.asarray(r, dtype=float)
    if name == "exp-integrable":
        return lambda r: 1.0 + np.log(math.e / np.asarray(r, dtype=float))
    raise ValueError(f"unknown oscillation profile {name!r}")


# ----------------------------------------------------------------------
# Orlicz gauges
# ----------------------------------------------------------------------

def phi_gauge_preset(name: str, **params) -> OrliczFunction:
    """Named convex gauges with exact log forms and tail classifications.

    exp:           Phi(t) = e^(alpha t); tail integral of log Phi / t^2 diverges;
    power:         Phi(t) = t^p (p > 1); tail converges;
    exp-sqrt:      Phi(t) = exp(sqrt(t)); tail converges;
    exp-over-log:  Phi(t) = exp(t / log(e + t)); tail diverges.
    """
    if name == "exp":
        alpha = float(params.get("alpha", 1.0))
        if alpha <= 0:
            raise ValueError("exp gauge needs alpha > 0")
        return OrliczFunction(
            name="exp",
            log_eval=lambda t: alpha * np.asarray(t, dtype=float),
            dlog=lambda t: np.full_like(np.asarray(t, dtype=float), alpha),
            tail_divergent=True,
        )
    if name == "power":
        p = float(params.get("p", 2.0))
        if p <= 1:
            raise ValueError("power gauge needs p > 1")

        def log_eval(t):
            t = np.asarray(t, dtype=float)
            with np.errstate(divide="ignore"):
                return p * np.log(t)

        return OrliczFunction(
            name="power",
            log_eval=log_eval,
            dlog=lambda t: p / np.maximum(np.asarray(t, dtype=float), 1e-300),
            tail_divergent=False,
        )
    if name == "exp-sqrt":
        # convex only from t = 1 on; the tail conditions never look below that
        return OrliczFunction(
            name="exp-sqrt",
            log_eval=lambda t: np.sqrt(np.asarray(t, dtype=float)),
            dlog=lambda t: 0.5 / np.sqrt(np.maximum(np.asarray(t, dtype=float), 1e-300)),
            tail_divergent=False,
            convex_from=1.0,
        )
    if name == "exp-over-log":
        def log_eval(t):
            t = np.asarray(t, dtype=float)
            return t / np.log(math.e + t)

        def dlog(t):
            t = np.asarray(t, dtype=float)
            L = np.log(math.e + t)
            return (L - t / (math.e + t)) / L ** 2

        return OrliczFunction(
            name="exp-over-log",
            log_eval=log_eval,
            dlog=dlog,
            tail_divergent=True,
        )
    raise ValueError(f"unknown Orlicz gauge {name!r}")


# ----------------------------------------------------------------------
# Weight families for the general modulus condition
# ----------------------------------------------------------------------

def psi_family_preset(name: str) -> PsiFamily:
    """Weight families with closed-form tail integrals.

    inv-t:      psi = 1/t,               I(eps) = log(eps0 / eps);
    inv-t-log:  psi = 1/(t log(e/t)),    I(eps) = log(log(e/eps)/log(e/eps0)).
    """
    if name == "inv-t":
        return PsiFamily(
            name="inv-t",
            psi=lambda t: 1.0 / np.asarray(t, dtype=float),
            integral=lambda eps, eps0: math.log(eps0 / eps),
        )
    if name == "inv-t-log":
        return PsiFamily(
            name="inv-t-log",
            psi=lambda t: 1.0 / (np.asarray(t, dtype=float) * np.log(math.e / np.asarray(t, dtype=float))),
            integral=lambda eps, eps0: math.log(math.log(math.e / eps) / math.log(math.e / eps0)),
        )
    raise ValueError(f"unknown psi family {name!r}")


# ----------------------------------------------------------------------
# Boundary data
# ----------------------------------------------------------------------

def boundary_data_preset(name: str, domain: DomainSpec, **params) -> BoundaryData:
    """Boundary data families on a domain.

    const:        phi = c (default 0);
    cos-harmonic: phi(zeta) = Re zeta (harmonic polynomial trace; reduces to
                  cos(theta) on the unit circle);
    table:        explicit per-sample values.
    """
    if name == "const":
        c = float(params.get("c", 0.0))
        return BoundaryData(domain, np.full(domain.m, c))
    if name == "cos-harmonic":
        return BoundaryData(domain, domain.boundary.real)
    if name == "table":
        return BoundaryData(domain, np.asarray(params["values"], dtype=float))
    raise ValueError(f"unknown boundary data preset {name!r}")


PRESET_NAMES = {
    "domain": ("disk", "ellipse", "polygon"),
    "mu": ("zero", "radial-stretch", "tangent", "log-degenerate", "exp-boundary", "inv-sq-boundary"),
    "q_profile": ("const", "log", "pow-log", "inv-r", "exp-integrable"),
    "phi_gauge": ("exp", "power", "exp-sqrt", "exp-over-log"),
    "psi_family": ("inv-t", "inv-t-log"),
    "boundary": ("const", "cos-harmonic", "table"),
}
