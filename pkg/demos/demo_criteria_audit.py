"""
Auditing boundary singularities with every integral criterion
=============================================================

Five oscillation profiles (playing the role of the tangent dilatation near a
boundary point) against seven solvability tests.  Each verdict is fitted
from truncated dyadic-shell integrals; SATISFIED/VIOLATED certify the trend,
and every verdict carries its trace for inspection.
"""

import numpy as np

from qcdirichlet.criteria import (
    circle_mean,
    cz_test,
    default_eps0,
    fmo_test,
    lehto_test,
    mean_test,
    orlicz_test,
    psi_condition_test,
    tangent_dilatation_callable,
    tangent_profile_mu,
)
from qcdirichlet.presets import phi_gauge_preset, psi_family_preset, q_profile_preset

z0 = 0j
eps0 = default_eps0(z0)
gauge = phi_gauge_preset("exp")
psi1 = psi_family_preset("inv-t")
psi2 = psi_family_preset("inv-t-log")

rows = ("const", "log", "pow-log", "inv-r", "exp-integrable")
cols = ("FMO", "MEAN", "CZ", "LEHTO", "EXP", "PSI 1/t", "PSI 1/(t log)")

print(f"audit radius eps0 = {eps0:.4f}\n")
print(f"{'profile':16s}" + "".join(f"{c:>14s}" for c in cols))
for row in rows:
    prof = q_profile_preset(row)
    Qz = lambda z, prof=prof: prof(np.abs(np.asarray(z) - z0))
    mu = tangent_profile_mu(prof, z0)
    kt = tangent_dilatation_callable(mu, z0)
    verdicts = [
        fmo_test(Qz, z0, eps0=eps0),
        mean_test(Qz, z0, eps0),
        cz_test(mu, z0, eps0),
        lehto_test(lambda r, kt=kt: circle_mean(kt, z0, r), eps0, z0=z0),
        orlicz_test(kt, z0, eps0, gauge),
        psi_condition_test(mu, z0, psi1, eps0),
        psi_condition_test(mu, z0, psi2, eps0),
    ]
    print(f"{row:16s}" + "".join(f"{v.verdict:>14s}" for v in verdicts))

print("\nA SATISFIED Lehto/Orlicz/FMO column predicts that the truncation")
print("ladder will stabilize; the inv-r row fails everything, matching the")
print("non-contracting ladder of the inverse-square boundary blow-up.")

# one trace, for flavor: the Lehto integral of the log profile
kt = tangent_dilatation_callable(tangent_profile_mu(q_profile_preset("log"), z0), z0)
v = lehto_test(lambda r: circle_mean(kt, z0, r), eps0, z0=z0)
print("\nLehto trace for the log profile (eps, truncated integral):")
for eps, val in v.trace[::6]:
    print(f"  {eps:9.2e}  {val:8.4f}")
print(f"verdict: {v.verdict} (fitted growth {v.growth_exponent:+.3f})")
