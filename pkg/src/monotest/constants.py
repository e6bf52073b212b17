"""Named constants behind every big-O in the testers.

Defaults are the calibrated values; any field can be overridden per run, for
example ``DEFAULTS.override(C_cmp=4)`` or ``--set C_cmp=4`` on the command line.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class Constants:
    # subroutines
    C_cmp: float = 8.0  # compare: draws = C_cmp * K * log(1/delta) / eta^2
    C_u: float = 8.0  # near-uniform decider: point pairs = C_u / eps
    C_z: float = 16.0  # flattening distance (COND): samples = C_z / eps^2
    C_cd: float = 16.0  # flattening distance (cumulative): draws = C_cd * log(2/delta) / eps^2
    C_id: float = 2.0  # tv to a known pmf: points = C_id * log(1/delta) / eps^2
    C_ev: float = 0.25  # same, for the EVAL tester's harmonic-proposal estimate
    C_bd: float = 8.0  # binary descent: per-level draws scale
    C_coll: float = 1.0  # pooled collision check: samples = C_coll * sqrt(|I|) / eps^2
    C_dcoll: float = 8.0  # standalone SAMP decider: C_dcoll * sqrt(|I|) * log(2/delta) / eps^2
    # testers
    C_s: float = 2.0  # max splits = C_s * log2(n)^2 / eps
    C_h: float = 1.0  # reference samples = C_h * (max splits / eps) * log(max splits)
    C_T: float = 0.25  # leaf-weight samples = C_T * log2(n)^4 / eps^2
    C_samp: float = 4.0  # SAMP baseline pool = C_samp * sqrt(n) * log2(n) / eps^2
    C_e: float = 2.0  # exponential-property samples = C_e / (eps * alpha)
    C_tau: float = 64.0  # witness slack tau = C_tau * eps * alpha^2
    C_w: float = 2.0  # cumulative witness check samples = C_w / (alpha * eps)
    C_t: float = 64.0  # tolerant learner samples = C_t * log(n) / eps2^3
    eta_div: float = 32.0  # decider compare accuracy eta = eps / eta_div
    window_div: float = 8.0  # decider accepts ratios in [1 - eps/window_div, 1 + eps/window_div]

    def override(self, **kw) -> "Constants":
        known = {f.name for f in fields(self)}
        bad = sorted(set(kw) - known)
        if bad:
            raise KeyError(f"unknown constant(s): {', '.join(bad)}")
        return replace(self, **{k: float(v) for k, v in kw.items()})

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


DEFAULTS = Constants()
