"""Default tolerances and budgets, in one place.

Reports echo the effective values so that a run can be reproduced.
"""
from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    psd_tol: float = 1e-9          # relative: threshold -psd_tol * max(1, |M|)
    hermitian_tol: float = 1e-6    # anti-Hermitian part allowed before erroring
    commutator_tol: float = 1e-8   # relative to max |A_i|^2
    mc_sigmas: float = 5.0         # Monte Carlo acceptance in standard errors
    yosida_margin: float = 1e-6    # lambda > max(0, growth bound) + margin
    max_subsets_d: int = 20

    def with_overrides(self, **kw) -> "Tolerances":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULTS = Tolerances()
