"""Tolerance defaults."""

from dataclasses import dataclass

#: relative threshold used when compressing intermediate results
THRESHOLD = 1e-15
#: relative threshold used for final truncation of symbols and corrections
EPS = 1e-14
#: default stopping tolerance for the mean iterations
TOL = 1e-13
MAX_ITER = 100


@dataclass(frozen=True)
class ToleranceConfig:
    threshold: float = THRESHOLD
    eps: float = EPS
    tol: float = TOL
    max_iter: int = MAX_ITER

    def __post_init__(self):
        for name in ("threshold", "eps", "tol"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {value!r}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
