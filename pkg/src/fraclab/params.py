"""Problem parameters: dimension, fractional order, derived exponents."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Params:
    """Dimension n >= 1 and fractional order sigma in (0, 1).

    All derived exponents are computed once so every formula in the
    library reads from the same record.  The critical exponents exist
    only when n > 2*sigma; accessing them otherwise raises.
    """

    n: int
    sigma: float
    _nm2s: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.n < 1 or int(self.n) != self.n:
            raise ValueError(f"n must be an integer >= 1, got {self.n}")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")
        object.__setattr__(self, "_nm2s", self.n - 2.0 * self.sigma)

    def _require_subcritical(self) -> float:
        if self._nm2s <= 0.0:
            raise ValueError("exponent requires n > 2*sigma")
        return self._nm2s

    @property
    def p(self) -> float:
        """Critical exponent (n + 2 sigma) / (n - 2 sigma)."""
        return (self.n + 2.0 * self.sigma) / self._require_subcritical()

    @property
    def half_exp(self) -> float:
        """(n - 2 sigma) / 2, the bubble decay exponent."""
        return self._require_subcritical() / 2.0

    @property
    def kelvin_exp(self) -> float:
        """n - 2 sigma, the inversion weight exponent."""
        return self._require_subcritical()
