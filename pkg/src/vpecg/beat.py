"""Beat-level signal container shared by the fitting pipeline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class BeatSignal:
    """One sliced heartbeat: samples in mV on a time axis with t = 0 at the R peak."""

    samples: np.ndarray
    f_s: float
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))
        if self.samples.shape != self.t.shape or self.samples.ndim != 1:
            raise ValueError("samples and t must be 1-d arrays of equal length")
        if not self.f_s > 0:
            raise ValueError("f_s must be positive")

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def r_index(self) -> int:
        """Sample index of the R peak (where t crosses zero)."""
        return int(round(-self.t[0] * self.f_s))
