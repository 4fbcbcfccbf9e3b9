"""Coordinate layouts that say where rates, assets and currencies live in ``y_t``.

All indices are 0-based.  In the FX layout the domestic log rate sits at
coordinate 0 and the log rate of foreign country ``i`` at coordinate ``i+1``;
the asset block ``x~ = (x~d, x~f, x~q)`` occupies the last ``n_x`` coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange, ValidationError


@dataclass(frozen=True)
class NormalLayout:
    """``y_t = (z_t, x_t)`` with price levels ``x_t`` and a flat rate ``r``."""

    n_z: int
    n_x: int
    rate: float

    def __post_init__(self):
        if self.n_x < 1 or self.n_z < 0:
            raise ValidationError("need at least one asset", "market")
        if not self.rate > -1:
            raise ValidationError("rate must exceed -1", "market.rate")

    @property
    def n(self) -> int:
        return self.n_z + self.n_x

    @property
    def m2(self) -> np.ndarray:
        return np.eye(self.n)[self.n_z:]

    def asset(self, i: int) -> int:
        if not 0 <= i < self.n_x:
            raise IndexOutOfRange(f"asset {i} outside 0..{self.n_x - 1}", "asset")
        return i


@dataclass(frozen=True)
class FxLayout:
    """Domestic-foreign market layout.

    ``n_f`` lists the number of foreign assets per country, so the number of
    countries is ``len(n_f)``.
    """

    n_z: int
    n_d: int
    n_f: tuple

    def __post_init__(self):
        object.__setattr__(self, "n_f", tuple(int(v) for v in self.n_f))
        if self.n_z < self.n_q + 1:
            raise ValidationError("economic block must hold the domestic and every foreign rate", "market.n_z")
        if self.n_x < 1:
            raise ValidationError("need at least one traded price", "market")

    @property
    def n_q(self) -> int:
        return len(self.n_f)

    @property
    def n_f_total(self) -> int:
        return sum(self.n_f)

    @property
    def n_x(self) -> int:
        return self.n_d + self.n_f_total + self.n_q

    @property
    def n(self) -> int:
        return self.n_z + self.n_x

    @property
    def m2(self) -> np.ndarray:
        return np.eye(self.n)[self.n_z:]

    @property
    def j(self) -> np.ndarray:
        """``n_f x n_q`` block of ones mapping each foreign asset to its currency."""
        out = np.zeros((self.n_f_total, self.n_q))
        row = 0
        for i, cnt in enumerate(self.n_f):
            out[row:row + cnt, i] = 1.0
            row += cnt
        return out

    @property
    def r2(self) -> np.ndarray:
        """Converts log prices into log domestic-currency prices."""
        out = np.eye(self.n_x)
        f0 = self.n_d
        q0 = self.n_d + self.n_f_total
        out[f0:q0, q0:] = self.j
        return out

    @property
    def r_tilde(self) -> np.ndarray:
        return np.hstack([np.zeros((self.n_x, self.n_z)), self.r2])

    @property
    def carry(self) -> np.ndarray:
        """Rate-carry matrix ``C`` (``n_x x n``) applied to ``y_{t-1}``."""
        out = np.zeros((self.n_x, self.n))
        out[: self.n_d, 0] = 1.0
        row = self.n_d
        for i, cnt in enumerate(self.n_f):
            out[row:row + cnt, i + 1] = 1.0
            row += cnt
        for i in range(self.n_q):
            out[row + i, 0] = 1.0
            out[row + i, i + 1] = -1.0
        return out

    def domestic(self, i: int) -> int:
        if not 0 <= i < self.n_d:
            raise IndexOutOfRange(f"domestic asset {i} outside 0..{self.n_d - 1}", "asset")
        return i

    def foreign(self, i: int, k: int) -> int:
        if not 0 <= i < self.n_q:
            raise IndexOutOfRange(f"country {i} outside 0..{self.n_q - 1}", "country")
        if not 0 <= k < self.n_f[i]:
            raise IndexOutOfRange(f"asset {k} outside 0..{self.n_f[i] - 1}", "asset")
        return self.n_d + sum(self.n_f[:i]) + k

    def currency(self, i: int) -> int:
        if not 0 <= i < self.n_q:
            raise IndexOutOfRange(f"country {i} outside 0..{self.n_q - 1}", "country")
        return self.n_d + self.n_f_total + i

    def rate_coord(self, country: int | None = None) -> int:
        """Coordinate of the domestic (``None``) or foreign log rate."""
        if country is None:
            return 0
        if not 0 <= country < self.n_q:
            raise IndexOutOfRange(f"country {country} outside 0..{self.n_q - 1}", "country")
        return country + 1


@dataclass(frozen=True)
class HjmLayout:
    """Log instantaneous forward rates on the first ``horizon`` coordinates.

    ``y_t[j]`` is the log forward rate for the period ``t+j -> t+j+1``, so
    ``y_t[0]`` is the log spot rate applying from ``t`` to ``t+1``.
    """

    horizon: int
    n: int

    def __post_init__(self):
        if not 1 <= self.horizon <= self.n:
            raise ValidationError(f"horizon {self.horizon} must lie in 1..{self.n}", "market.horizon")
