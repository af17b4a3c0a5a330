"""Random generation from SN and TSN laws and scenario truncation windows.

Streams are counter-based (Philox) and keyed by ``(base_seed, stream_index)``,
so replication ``r`` of a study draws the same numbers no matter which worker
runs it or in what order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .sn_core import (
    SnParams,
    TruncationWindow,
    TsnModel,
    _std_cdf,
    _std_invert,
    _std_sf,
    sn_quantile,
)

__all__ = [
    "RngStream",
    "TruncationDirection",
    "sample_sn",
    "sample_tsn",
    "truncation_bounds",
]

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Identifies an independent random stream.

    Equal ``(base_seed, stream_index)`` pairs give bit-identical sequences;
    distinct pairs give independent ones.
    """

    base_seed: int
    stream_index: int = 0

    def __post_init__(self) -> None:
        for name in ("base_seed", "stream_index"):
            v = getattr(self, name)
            if not 0 <= int(v) <= _U64:
                raise InvalidParameterError(f"{name} must be a 64-bit unsigned integer")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.base_seed), spawn_key=(int(self.stream_index),))
        return np.random.Generator(np.random.Philox(seq))

    def child(self, index: int) -> "RngStream":
        """Sub-stream ``index`` of this stream (e.g. one per bootstrap replicate)."""
        seq = np.random.SeedSequence(
            int(self.base_seed), spawn_key=(int(self.stream_index), int(index))
        )
        return RngStream(int(seq.generate_state(2, np.uint64)[0]), int(index))


class TruncationDirection(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    DOUBLE = "double"

    @classmethod
    def parse(cls, value: "str | TruncationDirection") -> "TruncationDirection":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvalidParameterError(
                f"unknown truncation direction {value!r}; expected left, right or double"
            ) from None


def _as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else rng.generator()


def sample_sn(p: SnParams, n: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    """Draw ``n`` skew-normal variates via the half-normal representation."""
    if n < 1:
        raise InvalidParameterError("n must be at least 1")
    gen = _as_generator(rng)
    delta = p.alpha / math.sqrt(1.0 + p.alpha * p.alpha)
    z = gen.standard_normal((2, n))
    return p.xi + p.omega * (delta * np.abs(z[0]) + math.sqrt(1.0 - delta * delta) * z[1])


def sample_tsn(m: TsnModel, n: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    """Draw ``n`` truncated skew-normal variates by CDF inversion.

    Uniform ``u`` is mapped to the point whose parent CDF equals
    ``F(L) + u * mass``; when the window sits in the upper half the same
    equation is solved on the survival scale to keep precision.
    """
    if n < 1:
        raise InvalidParameterError("n must be at least 1")
    gen = _as_generator(rng)
    u = gen.random(n)
    p = m.params
    a, b = m.std_window
    alpha = p.alpha
    mass = m.mass
    fa = float(_std_cdf(a, alpha))
    if fa > 0.5:
        target = float(_std_sf(a, alpha)) - u * mass
        upper = True
    else:
        target = fa + u * mass
        upper = False
    # bracket: window intersected with the range the inversion can resolve
    lo = max(a, -40.0)
    hi = min(b, 40.0)
    z = _std_invert(alpha, np.maximum(target, 0.0), upper, lo, hi)
    x = p.xi + p.omega * z
    return np.clip(x, m.window.lower, m.window.upper)


def truncation_bounds(
    direction: TruncationDirection | str, tau: float, p: SnParams
) -> TruncationWindow:
    """Window removing parent mass ``tau`` on the requested side(s)."""
    direction = TruncationDirection.parse(direction)
    if not 0.0 < tau < 1.0:
        raise InvalidParameterError(f"tau must lie in (0, 1), got {tau}")
    if direction is TruncationDirection.LEFT:
        return TruncationWindow(sn_quantile(tau, p), math.inf)
    if direction is TruncationDirection.RIGHT:
        return TruncationWindow(-math.inf, sn_quantile(1.0 - tau, p))
    return TruncationWindow(sn_quantile(tau / 2.0, p), sn_quantile(1.0 - tau / 2.0, p))
