"""Sensor attack vectors, including the residual-replacement attack on CUSUM.

A stealthy attacker who sees the clean measurement and the filter's predicted
output injects

    xi = -(y - C xhat) + Sigma^(1/2) xi_target

so that the residual the detector sees becomes exactly
``Sigma^(1/2) xi_target`` and the test measure becomes ``|xi_target|^2``.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._validation import as_vector


class AttackKind(str, Enum):
    NONE = "none"
    ADDITIVE_BIAS = "additive_bias"
    STEALTHY_PERSISTENT = "stealthy_persistent"
    STEALTHY_ALTERNATING = "stealthy_alternating"

    @property
    def stealthy(self):
        return self in (AttackKind.STEALTHY_PERSISTENT, AttackKind.STEALTHY_ALTERNATING)


@dataclass(frozen=True, eq=False)
class AttackSpec:
    """Attack schedule and payload.

    ``cancel`` selects which residual channels a stealthy attacker cancels:
    ``"full"`` cancels the whole residual vector, ``"payload"`` only the
    channels where the payload is nonzero.
    """

    kind: AttackKind = AttackKind.NONE
    onset: int = 0
    payload: np.ndarray | None = None
    period: int = 1
    cancel: str = "full"

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        if self.onset < 0:
            raise ValueError(f"onset must be >= 0, got {self.onset}")
        if self.period < 1:
            raise ValueError(f"period must be >= 1, got {self.period}")
        if self.cancel not in ("full", "payload"):
            raise ValueError(f"cancel must be 'full' or 'payload', got {self.cancel!r}")
        if self.kind is not AttackKind.NONE:
            if self.payload is None:
                raise ValueError(f"attack kind {self.kind.value} needs a payload")
            object.__setattr__(self, "payload", as_vector(self.payload, "payload").copy())

    @classmethod
    def on_channel(cls, kind, magnitude, channel, s, onset=0, period=1, cancel="full"):
        """Scalar ``magnitude`` on 0-based ``channel`` of an ``s``-sensor output."""
        if not 0 <= channel < s:
            raise ValueError(f"channel must lie in [0, {s}), got {channel}")
        payload = np.zeros(s)
        payload[channel] = magnitude
        return cls(kind=kind, onset=onset, payload=payload, period=period, cancel=cancel)

    def check_dimension(self, s):
        if self.payload is not None and self.payload.size != s:
            raise ValueError(f"payload has {self.payload.size} entries but the plant has {s} sensors")


@dataclass(frozen=True, eq=False)
class AttackerView:
    """What the attacker observes at step k: clean measurement and predicted output."""

    y: np.ndarray
    y_hat: np.ndarray

    @property
    def residual(self):
        return self.y - self.y_hat


def stealthy_xi(view, SigmaHalf, xi_target, cancel_mask=None):
    """Injection that replaces the residual by ``SigmaHalf @ xi_target``.

    With ``cancel_mask`` only the masked channels of the clean residual are
    cancelled; the rest keep their nominal noise.
    """
    residual = view.residual
    if cancel_mask is not None:
        residual = np.where(cancel_mask, residual, 0.0)
    return -residual + np.asarray(SigmaHalf) @ np.asarray(xi_target, dtype=float)


def payload_at(spec, k):
    """Payload active at step ``k``: zero before onset, sign-alternating every ``period`` steps if requested."""
    if spec.kind is AttackKind.NONE:
        return None
    if k < spec.onset:
        return np.zeros_like(spec.payload)
    if spec.kind is AttackKind.STEALTHY_ALTERNATING:
        sign = -1.0 if ((k - spec.onset) // spec.period) % 2 else 1.0
        return sign * spec.payload
    return spec.payload.copy()


def apply_attack(spec, view, est, k):
    """Attack vector added to the measurement at step ``k``.

    ``view`` is only read for stealthy kinds; ``est`` supplies ``SigmaHalf``.
    """
    if spec.kind is AttackKind.NONE:
        return np.zeros(view.y.size) if view is not None else 0.0
    payload = payload_at(spec, k)
    if k < spec.onset:
        return payload
    if spec.kind is AttackKind.ADDITIVE_BIAS:
        return payload
    mask = spec.payload != 0 if spec.cancel == "payload" else None
    return stealthy_xi(view, est.SigmaHalf, payload, mask)
