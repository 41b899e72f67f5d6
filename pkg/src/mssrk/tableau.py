"""Runge-Kutta coefficient sets and their multi-symplecticity conditions.

A :class:`Tableau` holds the coefficients of one direction (time or one
spatial axis).  A pair/quadruple of tableaux is multi-symplectic when every
direction satisfies ``b_k b_j - b_k a_kj - b_j a_jk = 0``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL = 1e-12

_SQRT3_6 = 0.28867513459481288
_SQRT15_15 = 0.25819888974716110
_SQRT15_24 = 0.16137430609197570
_SQRT15_30 = 0.12909944487358055


@dataclass(frozen=True)
class Tableau:
    """RK coefficients for one direction: stage matrix ``a`` and weights ``b``.

    The abscissae ``c`` are always derived as the row sums of ``a``.
    """

    a: np.ndarray
    b: np.ndarray
    stages: int = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"a must be square, got shape {a.shape}")
        if b.ndim != 1 or b.shape[0] != a.shape[0]:
            raise ValueError(f"b must have length {a.shape[0]}, got {b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("tableau entries must be finite")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "stages", a.shape[0])

    @property
    def c(self) -> np.ndarray:
        """Stage abscissae, recomputed as row sums of ``a``."""
        return self.a.sum(axis=1)

    def to_json(self) -> str:
        return json.dumps(
            {"stages": self.stages, "a": self.a.tolist(), "b": self.b.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "Tableau":
        data = json.loads(text)
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "Tableau":
        unknown = set(data) - {"stages", "a", "b"}
        if unknown:
            raise ValueError(f"unknown tableau keys: {sorted(unknown)}")
        t = cls(a=np.array(data["a"], dtype=float), b=np.array(data["b"], dtype=float))
        if "stages" in data and int(data["stages"]) != t.stages:
            raise ValueError(
                f"declared stages {data['stages']} disagree with a of shape {t.a.shape}"
            )
        return t


def condition_residual(t: Tableau) -> np.ndarray:
    """Residual matrix M_kj = b_k b_j - b_k a_kj - b_j a_jk.

    The method is multi-symplectic in this direction iff M vanishes.
    """
    b = t.b
    return np.outer(b, b) - b[:, None] * t.a - b[None, :] * t.a.T


def condition_residual_literal(t: Tableau) -> np.ndarray:
    """Residual of the non-transposed variant b_k b_j - b_k a_kj - b_j a_kj.

    Reported alongside :func:`condition_residual` for transparency; the
    transposed-index form is the one enforced.
    """
    b = t.b
    return np.outer(b, b) - b[:, None] * t.a - b[None, :] * t.a


def is_multisymplectic(t: Tableau, tol: float = DEFAULT_TOL) -> bool:
    """True iff the condition residual vanishes to within ``tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return bool(np.abs(condition_residual(t)).max() <= tol)


_BUILTINS = {
    "midpoint": lambda: Tableau(a=np.array([[0.5]]), b=np.array([1.0])),
    "euler_explicit": lambda: Tableau(a=np.array([[0.0]]), b=np.array([1.0])),
    "gauss2": lambda: Tableau(
        a=np.array(
            [
                [0.25, 0.25 - _SQRT3_6],
                [0.25 + _SQRT3_6, 0.25],
            ]
        ),
        b=np.array([0.5, 0.5]),
    ),
    "gauss3": lambda: Tableau(
        a=np.array(
            [
                [0.13888888888888889, 2.0 / 9.0 - _SQRT15_15, 0.13888888888888889 - _SQRT15_30],
                [0.13888888888888889 + _SQRT15_24, 2.0 / 9.0, 0.13888888888888889 - _SQRT15_24],
                [0.13888888888888889 + _SQRT15_30, 2.0 / 9.0 + _SQRT15_15, 0.13888888888888889],
            ]
        ),
        b=np.array([0.27777777777777778, 0.44444444444444444, 0.27777777777777778]),
    ),
    "rk4": lambda: Tableau(
        a=np.array(
            [
                [0.0, 0.0, 0.0, 0.0],
                [0.5, 0.0, 0.0, 0.0],
                [0.0, 0.5, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ]
        ),
        b=np.array([1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0]),
    ),
}


def builtin_tableau(name: str) -> Tableau:
    """Look up a named coefficient set.

    Valid names: midpoint, gauss2, gauss3, euler_explicit, rk4.
    """
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ValueError(
            f"unknown tableau {name!r}; valid names: {', '.join(sorted(_BUILTINS))}"
        ) from None
