"""Forward-operator contract, the Gaussian noise model and a linear test operator."""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from .numkernel import Vec, gaussian_vector, norm


class InvalidOperatorError(ValueError):
    pass


class ForwardOperator(abc.ABC):
    """Evaluation contract shared by all solvers.

    Implementations must make derivative_apply and adjoint_apply mutually
    adjoint with respect to the Euclidean inner product on coefficient
    vectors: <F'(c) q, w> == <q, F'(c)* w> up to round-off.

    Attributes
    ----------
    n, m : int
        Domain and range dimensions.
    eta : float
        Tangential cone constant, supplied by configuration.
    c_F : float
        Upper bound on the derivative norm, supplied by configuration.
    """

    n: int
    m: int
    eta: float
    c_F: float

    @abc.abstractmethod
    def apply(self, c: Vec) -> Vec:
        """Evaluate F(c)."""

    @abc.abstractmethod
    def derivative_apply(self, c: Vec, q: Vec) -> Vec:
        """Evaluate F'(c) q."""

    @abc.abstractmethod
    def adjoint_apply(self, c: Vec, w: Vec) -> Vec:
        """Evaluate F'(c)* w."""


@dataclass(frozen=True)
class NoisyData:
    """Measured data with its nominal and effective noise levels.

    delta is the nominal level of the noise model y + delta * n with n a
    seeded standard normal draw; delta_eff is the actually realized
    perturbation norm ||y_delta - y||, which the discrepancy principle
    consumes in its default mode.
    """

    y_delta: Vec
    delta: float
    seed: int
    delta_eff: float

    def delta_used(self, mode: str = "effective") -> float:
        if mode == "effective":
            return self.delta_eff
        if mode == "nominal":
            return self.delta
        raise ValueError(f"unknown delta mode {mode!r}")


def add_noise(y: Vec, delta: float, seed: int) -> NoisyData:
    """Perturb exact data y by delta times a seeded standard normal draw."""
    if delta < 0:
        raise ValueError(f"noise level must be >= 0, got {delta}")
    y = np.asarray(y, dtype=float)
    if delta == 0.0:
        return NoisyData(y_delta=y.copy(), delta=0.0, seed=seed, delta_eff=0.0)
    noise = delta * gaussian_vector(y.shape[0], seed)
    return NoisyData(y_delta=y + noise, delta=delta, seed=seed, delta_eff=norm(noise))


def residual(op: ForwardOperator, c: Vec, data: NoisyData) -> tuple[Vec, float]:
    """Residual F(c) - y_delta and its norm."""
    r = op.apply(c) - data.y_delta
    return r, norm(r)


class DiagonalOperator(ForwardOperator):
    """Linear operator c -> d * c (componentwise).

    Being linear it satisfies the tangential cone condition with eta = 0,
    which makes every stripe-containment and descent statement exact; the
    tests lean on this.
    """

    def __init__(self, d: Vec):
        d = np.asarray(d, dtype=float)
        if np.any(d == 0.0):
            raise InvalidOperatorError("diagonal entries must be nonzero")
        self.d = d
        self.n = self.m = d.shape[0]
        self.eta = 0.0
        self.c_F = float(np.abs(d).max())

    def apply(self, c: Vec) -> Vec:
        return self.d * np.asarray(c, dtype=float)

    def derivative_apply(self, c: Vec, q: Vec) -> Vec:
        return self.d * np.asarray(q, dtype=float)

    def adjoint_apply(self, c: Vec, w: Vec) -> Vec:
        return self.d * np.asarray(w, dtype=float)


def diagonal_operator(d: Vec) -> DiagonalOperator:
    return DiagonalOperator(d)
