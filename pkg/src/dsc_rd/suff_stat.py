"""Sufficient statistics of linear-Gaussian observations.

An observation ``y = A x + n`` is carried as a :class:`LinearObservation`
(mixing ``A``, noise covariance ``Σ_n``). Fusing independent observations in
precision form gives ``T = Σ_j A_jᵀ Σ_j⁻¹ y_j``, whose effective mixing and
effective noise covariance are both ``Σ_j A_jᵀ Σ_j⁻¹ A_j``.

Decoded estimates from child nodes enter through the backward channel
``x̂ = H x + η`` with ``H = (Σ_x − D) Σ_x⁻¹`` and ``Σ_η = (Σ_x − D) Σ_x⁻¹ D``,
so that ``cov(x − x̂) = D``. Estimation errors of different children are
modelled as mutually independent and independent of the node's own noise.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InfeasibleDistortionError, ModelError
from .gauss_core import (
    LOEWNER_TOL,
    Ordering,
    as_covariance,
    as_matrix,
    assemble_joint,
    condition,
    is_full_rank,
    loewner_cmp,
    max_abs,
    spd_solve,
    symmetrize,
)

# asymmetry allowed on matrices that are symmetric only up to rounding of a product
_PRODUCT_SYM_TOL = 1e-9


@dataclass(frozen=True)
class LinearObservation:
    """Linear-Gaussian view ``y = mixing @ x + n`` with ``n ~ N(0, noise_cov)``."""

    mixing: np.ndarray
    noise_cov: np.ndarray
    label: str = "y"

    def __post_init__(self):
        a = as_matrix(self.mixing, f"{self.label}.mixing")
        s = as_covariance(self.noise_cov, f"{self.label}.noise_cov", sym_tol=_PRODUCT_SYM_TOL)
        if s.shape[0] != a.shape[0]:
            raise DimensionError(
                f"{self.label}: noise covariance is {s.shape[0]}-dim but mixing has "
                f"{a.shape[0]} rows")
        if not is_full_rank(s):
            raise ModelError(f"{self.label}: noise covariance is not full rank")
        object.__setattr__(self, "mixing", a)
        object.__setattr__(self, "noise_cov", s)

    @property
    def obs_dim(self) -> int:
        return self.mixing.shape[0]

    @property
    def source_dim(self) -> int:
        return self.mixing.shape[1]

    def relabel(self, label: str) -> "LinearObservation":
        return dataclasses.replace(self, label=label)


@dataclass(frozen=True)
class BackwardChannel:
    """Decoded estimate ``x̂ = H x + η`` of a source with distortion ``D``."""

    H: np.ndarray
    eta_cov: np.ndarray
    D: np.ndarray
    source_cov: np.ndarray

    @property
    def informative(self) -> bool:
        return bool(np.any(self.H != 0.0))

    def precision(self) -> np.ndarray:
        """Information the estimate adds about ``x``: ``D⁻¹ − Σ_x⁻¹``."""
        n = self.D.shape[0]
        return symmetrize(spd_solve(self.D, np.eye(n), "D")
                          - spd_solve(self.source_cov, np.eye(n), "Σ_x"))

    def error_cov(self) -> np.ndarray:
        """``cov(x − x̂)`` recomputed from ``H`` and ``Σ_η``; equals ``D``."""
        g = np.eye(self.H.shape[0]) - self.H
        return symmetrize(g @ self.source_cov @ g.T + self.eta_cov)

    def as_observation(self, label: str = "xhat") -> LinearObservation:
        if not is_full_rank(self.eta_cov):
            raise ModelError(f"{label}: estimate with D = Σ_x carries no information")
        return LinearObservation(self.H, self.eta_cov, label)


def backward_channel(source_cov, D, tol: float = LOEWNER_TOL) -> BackwardChannel:
    sx = as_covariance(source_cov, "source covariance")
    d = as_covariance(D, "D")
    if d.shape != sx.shape:
        raise DimensionError(f"D has shape {d.shape}, source covariance {sx.shape}")
    if not is_full_rank(d):
        raise ModelError("D is singular")
    order = loewner_cmp(d, sx, tol)
    if order not in (Ordering.LESS, Ordering.LESS_OR_EQUAL, Ordering.EQUAL):
        raise InfeasibleDistortionError(
            f"estimate distortion D is not dominated by Σ_x (Loewner order: {order.value})",
            validity=order)
    gap = sx - d
    if order is Ordering.EQUAL:
        gap = np.zeros_like(sx)
    # Σ_x⁻¹ is symmetric, so (Σ_x − D) Σ_x⁻¹ = (Σ_x⁻¹ (Σ_x − D))ᵀ
    h = spd_solve(sx, gap, "source covariance").T
    eta = as_covariance(h @ d, "Σ_η", sym_tol=_PRODUCT_SYM_TOL)
    h.flags.writeable = False
    return BackwardChannel(h, eta, d, sx)


def fusion_weights(observations: Sequence[LinearObservation]) -> list[np.ndarray]:
    """Per-observation weights ``A_jᵀ Σ_j⁻¹`` of the fused statistic."""
    return [spd_solve(o.noise_cov, o.mixing, f"{o.label}.noise_cov").T for o in observations]


def _combine(weights, mixings, noises, label) -> LinearObservation:
    mix = sum(w @ a for w, a in zip(weights, mixings))
    noise = symmetrize(sum(w @ s @ w.T for w, s in zip(weights, noises)))
    if not is_full_rank(noise):
        raise ModelError(f"{label}: fused statistic is rank-deficient; the observations do "
                         "not jointly identify every direction of x")
    return LinearObservation(symmetrize(mix), noise, label)


def fuse(observations: Sequence[LinearObservation], label: str | None = None) -> LinearObservation:
    """Fuse mutually independent observations into ``T = Σ A_jᵀ Σ_j⁻¹ y_j``."""
    obs = list(observations)
    if not obs:
        raise ModelError("fuse needs at least one observation")
    n = obs[0].source_dim
    for o in obs:
        if o.source_dim != n:
            raise DimensionError(
                f"observation {o.label!r} has source dim {o.source_dim}, expected {n}")
    if label is None:
        label = "+".join(o.label for o in obs)
    return _combine(fusion_weights(obs), [o.mixing for o in obs],
                    [o.noise_cov for o in obs], label)


def statistic_weights(own: LinearObservation,
                      children: Sequence[BackwardChannel]) -> list[np.ndarray]:
    """Weights of ``T_j`` on ``(y_j, x̂_1, x̂_2, ...)``: ``A_jᵀΣ_j⁻¹`` then ``D_i⁻¹``."""
    n = own.source_dim
    return fusion_weights([own]) + [spd_solve(c.D, np.eye(n), "D") for c in children]


def node_statistic(own: LinearObservation, children: Sequence[BackwardChannel],
                   source_cov, label: str = "T") -> LinearObservation:
    """Statistic ``T_j = A_jᵀΣ_j⁻¹ y_j + Σ_i D_i⁻¹ x̂_i`` as an effective observation."""
    sx = as_covariance(source_cov, "source covariance")
    n = sx.shape[0]
    if own.mixing.shape != (n, n):
        raise DimensionError(f"{own.label}: node mixing must be {n}x{n}, got {own.mixing.shape}")
    for i, c in enumerate(children):
        if c.D.shape != sx.shape:
            raise DimensionError(f"child {i}: distortion shape {c.D.shape}")
        if max_abs(c.source_cov - sx) > 0.0:
            raise ModelError(f"child {i}: backward channel built for a different source covariance")
    weights = statistic_weights(own, children)
    mixings = [own.mixing] + [c.H for c in children]
    noises = [own.noise_cov] + [c.eta_cov for c in children]
    return _combine(weights, mixings, noises, label)


def verify_sufficiency(source_cov, raw_observations: Sequence[LinearObservation],
                       statistic: LinearObservation, weights: Sequence[np.ndarray],
                       side: LinearObservation | None = None) -> float:
    """Max-norm gap between ``Σ_{x|raw, side}`` and ``Σ_{x|T, side}``.

    ``statistic`` must equal ``Σ_j weights[j] @ raw_observations[j]``; a
    (conditional) sufficient statistic gives a gap at rounding level.
    """
    raw = [o.relabel(f"raw{i}") for i, o in enumerate(raw_observations)]
    if len(weights) != len(raw):
        raise DimensionError(f"{len(weights)} weights for {len(raw)} observations")
    weights = [np.asarray(w, dtype=float) for w in weights]
    for w, o in zip(weights, raw):
        if w.ndim != 2 or w.shape[1] != o.obs_dim or w.shape[0] != statistic.obs_dim:
            raise DimensionError(
                f"weight of shape {w.shape} cannot map {o.obs_dim}-dim observation to "
                f"{statistic.obs_dim}-dim statistic")
    implied = sum(w @ o.mixing for w, o in zip(weights, raw))
    scale = max(max_abs(implied), max_abs(statistic.mixing), 1e-300)
    if max_abs(implied - statistic.mixing) > 1e-9 * scale:
        raise ModelError("statistic is not the stated linear function of the raw observations")

    obs = list(raw)
    given_side: tuple[str, ...] = ()
    if side is not None:
        obs.append(side.relabel("side"))
        given_side = ("side",)
    joint = assemble_joint(source_cov, obs)
    full = condition(joint, "x", tuple(o.label for o in raw) + given_side)
    joint_t = joint.with_linear("stat", {o.label: w for o, w in zip(raw, weights)})
    reduced = condition(joint_t, "x", ("stat",) + given_side)
    return max_abs(full - reduced)
