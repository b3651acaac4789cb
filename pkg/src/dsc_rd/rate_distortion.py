"""Closed-form rate-distortion evaluation for one hop.

A node encodes its statistic ``T`` for a decoder holding side information
``y_k``. With ``L = Σ_{x|T,y_k}`` and ``U = Σ_{x|y_k}``, a target ``D`` in
``L ≺ D ⪯ U`` costs

    R(D) = ½ log( |U − L| / |D − L| ).

Targets at ``D = U`` cost nothing; everything else is rejected.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionError,
    InfeasibleDistortionError,
    ModelError,
    NumericalMismatchError,
    SingularMatrixError,
)
from .gauss_core import (
    LOEWNER_TOL,
    RCOND_MIN,
    JointGaussian,
    Ordering,
    as_covariance,
    assemble_joint,
    condition,
    logdet_spd,
    loewner_cmp,
    max_abs,
    rcond_general,
    regress,
    spd_inv,
    symmetrize,
    to_bits,
)
from .suff_stat import LinearObservation

DET_FLOOR = 1e-300
MIXING_RCOND_MIN = 1e-10
MATCH_TOL = 1e-8


@dataclass(frozen=True)
class RdContext:
    source_cov: np.ndarray
    statistic: LinearObservation
    side: LinearObservation | None
    joint: JointGaussian = field(repr=False)
    sigma_x_side: np.ndarray        # Σ_{x|y_k}
    sigma_x_stat_side: np.ndarray   # Σ_{x|T,y_k}
    sigma_stat_side: np.ndarray     # Σ_{T|y_k}

    @property
    def given_side(self) -> tuple[str, ...]:
        return ("side",) if self.side is not None else ()

    @property
    def gap(self) -> np.ndarray:
        """``Σ_{x|y_k} − Σ_{x|T,y_k}``: the most a message can remove."""
        return symmetrize(self.sigma_x_side - self.sigma_x_stat_side)

    @property
    def dim(self) -> int:
        return self.source_cov.shape[0]


def build_context(source_cov, statistic: LinearObservation,
                  side: LinearObservation | None = None) -> RdContext:
    obs = [statistic.relabel("T")]
    if side is not None:
        obs.append(side.relabel("side"))
    joint = assemble_joint(source_cov, obs)
    given = ("side",) if side is not None else ()
    return RdContext(
        source_cov=joint.sub("x"),
        statistic=statistic,
        side=side,
        joint=joint,
        sigma_x_side=condition(joint, "x", given),
        sigma_x_stat_side=condition(joint, "x", ("T",) + given),
        sigma_stat_side=condition(joint, "T", given),
    )


class Validity(enum.Enum):
    STRICT = "strict"
    ZERO_RATE_BOUNDARY = "zero_rate_boundary"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class DistortionTarget:
    D: np.ndarray
    validity: Validity
    lower: Ordering   # Σ_{x|T,y_k} against D
    upper: Ordering   # D against Σ_{x|y_k}

    def describe(self) -> str:
        if self.validity is Validity.STRICT:
            return "Σ_{x|T,y_k} ≺ D ≺ Σ_{x|y_k}"
        if self.validity is Validity.ZERO_RATE_BOUNDARY:
            return "D = Σ_{x|y_k}"
        problems = []
        if self.lower is not Ordering.LESS:
            problems.append(f"lower bound Σ_{{x|T,y_k}} ≺ D violated ({self.lower.value})")
        if self.upper is not Ordering.LESS:
            problems.append(f"upper bound D ≺ Σ_{{x|y_k}} violated ({self.upper.value})")
        return "; ".join(problems)


def classify(ctx: RdContext, D, tol: float = LOEWNER_TOL) -> DistortionTarget:
    d = as_covariance(D, "D")
    if d.shape != ctx.source_cov.shape:
        raise DimensionError(f"D has shape {d.shape}, expected {ctx.source_cov.shape}")
    upper = loewner_cmp(d, ctx.sigma_x_side, tol)
    lower = loewner_cmp(ctx.sigma_x_stat_side, d, tol)
    if upper is Ordering.EQUAL:
        validity = Validity.ZERO_RATE_BOUNDARY
    elif upper is Ordering.LESS and lower is Ordering.LESS:
        validity = Validity.STRICT
    else:
        validity = Validity.INFEASIBLE
    return DistortionTarget(d, validity, lower, upper)


def _rate_nats(ctx: RdContext, target: DistortionTarget) -> float:
    if target.validity is Validity.INFEASIBLE:
        raise InfeasibleDistortionError(
            f"infeasible distortion target: {target.describe()}", validity=target)
    if target.validity is Validity.ZERO_RATE_BOUNDARY:
        return 0.0
    residual = symmetrize(target.D - ctx.sigma_x_stat_side)
    log_den = logdet_spd(residual, "D − Σ_{x|T,y_k}")
    if log_den < math.log(DET_FLOOR):
        raise InfeasibleDistortionError(
            "|D − Σ_{x|T,y_k}| is below the determinant floor; D sits on the lower bound",
            validity=target)
    return 0.5 * (logdet_spd(ctx.gap, "Σ_{x|y_k} − Σ_{x|T,y_k}") - log_den)


def rd_rate(ctx: RdContext, D, tol: float = LOEWNER_TOL) -> float:
    """Rate in bits per source vector for distortion target ``D``."""
    return to_bits(_rate_nats(ctx, classify(ctx, D, tol)))


def distortion_family(ctx: RdContext, alpha: float) -> np.ndarray:
    """``D(α) = (1 − α) Σ_{x|T,y_k} + α Σ_{x|y_k}`` for ``0 < α ≤ 1``."""
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ModelError(f"alpha must lie in (0, 1], got {alpha!r}")
    return symmetrize((1.0 - alpha) * ctx.sigma_x_stat_side + alpha * ctx.sigma_x_side)


def baseline_rate_no_side(ctx: RdContext, D, tol: float = LOEWNER_TOL) -> float:
    """Rate when the decoder ignores its side information (comparison point only)."""
    if ctx.side is not None:
        ctx = build_context(ctx.source_cov, ctx.statistic, None)
    return rd_rate(ctx, D, tol)


# --------------------------------------------------------------------------
# regression matrix C of x on (T, y_k), two ways
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AppendixFactors:
    h_inv: np.ndarray          # (AΣ_xAᵀ + Σ_n1)⁻¹ − (AΣ_xAᵀ)⁻¹
    delta: np.ndarray          # Σ_z − Σ_yzᵀ Σ_y⁻¹ Σ_yz
    delta_from_h: np.ndarray   # Σ_yzᵀ (−H⁻¹) Σ_yz + Σ_n2
    p_inv: np.ndarray          # (Σ_yzᵀH⁻¹Σ_yz)⁻¹ − (Σ_yzᵀH⁻¹Σ_yz − Σ_n2)⁻¹
    c_sigma_y: np.ndarray      # Σ_x Aᵀ H⁻¹ Σ_yz P⁻¹ Σ_yzᵀ


@dataclass(frozen=True)
class CMatrix:
    C: np.ndarray
    C_chain: np.ndarray
    factors: AppendixFactors
    det: float
    rcond: float
    route_gap: float   # max-norm gap between routes, relative to max|C|


def _inv(m, name: str) -> np.ndarray:
    rc = rcond_general(m)
    if rc <= RCOND_MIN:
        raise SingularMatrixError(f"factor {name} is singular", rcond=rc)
    return np.linalg.inv(m)


def appendix_c_matrix(source_cov, obs_T: LinearObservation, obs_side: LinearObservation,
                      match_tol: float = MATCH_TOL) -> CMatrix:
    """Regression matrix ``C`` in ``x = C T + G y_k + error``, computed twice.

    Route (a) solves the normal equations of the joint law. Route (b) builds
    ``C Σ_T`` from ``H⁻¹``, ``Δ`` and ``P⁻¹``, an explicit product of
    invertible factors whenever both mixings are invertible. The routes must
    agree within ``match_tol`` relative to ``max|C|``.
    """
    sx = as_covariance(source_cov, "source covariance")
    n = sx.shape[0]
    for o, name in ((obs_T, "statistic"), (obs_side, "side information")):
        if o.mixing.shape != (n, n):
            raise DimensionError(f"{name}: mixing must be {n}x{n}, got {o.mixing.shape}")
        rc = rcond_general(o.mixing)
        if rc <= MIXING_RCOND_MIN:
            raise SingularMatrixError(f"{name}: mixing matrix is not invertible", rcond=rc)

    joint = assemble_joint(sx, [obs_T.relabel("T"), obs_side.relabel("side")])
    c_reg = regress(joint, "x", ("T", "side"))["T"]

    a, n1 = obs_T.mixing, obs_T.noise_cov
    b, n2 = obs_side.mixing, obs_side.noise_cov
    k = a @ sx @ a.T
    sigma_y = k + n1
    sigma_z = b @ sx @ b.T + n2
    sigma_yz = a @ sx @ b.T
    sigma_y_inv = spd_inv(sigma_y, "Σ_y")
    h_inv = sigma_y_inv - _inv(k, "AΣ_xAᵀ")
    delta = symmetrize(sigma_z - sigma_yz.T @ sigma_y_inv @ sigma_yz)
    delta_from_h = symmetrize(sigma_yz.T @ (-h_inv) @ sigma_yz + n2)
    s = sigma_yz.T @ h_inv @ sigma_yz
    p_inv = _inv(s, "Σ_yzᵀH⁻¹Σ_yz") - _inv(s - n2, "Σ_yzᵀH⁻¹Σ_yz − Σ_n2")
    _inv(h_inv, "H⁻¹")
    _inv(p_inv, "P⁻¹")
    c_sigma_y = sx @ a.T @ h_inv @ sigma_yz @ p_inv @ sigma_yz.T
    c_chain = c_sigma_y @ sigma_y_inv

    scale = max(max_abs(c_reg), 1e-300)
    gap = max_abs(c_reg - c_chain) / scale
    if not gap <= match_tol:
        raise NumericalMismatchError(
            f"regression and factor-chain routes for C disagree: relative gap {gap:.3e} "
            f"> {match_tol:.1e}")
    factors = AppendixFactors(h_inv, delta, delta_from_h, p_inv, c_sigma_y)
    return CMatrix(c_reg, c_chain, factors, float(np.linalg.det(c_reg)),
                   rcond_general(c_reg), gap)
