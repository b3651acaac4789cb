"""Gaussian test channel that attains the one-hop rate-distortion function.

The encoder sends ``u = U C T + ν`` where ``C`` regresses ``x`` on ``T``
(alongside ``y_k``), the rows of ``U`` are eigenvectors of
``P = Σ_{x|y_k} − Σ_{x|T,y_k}``, and

    Σ_ν = U P (Σ_{x|y_k} − D)⁻¹ (D − Σ_{x|T,y_k}) Uᵀ.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleDistortionError, ModelError, NumericalMismatchError
from .gauss_core import (
    LOEWNER_TOL,
    JointGaussian,
    condition,
    logdet_spd,
    max_abs,
    regress,
    symmetrize,
    to_bits,
)
from .rate_distortion import (
    MATCH_TOL,
    RdContext,
    Validity,
    appendix_c_matrix,
    classify,
)

STRICT_MARGIN = 1e-10


@dataclass(frozen=True)
class SchemeSpec:
    U: np.ndarray
    C: np.ndarray
    nu_cov: np.ndarray
    eigenvalues: np.ndarray
    D: np.ndarray
    nu_asymmetry: float   # of the unsymmetrized product, relative to its max entry
    ctx: RdContext = field(repr=False)

    @property
    def encoder(self) -> np.ndarray:
        """Linear map applied to ``T`` before the coding noise is added."""
        return self.U @ self.C

    def joint(self) -> JointGaussian:
        """Joint law of ``(x, T[, side], u)``."""
        return self.ctx.joint.with_linear("u", {"T": self.encoder}, self.nu_cov)


def canonical_eigh(m) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenpairs; each eigenvector's largest-magnitude entry made positive."""
    w, v = np.linalg.eigh(symmetrize(m))
    pivot = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[pivot, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return w, v * signs


def design_scheme(ctx: RdContext, D, *, basis=None, tol: float = LOEWNER_TOL,
                  match_tol: float = MATCH_TOL) -> SchemeSpec:
    """Test channel for a strictly interior target ``D``.

    ``basis`` overrides the eigenvector matrix ``U`` (rows are eigenvectors
    of ``P``); any orthogonal diagonalizer gives the same rate and distortion.
    """
    target = classify(ctx, D, tol)
    if target.validity is not Validity.STRICT:
        reason = ("rate is zero at the boundary"
                  if target.validity is Validity.ZERO_RATE_BOUNDARY else target.describe())
        raise InfeasibleDistortionError(f"no test channel for this target: {reason}",
                                        validity=target)
    d = target.D
    p = ctx.gap
    q = symmetrize(ctx.sigma_x_side - d)
    r = symmetrize(d - ctx.sigma_x_stat_side)
    scale = np.linalg.norm(ctx.sigma_x_side, 2)
    for name, m in (("Σ_{x|y_k} − D", q), ("D − Σ_{x|T,y_k}", r)):
        low = np.linalg.eigvalsh(m)[0]
        if low <= STRICT_MARGIN * scale:
            raise InfeasibleDistortionError(
                f"{name} has smallest eigenvalue {low:.3e}, inside the strictness margin",
                validity=target)

    w, v = canonical_eigh(p)
    u = v.T
    if basis is not None:
        u = np.array(basis, dtype=float)
        if max_abs(u.T @ u - np.eye(u.shape[0])) > 1e-10:
            raise ModelError("basis is not orthogonal")
        lam = u @ p @ u.T
        if max_abs(lam - np.diag(np.diag(lam))) > 1e-10 * max(max_abs(p), 1e-300):
            raise ModelError("basis does not diagonalize Σ_{x|y_k} − Σ_{x|T,y_k}")
        w = np.diag(lam).copy()

    if ctx.side is not None:
        c = appendix_c_matrix(ctx.source_cov, ctx.statistic, ctx.side, match_tol).C
    else:
        c = regress(ctx.joint, "x", ("T",))["T"]

    raw = u @ p @ np.linalg.solve(q, r) @ u.T
    asym = max_abs(raw - raw.T) / max(max_abs(raw), 1e-300)
    if asym > match_tol:
        raise NumericalMismatchError(f"coding-noise covariance asymmetry {asym:.3e}")
    nu = symmetrize(raw)
    if np.linalg.eigvalsh(nu)[0] <= 0.0:
        raise NumericalMismatchError("coding-noise covariance is not positive definite")
    for a in (u, c, w):
        a.flags.writeable = False
    return SchemeSpec(U=u, C=c, nu_cov=nu, eigenvalues=w, D=d, nu_asymmetry=float(asym), ctx=ctx)


def achieved_rate(spec: SchemeSpec) -> float:
    """``I(T; u | y_k)`` in bits."""
    w = spec.encoder
    s_u = symmetrize(w @ spec.ctx.sigma_stat_side @ w.T + spec.nu_cov)
    nats = 0.5 * (logdet_spd(s_u, "Σ_{u|y_k}") - logdet_spd(spec.nu_cov, "Σ_ν"))
    return to_bits(nats)


def achieved_distortion(spec: SchemeSpec) -> np.ndarray:
    """Error covariance of the MMSE reconstruction of ``x`` from ``(u, y_k)``."""
    return condition(spec.joint(), "x", ("u",) + spec.ctx.given_side)
