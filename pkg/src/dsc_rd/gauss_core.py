"""Joint-Gaussian covariance algebra.

All random vectors are zero-mean. Covariances are plain ``numpy`` arrays that
have been validated and symmetrized by :func:`as_covariance` and marked
read-only; block bookkeeping for jointly Gaussian collections lives in
:class:`JointGaussian`.

Internal quantities are in nats. Use :func:`to_bits` at reporting boundaries.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .errors import DimensionError, ModelError, NotPSDError, SingularMatrixError

SYM_TOL = 1e-12
PSD_TOL = 1e-10
RCOND_MIN = 1e-12
LOEWNER_TOL = 1e-10

NATS_PER_BIT = math.log(2.0)


def to_bits(nats: float) -> float:
    return nats / NATS_PER_BIT


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def max_abs(m) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    a = np.array(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise DimensionError(f"{name}: expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ModelError(f"{name}: contains non-finite entries")
    return _frozen(a)


def as_covariance(m, name: str = "covariance", *, sym_tol: float = SYM_TOL,
                  psd_tol: float = PSD_TOL) -> np.ndarray:
    """Validate a covariance matrix and return an exactly symmetric, read-only copy.

    Asymmetry is measured relative to the largest absolute entry; the
    smallest eigenvalue must be ``>= -psd_tol * ||m||_2``.
    """
    a = np.array(as_matrix(m, name))
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name}: covariance must be square, got {a.shape}")
    scale = max_abs(a)
    asym = max_abs(a - a.T)
    if asym > sym_tol * scale:
        raise NotPSDError(
            f"{name}: not symmetric (max asymmetry {asym:.3e}, "
            f"allowed {sym_tol * scale:.3e})")
    a = 0.5 * (a + a.T)
    if scale > 0.0:
        eig = np.linalg.eigvalsh(a)
        norm = float(np.max(np.abs(eig)))
        if eig[0] < -psd_tol * norm:
            raise NotPSDError(
                f"{name}: not positive semidefinite (smallest eigenvalue {eig[0]:.6g})",
                min_eigenvalue=float(eig[0]))
    return _frozen(a)


def is_full_rank(cov, psd_tol: float = PSD_TOL) -> bool:
    eig = np.linalg.eigvalsh(cov)
    norm = float(np.max(np.abs(eig))) if eig.size else 0.0
    return bool(norm > 0.0 and eig[0] > psd_tol * norm)


def rcond_spd(m) -> float:
    """Reciprocal 2-norm condition number of a symmetric matrix (0 if indefinite)."""
    eig = np.linalg.eigvalsh(m)
    if eig.size == 0 or eig[-1] <= 0.0 or eig[0] <= 0.0:
        return 0.0
    return float(eig[0] / eig[-1])


def rcond_general(m) -> float:
    s = np.linalg.svd(np.asarray(m, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0.0
    return float(s[-1] / s[0])


def _cho(m, name: str):
    rc = rcond_spd(m)
    if rc <= RCOND_MIN:
        raise SingularMatrixError(f"{name}: singular or indefinite", rcond=rc)
    try:
        return sla.cho_factor(m, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"{name}: Cholesky failed", rcond=rc) from exc


def spd_solve(m, rhs, name: str = "matrix") -> np.ndarray:
    """Solve ``m @ X = rhs`` for SPD ``m`` via Cholesky, after an rcond check."""
    return sla.cho_solve(_cho(m, name), rhs, check_finite=False)


def spd_inv(m, name: str = "matrix") -> np.ndarray:
    inv = spd_solve(m, np.eye(np.shape(m)[0]), name)
    return 0.5 * (inv + inv.T)


def logdet_spd(m, name: str = "matrix") -> float:
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"{name}: not positive definite",
                                  rcond=rcond_spd(m)) from exc
    d = np.diag(chol)
    if np.any(d <= 0.0):
        raise SingularMatrixError(f"{name}: not positive definite", rcond=0.0)
    return 2.0 * float(np.sum(np.log(d)))


def symmetrize(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return _frozen(0.5 * (m + m.T))


# --------------------------------------------------------------------------
# joint Gaussian bookkeeping
# --------------------------------------------------------------------------

BlockSel = str | Sequence[str]


def _names(sel: BlockSel | None) -> tuple[str, ...]:
    if sel is None:
        return ()
    if isinstance(sel, str):
        return (sel,)
    return tuple(sel)


@dataclass(frozen=True)
class JointGaussian:
    """Zero-mean jointly Gaussian collection of named vector blocks."""

    blocks: tuple[tuple[str, int], ...]
    cov: np.ndarray

    def __post_init__(self):
        names = [b for b, _ in self.blocks]
        if len(set(names)) != len(names):
            raise ModelError(f"duplicate block labels: {names}")
        total = sum(d for _, d in self.blocks)
        if self.cov.shape != (total, total):
            raise DimensionError(
                f"joint covariance shape {self.cov.shape} does not match block dims {total}")
        offsets, start = {}, 0
        for name, dim in self.blocks:
            if dim <= 0:
                raise DimensionError(f"block {name!r} has non-positive dimension {dim}")
            offsets[name] = (start, start + dim)
            start += dim
        object.__setattr__(self, "_offsets", offsets)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(b for b, _ in self.blocks)

    def dim(self, sel: BlockSel) -> int:
        return int(self.index(sel).size)

    def index(self, sel: BlockSel) -> np.ndarray:
        idx = []
        for name in _names(sel):
            try:
                lo, hi = self._offsets[name]
            except KeyError:
                raise ModelError(f"unknown block {name!r}; have {list(self.names)}") from None
            idx.extend(range(lo, hi))
        return np.asarray(idx, dtype=int)

    def sub(self, sel: BlockSel) -> np.ndarray:
        i = self.index(sel)
        return self.cov[np.ix_(i, i)]

    def cross(self, a: BlockSel, b: BlockSel) -> np.ndarray:
        return self.cov[np.ix_(self.index(a), self.index(b))]

    def with_linear(self, name: str, terms: Mapping[str, np.ndarray],
                    noise_cov=None) -> "JointGaussian":
        """Append block ``name = sum(W_b @ b for b, W_b in terms) + e``.

        ``e`` is independent of every existing block with covariance
        ``noise_cov`` (zero when omitted).
        """
        if not terms:
            raise ModelError(f"block {name!r} needs at least one term")
        rows = {np.shape(w)[0] for w in terms.values()}
        if len(rows) != 1:
            raise DimensionError(f"block {name!r}: inconsistent term row counts {rows}")
        m = rows.pop()
        w_full = np.zeros((m, self.cov.shape[0]))
        for b, w in terms.items():
            i = self.index(b)
            w = np.asarray(w, dtype=float)
            if w.shape != (m, i.size):
                raise DimensionError(
                    f"block {name!r}: term for {b!r} has shape {w.shape}, expected {(m, i.size)}")
            w_full[:, i] += w
        xcov = w_full @ self.cov
        zz = xcov @ w_full.T
        if noise_cov is not None:
            noise_cov = np.asarray(noise_cov, dtype=float)
            if noise_cov.shape != (m, m):
                raise DimensionError(f"block {name!r}: noise covariance shape {noise_cov.shape}")
            zz = zz + noise_cov
        zz = 0.5 * (zz + zz.T)
        cov = np.block([[self.cov, xcov.T], [xcov, zz]])
        return JointGaussian(self.blocks + ((name, m),), _frozen(cov))


@dataclass(frozen=True)
class RegressionResult:
    coefficients: dict[str, np.ndarray]
    error_cov: np.ndarray

    def __getitem__(self, name: str) -> np.ndarray:
        return self.coefficients[name]


def assemble_joint(source_cov, observations: Iterable, noise_cross: Mapping | None = None,
                   source_label: str = "x") -> JointGaussian:
    """Joint law of ``(x, y_1, ..., y_m)`` for ``y_j = A_j x + n_j``.

    ``observations`` are objects with ``mixing``, ``noise_cov`` and ``label``.
    Noises are independent of ``x`` and, unless ``noise_cross`` supplies
    ``{(label_i, label_j): cov(n_i, n_j)}``, of each other.
    """
    sx = as_covariance(source_cov, "source covariance")
    n = sx.shape[0]
    obs = list(observations)
    blocks = [(source_label, n)]
    for o in obs:
        a = np.asarray(o.mixing)
        if a.ndim != 2 or a.shape[1] != n:
            raise DimensionError(
                f"observation {o.label!r}: mixing shape {a.shape} incompatible with source dim {n}")
        if np.shape(o.noise_cov) != (a.shape[0], a.shape[0]):
            raise DimensionError(
                f"observation {o.label!r}: noise covariance shape {np.shape(o.noise_cov)}")
        blocks.append((o.label, a.shape[0]))
    total = sum(d for _, d in blocks)
    cov = np.zeros((total, total))
    cov[:n, :n] = sx
    offs = np.cumsum([0] + [d for _, d in blocks])
    for i, oi in enumerate(obs, start=1):
        si = slice(offs[i], offs[i + 1])
        cov[:n, si] = sx @ oi.mixing.T
        cov[si, :n] = cov[:n, si].T
        for j, oj in enumerate(obs, start=1):
            sj = slice(offs[j], offs[j + 1])
            cov[si, sj] = oi.mixing @ sx @ oj.mixing.T
        cov[si, si] += oi.noise_cov
    for (li, lj), c in (noise_cross or {}).items():
        i = 1 + [o.label for o in obs].index(li)
        j = 1 + [o.label for o in obs].index(lj)
        si, sj = slice(offs[i], offs[i + 1]), slice(offs[j], offs[j + 1])
        c = np.asarray(c, dtype=float)
        if c.shape != (offs[i + 1] - offs[i], offs[j + 1] - offs[j]):
            raise DimensionError(f"noise cross-covariance ({li}, {lj}) has shape {c.shape}")
        cov[si, sj] += c
        cov[sj, si] += c.T
    try:
        cov = as_covariance(cov, "joint covariance")
    except NotPSDError as exc:
        raise NotPSDError(f"inconsistent model inputs: {exc}", exc.min_eigenvalue) from exc
    return JointGaussian(tuple(blocks), cov)


def condition(joint: JointGaussian, target: BlockSel, given: BlockSel | None = ()) -> np.ndarray:
    """Conditional covariance of ``target`` given ``given`` (Schur complement)."""
    t, g = _names(target), _names(given)
    if set(t) & set(g):
        raise ModelError(f"target {t} overlaps conditioning set {g}")
    s_tt = joint.sub(t)
    if not g:
        return s_tt
    k = joint.cross(t, g)
    sol = spd_solve(joint.sub(g), k.T, f"covariance of {'+'.join(g)}")
    return symmetrize(s_tt - k @ sol)


def regress(joint: JointGaussian, target: BlockSel, given: Sequence[str]) -> RegressionResult:
    """Linear MMSE regression of ``target`` on the ordered blocks ``given``.

    Returns one coefficient matrix per conditioning block and the error
    covariance, which equals :func:`condition` on the same sets.
    """
    g = _names(given)
    if not g:
        raise ModelError("regress needs at least one conditioning block")
    k = joint.cross(target, g)
    coef = spd_solve(joint.sub(g), k.T, f"covariance of {'+'.join(g)}").T
    err = symmetrize(joint.sub(target) - coef @ k.T)
    coefficients, start = {}, 0
    for name in g:
        d = joint.dim(name)
        coefficients[name] = _frozen(np.array(coef[:, start:start + d]))
        start += d
    return RegressionResult(coefficients, err)


class Ordering(enum.Enum):
    LESS = "less"
    LESS_OR_EQUAL = "less_or_equal"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"
    GREATER_OR_EQUAL = "greater_or_equal"
    GREATER = "greater"


def loewner_cmp(a, b, tol: float = LOEWNER_TOL) -> Ordering:
    """Classify ``a`` against ``b`` in the Loewner order.

    The eigenvalues of ``b - a`` are compared against the band
    ``±tol * max(||a||_2, ||b||_2)``; ``LESS`` means ``a ≺ b`` with every
    eigenvalue of ``b - a`` above the band.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"loewner_cmp: shapes {a.shape} and {b.shape} differ")
    scale = max(np.linalg.norm(a, 2), np.linalg.norm(b, 2))
    band = tol * scale
    diff = b - a
    eig = np.linalg.eigvalsh(0.5 * (diff + diff.T))
    pos = eig > band
    neg = eig < -band
    if not pos.any() and not neg.any():
        return Ordering.EQUAL
    if pos.all():
        return Ordering.LESS
    if neg.all():
        return Ordering.GREATER
    if not neg.any():
        return Ordering.LESS_OR_EQUAL
    if not pos.any():
        return Ordering.GREATER_OR_EQUAL
    return Ordering.INCOMPARABLE


def conditional_mi(joint: JointGaussian, a: BlockSel, b: BlockSel,
                   given: BlockSel | None = ()) -> float:
    """``I(a; b | given)`` in nats via the log-det ratio of conditional covariances."""
    g = _names(given)
    outer = condition(joint, a, g)
    inner = condition(joint, a, _names(b) + g)
    return 0.5 * (logdet_spd(outer, "Σ_{a|given}") - logdet_spd(inner, "Σ_{a|b,given}"))
