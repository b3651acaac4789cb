"""Monte Carlo oracle for the closed-form quantities.

Samples are drawn from the full generative model and every estimate is a
plain sample statistic, so nothing here reuses the Schur-complement code
paths it is checking.

Randomness comes from Philox streams keyed by ``(seed, variable, chunk)``:
each noise source has its own stream, and columns are produced in chunks of
``chunk_size`` whose streams depend only on the chunk index. Adding a
variable does not move any other variable's draws, and chunks can be
generated in any order or concurrently.
"""

from __future__ import annotations

import math
import zlib
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, ModelError, SingularMatrixError
from .gauss_core import RCOND_MIN, as_covariance, is_full_rank, max_abs, rcond_spd, spd_inv
from .suff_stat import BackwardChannel, LinearObservation, fusion_weights

CHUNK_SIZE = 1 << 16
JACKKNIFE_GROUPS = 10
RESERVED = ("x", "T", "side", "u")


@dataclass(frozen=True)
class SimInstance:
    """Generative model: source, node measurement(s), child estimates, side info, scheme.

    ``scheme`` is anything with ``encoder`` (the map applied to ``T``) and
    ``nu_cov``; normally a :class:`~dsc_rd.coding_scheme.SchemeSpec`.
    """

    source_cov: np.ndarray
    own: tuple[LinearObservation, ...] = ()
    children: tuple[BackwardChannel, ...] = ()
    side: LinearObservation | None = None
    scheme: object | None = field(default=None, repr=False)

    def __post_init__(self):
        sx = as_covariance(self.source_cov, "source covariance")
        if not is_full_rank(sx):
            raise ModelError("source covariance must be full rank")
        object.__setattr__(self, "source_cov", sx)
        object.__setattr__(self, "own", tuple(self.own))
        object.__setattr__(self, "children", tuple(self.children))
        labels = [o.label for o in self.own]
        if len(set(labels)) != len(labels) or set(labels) & set(RESERVED):
            raise ModelError(f"own observation labels must be unique and avoid {RESERVED}")
        if self.scheme is not None and not (self.own or self.children):
            raise ModelError("a scheme needs a statistic to encode")

    @property
    def has_statistic(self) -> bool:
        return bool(self.own or self.children)


@dataclass(frozen=True)
class SimConfig:
    seed: int
    sample_count: int
    instance: SimInstance
    chunk_size: int = CHUNK_SIZE

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ModelError("seed must be a 64-bit unsigned integer")
        if self.sample_count < 2:
            raise ModelError("sample_count must be at least 2")
        if self.chunk_size < 1:
            raise ModelError("chunk_size must be positive")


@dataclass(frozen=True)
class SampleBatch:
    """Per-variable sample matrices, one column per draw."""

    data: dict[str, np.ndarray]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.data)

    @property
    def sample_count(self) -> int:
        return next(iter(self.data.values())).shape[1]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[name]

    def stack(self, names: Sequence[str]) -> np.ndarray:
        if not names:
            return np.empty((0, self.sample_count))
        return np.vstack([self.data[n] for n in names])


def _stream(seed: int, name: str, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(zlib.crc32(name.encode()), chunk))
    return np.random.Generator(np.random.Philox(ss))


def _factor(cov: np.ndarray) -> np.ndarray:
    if max_abs(cov) == 0.0:
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        # PSD but singular (an estimate that is exact along some directions)
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0.0, None))


def _simulate_chunk(config: SimConfig, chunk: int, factors: dict, weights: list):
    inst = config.instance
    lo = chunk * config.chunk_size
    m = min(config.chunk_size, config.sample_count - lo)

    def draw(name: str, fac: np.ndarray) -> np.ndarray:
        z = _stream(config.seed, name, chunk).standard_normal((fac.shape[1], m))
        return fac @ z

    out = {"x": draw("x", factors["x"])}
    x = out["x"]
    sources = []
    for o in inst.own:
        y = o.mixing @ x + draw(f"n/{o.label}", factors[f"n/{o.label}"])
        out[o.label] = y
        sources.append(y)
    for i, c in enumerate(inst.children):
        xh = c.H @ x + draw(f"eta/{i}", factors[f"eta/{i}"])
        out[f"xhat{i}"] = xh
        sources.append(xh)
    if inst.has_statistic:
        out["T"] = sum(w @ s for w, s in zip(weights, sources))
    if inst.side is not None:
        out["side"] = inst.side.mixing @ x + draw("n/side", factors["n/side"])
    if inst.scheme is not None:
        out["u"] = inst.scheme.encoder @ out["T"] + draw("nu", factors["nu"])
    return out


def simulate(config: SimConfig, workers: int = 1) -> SampleBatch:
    """Draw ``config.sample_count`` i.i.d. columns of every model variable.

    Node measurements are ``y_j = A_j x + n_j``, child estimates
    ``x̂_i = H_i x + η_i``, the statistic is ``Σ A_jᵀΣ_j⁻¹ y_j + Σ D_i⁻¹ x̂_i``
    and, with a scheme attached, ``u = U C T + ν``.
    """
    inst = config.instance
    factors = {"x": _factor(inst.source_cov)}
    for o in inst.own:
        factors[f"n/{o.label}"] = _factor(o.noise_cov)
    for i, c in enumerate(inst.children):
        factors[f"eta/{i}"] = _factor(c.eta_cov)
    if inst.side is not None:
        factors["n/side"] = _factor(inst.side.noise_cov)
    if inst.scheme is not None:
        factors["nu"] = _factor(np.asarray(inst.scheme.nu_cov))

    # same weights as the closed-form statistic: A_jᵀΣ_j⁻¹ per measurement, D_i⁻¹ per child
    n = inst.source_cov.shape[0]
    weights = fusion_weights(inst.own) + [spd_inv(c.D, "D") for c in inst.children]
    if any(w.shape[0] != n for w in weights):
        raise DimensionError("statistic weights do not map into the source space")

    n_chunks = math.ceil(config.sample_count / config.chunk_size)
    run = lambda k: _simulate_chunk(config, k, factors, weights)  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(n_chunks)))
    else:
        parts = [run(k) for k in range(n_chunks)]
    data = {name: np.hstack([p[name] for p in parts]) for name in parts[0]}
    return SampleBatch(data)


# --------------------------------------------------------------------------
# estimators
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Estimate:
    value: np.ndarray | float
    se: np.ndarray | float

    def z_score(self, expected) -> float:
        """Largest ``|estimate − expected| / se`` over entries."""
        diff = np.abs(np.asarray(self.value) - np.asarray(expected))
        se = np.asarray(self.se, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(diff == 0.0, 0.0, diff / se)
        return float(np.max(z))


def _names(sel) -> tuple[str, ...]:
    if sel is None:
        return ()
    return (sel,) if isinstance(sel, str) else tuple(sel)


class _GramJackknife:
    """Uncentred Gram matrices of the stacked variables, total and per partition."""

    def __init__(self, batch: SampleBatch, names: Sequence[str], groups: int):
        z = batch.stack(names)
        self.n = z.shape[1]
        self.offsets = {}
        start = 0
        for nm in names:
            d = batch[nm].shape[0]
            self.offsets[nm] = np.arange(start, start + d)
            start += d
        bounds = np.linspace(0, self.n, groups + 1).astype(int)
        self.parts = [(z[:, a:b] @ z[:, a:b].T, b - a) for a, b in zip(bounds[:-1], bounds[1:])]
        self.total = sum(g for g, _ in self.parts)

    def idx(self, names) -> np.ndarray:
        if not names:
            return np.empty(0, dtype=int)
        return np.concatenate([self.offsets[n] for n in names])

    @staticmethod
    def cond_cov(gram, n, t, g):
        g_tt = gram[np.ix_(t, t)]
        if g.size == 0:
            return g_tt / n
        g_gg = gram[np.ix_(g, g)]
        rc = rcond_spd(g_gg)
        if rc <= RCOND_MIN:
            raise SingularMatrixError("conditioning samples are rank deficient", rcond=rc)
        g_tg = gram[np.ix_(t, g)]
        res = g_tt - g_tg @ np.linalg.solve(g_gg, g_tg.T)
        res = 0.5 * (res + res.T)
        return res / (n - g.size)

    def jackknife(self, fn):
        full = np.asarray(fn(self.total, self.n))
        loo = np.array([fn(self.total - g, self.n - m) for g, m in self.parts])
        k = len(self.parts)
        se = np.sqrt((k - 1) / k * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
        return full, se


def _check_size(batch: SampleBatch, given_dim: int):
    if batch.sample_count <= 10 * given_dim:
        raise ModelError(
            f"{batch.sample_count} samples is too few to condition on {given_dim} dimensions")


def empirical_conditional_cov(batch: SampleBatch, target, given=(), *, with_se: bool = False,
                              se_method: str = "wishart", groups: int = JACKKNIFE_GROUPS):
    """Residual covariance of ``target`` after least-squares regression on ``given``.

    Means are known to be zero, so no intercept is fitted; the residual
    divisor is ``n − dim(given)``. With ``with_se`` an :class:`Estimate`
    carrying entrywise standard errors is returned: ``"wishart"`` uses the
    Gaussian plug-in ``sqrt((s_ii s_jj + s_ij²) / (n − p))``, ``"jackknife"``
    the delete-one-partition jackknife over ``groups`` partitions.
    """
    t, g = _names(target), _names(given)
    names = list(dict.fromkeys(t + g))
    gj = _GramJackknife(batch, names, groups)
    ti, gi = gj.idx(t), gj.idx(g)
    _check_size(batch, gi.size)
    if not with_se:
        return gj.cond_cov(gj.total, gj.n, ti, gi)
    if se_method == "jackknife":
        value, se = gj.jackknife(lambda gram, n: gj.cond_cov(gram, n, ti, gi))
    elif se_method == "wishart":
        value = gj.cond_cov(gj.total, gj.n, ti, gi)
        d = np.diag(value)
        se = np.sqrt((np.outer(d, d) + value**2) / (gj.n - gi.size))
    else:
        raise ValueError(f"unknown se_method {se_method!r}")
    return Estimate(value, se)


def empirical_rate(batch: SampleBatch, a, b, given=(), *,
                   groups: int = JACKKNIFE_GROUPS) -> Estimate:
    """Plug-in Gaussian ``I(a; b | given)`` in bits with a jackknife standard error."""
    a, b, g = _names(a), _names(b), _names(given)
    names = list(dict.fromkeys(a + b + g))
    gj = _GramJackknife(batch, names, groups)
    ai, gi, bgi = gj.idx(a), gj.idx(g), gj.idx(b + g)
    _check_size(batch, bgi.size)

    def rate(gram, n):
        outer = np.linalg.slogdet(gj.cond_cov(gram, n, ai, gi))[1]
        inner = np.linalg.slogdet(gj.cond_cov(gram, n, ai, bgi))[1]
        return 0.5 * (outer - inner) / math.log(2.0)

    value, se = gj.jackknife(rate)
    return Estimate(float(value), float(se))


# --------------------------------------------------------------------------
# closed form vs. empirical
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Comparison:
    quantity: str
    closed_form: np.ndarray | float
    empirical: np.ndarray | float
    se: np.ndarray | float
    z: float

    @property
    def status(self) -> str:
        if self.z <= 3.0:
            return "pass"
        return "warn" if self.z <= 5.0 else "fail"


def compare_closed_forms(batch: SampleBatch, ctx, scheme=None, rate_bits: float | None = None
                         ) -> list[Comparison]:
    """Match sample estimates to the closed forms held by ``ctx`` (and ``scheme``).

    ``rate_bits`` is the closed-form one-hop rate the scheme should attain.
    """
    side = ("side",) if "side" in batch.names else ()
    checks = [("cov(x)", "x", (), ctx.source_cov)]
    if side:
        checks.append(("Σ_{x|y_k}", "x", side, ctx.sigma_x_side))
    checks.append(("Σ_{x|T,y_k}", "x", ("T",) + side, ctx.sigma_x_stat_side))
    checks.append(("Σ_{T|y_k}", "T", side, ctx.sigma_stat_side))
    if scheme is not None:
        checks.append(("distortion Σ_{x|u,y_k}", "x", ("u",) + side, scheme.D))
    out = []
    for label, t, g, closed in checks:
        est = empirical_conditional_cov(batch, t, g, with_se=True)
        out.append(Comparison(label, np.asarray(closed), est.value, est.se, est.z_score(closed)))
    if scheme is not None and rate_bits is not None:
        est = empirical_rate(batch, "T", "u", side)
        out.append(Comparison("I(T;u|y_k) bits", rate_bits, est.value, est.se,
                              est.z_score(rate_bits)))
    return out


# --------------------------------------------------------------------------
# flat binary export
# --------------------------------------------------------------------------

MAGIC = "dsc-rd-samples"


def export_batch(batch: SampleBatch, path, names: Sequence[str] | None = None) -> None:
    """Write a batch as one header line plus little-endian float64, row-major.

    Header: ``dsc-rd-samples v1 rows=<R> cols=<N> labels=<name>:<dim>,...``.
    Rows are the stacked variables in label order; columns are draws.
    """
    names = list(names or batch.names)
    mat = batch.stack(names)
    labels = ",".join(f"{n}:{batch[n].shape[0]}" for n in names)
    header = f"{MAGIC} v1 rows={mat.shape[0]} cols={mat.shape[1]} labels={labels}\n"
    with open(Path(path), "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(mat, dtype="<f8").tobytes(order="C"))


def read_batch(path) -> SampleBatch:
    with open(Path(path), "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 5 or header[0] != MAGIC or header[1] != "v1":
            raise ModelError(f"{path}: not a sample export")
        fields = dict(tok.split("=", 1) for tok in header[2:])
        rows, cols = int(fields["rows"]), int(fields["cols"])
        mat = np.frombuffer(fh.read(), dtype="<f8")
    if mat.size != rows * cols:
        raise ModelError(f"{path}: expected {rows * cols} values, found {mat.size}")
    mat = mat.reshape(rows, cols).astype(float)
    data, start = {}, 0
    for item in fields["labels"].split(","):
        name, dim = item.rsplit(":", 1)
        data[name] = mat[start:start + int(dim)]
        start += int(dim)
    return SampleBatch(data)
