"""Per-hop rate evaluation over a sensor-network tree.

Nodes are processed leaves first. Each node fuses its own measurement with
the decoded estimates of its children, encodes the resulting statistic for
its parent, and the parent's own measurement serves as decoder side
information (for nodes attached to ``BASE``, the optional base-station
measurement, or nothing).

Only forests are accepted: estimation errors of different children are
assumed independent, which does not hold once messages can merge.
"""

from __future__ import annotations

import heapq
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass

import numpy as np

from .coding_scheme import design_scheme
from .errors import DimensionError, InfeasibleDistortionError, ModelError
from .gauss_core import LOEWNER_TOL, as_covariance, as_matrix, is_full_rank, rcond_general
from .rate_distortion import (
    MATCH_TOL,
    MIXING_RCOND_MIN,
    RdContext,
    Validity,
    baseline_rate_no_side,
    build_context,
    classify,
    distortion_family,
    rd_rate,
)
from .suff_stat import BackwardChannel, LinearObservation, backward_channel, node_statistic

BASE = "BASE"


@dataclass(frozen=True)
class NodeSpec:
    """One sensor: square invertible mixing, noise covariance, distortion target, parent.

    The distortion is either ``alpha`` (a point on the segment between the
    node's two bounds) or an explicit matrix ``distortion``.
    """

    id: str
    mixing: np.ndarray
    noise_cov: np.ndarray
    parent: str = BASE
    alpha: float | None = None
    distortion: np.ndarray | None = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id or self.id == BASE:
            raise ModelError(f"invalid node id {self.id!r}")
        a = as_matrix(self.mixing, f"{self.id}.mixing")
        if a.shape[0] != a.shape[1]:
            raise DimensionError(f"{self.id}.mixing must be square, got {a.shape}")
        rc = rcond_general(a)
        if rc <= MIXING_RCOND_MIN:
            raise ModelError(f"{self.id}.mixing is singular (rcond={rc:.3e})")
        s = as_covariance(self.noise_cov, f"{self.id}.noise_cov")
        if s.shape != a.shape:
            raise DimensionError(f"{self.id}.noise_cov has shape {s.shape}, mixing {a.shape}")
        if not is_full_rank(s):
            raise ModelError(f"{self.id}.noise_cov is not full rank")
        if (self.alpha is None) == (self.distortion is None):
            raise ModelError(f"{self.id}: give exactly one of alpha and distortion")
        if self.alpha is not None:
            alpha = float(self.alpha)
            if not 0.0 < alpha <= 1.0:
                raise ModelError(f"{self.id}.alpha must lie in (0, 1], got {alpha!r}")
            object.__setattr__(self, "alpha", alpha)
        else:
            d = as_covariance(self.distortion, f"{self.id}.distortion")
            if d.shape != a.shape:
                raise DimensionError(f"{self.id}.distortion has shape {d.shape}")
            object.__setattr__(self, "distortion", d)
        object.__setattr__(self, "mixing", a)
        object.__setattr__(self, "noise_cov", s)

    def measurement(self) -> LinearObservation:
        return LinearObservation(self.mixing, self.noise_cov, self.id)


def topo_order(nodes: "NetworkSpec | Iterable[NodeSpec]") -> list[str]:
    """Node ids with every node after all of its children; ties by id."""
    if isinstance(nodes, NetworkSpec):
        nodes = nodes.nodes
    nodes = list(nodes)
    ids = {n.id for n in nodes}
    pending = {n.id: 0 for n in nodes}
    for n in nodes:
        if n.parent == BASE:
            continue
        if n.parent not in ids:
            raise ModelError(f"node {n.id!r} has unknown parent {n.parent!r}")
        pending[n.parent] += 1
    parent = {n.id: n.parent for n in nodes}
    ready = [i for i, k in pending.items() if k == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        nid = heapq.heappop(ready)
        order.append(nid)
        p = parent[nid]
        if p != BASE:
            pending[p] -= 1
            if pending[p] == 0:
                heapq.heappush(ready, p)
    if len(order) != len(nodes):
        stuck = sorted(set(ids) - set(order))
        raise ModelError(f"cycle detected among nodes {stuck}")
    return order


@dataclass(frozen=True)
class NetworkSpec:
    source_cov: np.ndarray
    nodes: tuple[NodeSpec, ...]
    base: LinearObservation | None = None

    def __post_init__(self):
        sx = as_covariance(self.source_cov, "source_cov")
        if not is_full_rank(sx):
            raise ModelError("source_cov must be full rank")
        object.__setattr__(self, "source_cov", sx)
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if not self.nodes:
            raise ModelError("network has no nodes")
        seen = set()
        for n in self.nodes:
            if n.id in seen:
                raise ModelError(f"duplicate node id {n.id!r}")
            seen.add(n.id)
            if n.mixing.shape != sx.shape:
                raise DimensionError(
                    f"node {n.id!r}: mixing is {n.mixing.shape}, source is {sx.shape}")
        if self.base is not None:
            if self.base.mixing.shape != sx.shape:
                raise DimensionError(f"base mixing must be {sx.shape}, got {self.base.mixing.shape}")
            rc = rcond_general(self.base.mixing)
            if rc <= MIXING_RCOND_MIN:
                raise ModelError(f"base mixing is singular (rcond={rc:.3e})")
            object.__setattr__(self, "base", self.base.relabel(BASE))
        object.__setattr__(self, "_order", tuple(topo_order(self.nodes)))

    @property
    def order(self) -> tuple[str, ...]:
        return self._order

    def node(self, node_id: str) -> NodeSpec:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise ModelError(f"unknown node {node_id!r}")

    def children_of(self, node_id: str) -> list[str]:
        return sorted(n.id for n in self.nodes if n.parent == node_id)

    def side_for(self, node: NodeSpec) -> LinearObservation | None:
        if node.parent == BASE:
            return self.base
        return self.node(node.parent).measurement()


@dataclass(frozen=True)
class NodeReport:
    node_id: str
    parent: str
    children: tuple[str, ...]
    statistic_mixing: np.ndarray
    statistic_noise: np.ndarray
    sigma_x_side: np.ndarray
    sigma_x_stat_side: np.ndarray
    D: np.ndarray
    alpha: float | None
    rate_bits: float
    validity: Validity
    scheme_attached: bool
    baseline_rate_bits: float | None = None


@dataclass(frozen=True)
class NetworkResult:
    reports: tuple[NodeReport, ...]
    sum_rate_bits: float

    def report(self, node_id: str) -> NodeReport:
        for r in self.reports:
            if r.node_id == node_id:
                return r
        raise KeyError(node_id)


@dataclass(frozen=True)
class NodeState:
    """Everything derived for one node during the leaves-to-root pass."""

    node: NodeSpec
    children: tuple[str, ...]
    channels: tuple[BackwardChannel, ...]
    ctx: RdContext
    D: np.ndarray
    validity: Validity


def walk(net: NetworkSpec, tol: float = LOEWNER_TOL, stop_at: str | None = None
         ) -> Iterator[NodeState]:
    """Resolve nodes in topological order, yielding each node's state."""
    resolved: dict[str, np.ndarray] = {}
    sx = net.source_cov
    for nid in net.order:
        node = net.node(nid)
        kids = tuple(net.children_of(nid))
        channels = []
        for k in kids:
            try:
                channels.append(backward_channel(sx, resolved[k], tol))
            except InfeasibleDistortionError as exc:
                raise InfeasibleDistortionError(
                    f"node {nid!r}: child {k!r} distortion is not dominated by Σ_x",
                    validity=exc.validity, node_id=k) from exc
        stat = node_statistic(node.measurement(), channels, sx, label=f"T[{nid}]")
        ctx = build_context(sx, stat, net.side_for(node))
        d = node.distortion if node.distortion is not None else distortion_family(ctx, node.alpha)
        target = classify(ctx, d, tol)
        if target.validity is Validity.INFEASIBLE:
            raise InfeasibleDistortionError(f"node {nid!r}: {target.describe()}",
                                            validity=target, node_id=nid)
        resolved[nid] = target.D
        yield NodeState(node, kids, tuple(channels), ctx, target.D, target.validity)
        if nid == stop_at:
            return


def evaluate(net: NetworkSpec, *, tol: float = LOEWNER_TOL, match_tol: float = MATCH_TOL,
             with_scheme: bool = True, with_baseline: bool = False) -> NetworkResult:
    """Per-node rates and the network sum-rate."""
    reports = []
    for st in walk(net, tol):
        rate = rd_rate(st.ctx, st.D, tol)
        attached = False
        if with_scheme and st.validity is Validity.STRICT:
            design_scheme(st.ctx, st.D, tol=tol, match_tol=match_tol)
            attached = True
        baseline = None
        if with_baseline:
            try:
                baseline = baseline_rate_no_side(st.ctx, st.D, tol)
            except InfeasibleDistortionError:
                baseline = None
        reports.append(NodeReport(
            node_id=st.node.id,
            parent=st.node.parent,
            children=st.children,
            statistic_mixing=st.ctx.statistic.mixing,
            statistic_noise=st.ctx.statistic.noise_cov,
            sigma_x_side=st.ctx.sigma_x_side,
            sigma_x_stat_side=st.ctx.sigma_x_stat_side,
            D=st.D,
            alpha=st.node.alpha,
            rate_bits=rate,
            validity=st.validity,
            scheme_attached=attached,
            baseline_rate_bits=baseline,
        ))
    total = 0.0
    for r in reports:
        total += r.rate_bits
    return NetworkResult(tuple(reports), total)


@dataclass(frozen=True)
class SweepRow:
    node_id: str
    alpha: float
    D: np.ndarray
    rate_bits: float


def node_state(net: NetworkSpec, node_id: str, tol: float = LOEWNER_TOL) -> NodeState:
    net.node(node_id)
    state = None
    for state in walk(net, tol, stop_at=node_id):
        pass
    return state


def sweep(net: NetworkSpec, node_id: str, alphas: Sequence[float],
          tol: float = LOEWNER_TOL) -> list[SweepRow]:
    """Rate of one node along ``D(α)``, all other nodes held at their targets."""
    ctx = node_state(net, node_id, tol).ctx
    rows = []
    for a in alphas:
        d = distortion_family(ctx, a)
        rows.append(SweepRow(node_id, float(a), d, rd_rate(ctx, d, tol)))
    return rows
