"""Closed-form availability models and the network-load arithmetic.

Two storage schemes are compared. In the coded scheme node i keeps r_i
coded fragments of every block, with the r_i drawn i.i.d. from a
distribution f; a block survives while the nodes jointly hold at least k
fragments, so the irrecoverability probability is the lower tail of the
n-fold convolution of f. In the replicated scheme each node keeps a full
copy of a block with probability 1/c; a block dies only when nobody kept
it, giving (1 - 1/c)^n.

Everything here is exact arithmetic on small arrays; the simulator in
``simnet`` provides the empirical counterpart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

_PMF_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Distribution:
    """PMF over per-node fragment counts r >= 0.

    Either geometric with parameter p (support r >= 1, mean 1/p) or an
    explicit finite table.
    """

    kind: str
    p: float | None = None
    table: tuple[tuple[int, float], ...] = field(default=())

    @classmethod
    def geometric(cls, p: float) -> "Distribution":
        if not 0.0 < p < 1.0:
            raise ValueError(f"geometric parameter must be in (0,1), got {p}")
        return cls(kind="geometric", p=p)

    @classmethod
    def explicit(cls, pmf: Mapping[int, float]) -> "Distribution":
        items = tuple(sorted(pmf.items()))
        if not items:
            raise ValueError("empty pmf")
        if any(r < 0 for r, _ in items):
            raise ValueError("fragment counts must be >= 0")
        if any(q < 0 for _, q in items):
            raise ValueError("probabilities must be >= 0")
        total = math.fsum(q for _, q in items)
        if abs(total - 1.0) > _PMF_TOLERANCE:
            raise ValueError(f"pmf sums to {total}, not 1")
        return cls(kind="explicit", table=items)

    def pmf(self, r: int) -> float:
        if r < 0:
            return 0.0
        if self.kind == "geometric":
            if r == 0:
                return 0.0
            return self.p * (1.0 - self.p) ** (r - 1)
        return dict(self.table).get(r, 0.0)

    def pmf_prefix(self, stop: int) -> np.ndarray:
        """pmf values for r = 0..stop-1 as a float array."""
        return np.array([self.pmf(r) for r in range(stop)], dtype=np.float64)

    def mean(self) -> float:
        if self.kind == "geometric":
            return 1.0 / self.p
        return math.fsum(r * q for r, q in self.table)


def irrecoverability_coded(f: Distribution, n: int, k: int) -> float:
    """P(sum of n i.i.d. draws from f < k): lower tail of the convolution.

    Exact O(n k^2) summation; support above k-1 cannot contribute to the
    tail so the convolution is truncated there.
    """
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    pmf = f.pmf_prefix(k)
    acc = np.zeros(k, dtype=np.float64)
    acc[0] = 1.0
    for _ in range(n):
        acc = np.convolve(acc, pmf)[:k]
    return float(acc.sum())


def geometric_convolution(p: float, n: int, u: int) -> float:
    """Mass of the sum of n geometric(p) draws at u, in log space."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0,1), got {p}")
    if n < 1:
        raise ValueError("need n >= 1")
    if u < n:
        return 0.0
    log_comb = math.lgamma(u) - math.lgamma(n) - math.lgamma(u - n + 1)
    return math.exp(log_comb + n * math.log(p) + (u - n) * math.log1p(-p))


def irrecoverability_replicated(c: float, n: int) -> float:
    """P(no node kept a copy) when each keeps one with probability 1/c."""
    if c <= 1:
        raise ValueError(f"compression factor must exceed 1, got {c}")
    if n < 1:
        raise ValueError("need n >= 1")
    return (1.0 - 1.0 / c) ** n


def min_nodes_for_threshold(
    model: str,
    *,
    threshold: float,
    k: int | None = None,
    p: float | None = None,
    f: Distribution | None = None,
    c: float | None = None,
    n_max: int = 100_000,
) -> int:
    """Smallest n whose irrecoverability falls below ``threshold``.

    Linear scan with a monotonicity check; the coded scan reuses the
    running convolution so the whole search is O(n_stop * k^2).
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0,1)")
    if model == "replicated":
        if c is None:
            raise ValueError("replicated model needs c")
        prev = 1.0
        for n in range(1, n_max + 1):
            value = irrecoverability_replicated(c, n)
            if value > prev + 1e-15:
                raise ArithmeticError("irrecoverability increased with n")
            if value < threshold:
                return n
            prev = value
    elif model == "coded":
        if f is None:
            if k is None or p is None:
                raise ValueError("coded model needs (k, p) or a distribution")
            f = Distribution.geometric(p)
        if k is None:
            raise ValueError("coded model needs k")
        pmf = f.pmf_prefix(k)
        acc = np.zeros(k, dtype=np.float64)
        acc[0] = 1.0
        prev = 1.0
        for n in range(1, n_max + 1):
            acc = np.convolve(acc, pmf)[:k]
            value = float(acc.sum())
            if value > prev + 1e-15:
                raise ArithmeticError("irrecoverability increased with n")
            if value < threshold:
                return n
            prev = value
    else:
        raise ValueError(f"unknown model {model!r}")
    raise ArithmeticError(f"threshold {threshold} not reached within n_max={n_max}")


@dataclass(frozen=True)
class NetworkLoadReport:
    """Per-node egress for the two serving scenarios, in Mbps."""

    replicated_per_full_node_mbps: float
    coded_per_node_mbps: float
    per_connection_mbps: float
    total_connections: int


def network_load(
    full_nodes: int,
    light_nodes: int,
    per_node_rate_mbps: float,
    ls_nodes: int,
    connections_per_recovery: int,
) -> NetworkLoadReport:
    """Egress arithmetic for full-node serving vs fragment serving.

    With replication, ``light_nodes`` each pulling ``per_node_rate_mbps``
    land entirely on the full nodes. With fragment serving, each consumer
    splits the same rate across ``connections_per_recovery`` connections
    and the aggregate spreads over ``ls_nodes`` serving nodes.
    """
    if full_nodes < 1 or ls_nodes < 1 or connections_per_recovery < 1:
        raise ValueError("serving node and connection counts must be >= 1")
    if light_nodes < 0 or per_node_rate_mbps < 0:
        raise ValueError("demand must be >= 0")
    total_demand = per_node_rate_mbps * light_nodes
    per_connection = per_node_rate_mbps / connections_per_recovery
    total_connections = light_nodes * connections_per_recovery
    return NetworkLoadReport(
        replicated_per_full_node_mbps=total_demand / full_nodes,
        coded_per_node_mbps=per_connection * total_connections / ls_nodes,
        per_connection_mbps=per_connection,
        total_connections=total_connections,
    )


#: Floor applied to emitted curve values so log-scale plots stay finite.
CURVE_FLOOR = 1e-30


def curve_rows(
    model: str,
    *,
    n_max: int = 100,
    k: int | None = None,
    p: float | None = None,
    c: float | None = None,
) -> list[tuple[int, float, int]]:
    """(x, probability, clamped) rows for one model curve.

    ``model`` is ``coded`` or ``replicated`` (x = number of nodes), or
    ``geometric`` (x = fragment count, probability = pmf). Values below
    ``CURVE_FLOOR`` are clamped there and flagged in the third column.
    """
    raw: list[tuple[int, float]]
    if model == "coded":
        if k is None or p is None:
            raise ValueError("coded curve needs k and p")
        f = Distribution.geometric(p)
        pmf = f.pmf_prefix(k)
        acc = np.zeros(k, dtype=np.float64)
        acc[0] = 1.0
        raw = []
        for n in range(1, n_max + 1):
            acc = np.convolve(acc, pmf)[:k]
            raw.append((n, float(acc.sum())))
    elif model == "replicated":
        if c is None:
            raise ValueError("replicated curve needs c")
        raw = [(n, irrecoverability_replicated(c, n)) for n in range(1, n_max + 1)]
    elif model == "geometric":
        if p is None:
            raise ValueError("geometric curve needs p")
        f = Distribution.geometric(p)
        raw = [(r, f.pmf(r)) for r in range(1, n_max + 1)]
    else:
        raise ValueError(f"unknown curve model {model!r}")
    out = []
    for x, value in raw:
        clamped = value < CURVE_FLOOR
        out.append((x, CURVE_FLOOR if clamped else value, int(clamped)))
    return out


def emit_curves(
    model: str,
    out_path: str | Path,
    *,
    n_max: int = 100,
    k: int | None = None,
    p: float | None = None,
    c: float | None = None,
) -> list[tuple[int, float, int]]:
    """Write whitespace-separated curve rows to ``out_path``; returns them."""
    rows = curve_rows(model, n_max=n_max, k=k, p=p, c=c)
    with open(out_path, "w") as fh:
        fh.write("# x probability clamped\n")
        for x, value, clamped in rows:
            fh.write(f"{x} {value:.17g} {clamped}\n")
    return rows
