"""Alternating projections, the hybrid iterative map and their run loop."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .measure import true_error
from .project import ConstraintSet, Support, TorusProjector, projector

CONVERGED = "converged"
STAGNATED = "stagnated"
MAX_ITERS = "max_iters"

CONVERGENCE_RTOL = 1e-14
STAGNATION_FLOOR = 1e-10


@dataclass
class SolverConfig:
    constraint: ConstraintSet
    max_iters: int = 10_000
    seed: int = 0
    record_every: int = 1
    stagnation_window: int = 500
    stagnation_rel_tol: float = 0.01
    method: str = "hybrid"
    convergence_rtol: float = CONVERGENCE_RTOL
    # count -F as an associate when scoring against a reference
    signed_error: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")
        if self.record_every < 1:
            raise InvalidArgumentError("record_every must be >= 1")
        if self.stagnation_window < 2:
            raise InvalidArgumentError("stagnation_window must be >= 2")
        if not self.stagnation_rel_tol > 0:
            raise InvalidArgumentError("stagnation_rel_tol must be positive")
        if self.method not in ("hybrid", "alternating"):
            raise InvalidArgumentError(f"unknown method {self.method!r}")


@dataclass
class IterTrace:
    iters: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    true_error: list = field(default_factory=list)
    step_norm: list = field(default_factory=list)
    status: str = MAX_ITERS
    seed: int = 0

    def append(self, n: int, residual: float, step: float, err: Optional[float]) -> None:
        self.iters.append(n)
        self.residual.append(residual)
        self.step_norm.append(step)
        self.true_error.append(err)

    def __len__(self) -> int:
        return len(self.iters)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "residual", "true_error", "step_norm"])
        for n, r, e, s in zip(self.iters, self.residual, self.true_error, self.step_norm):
            w.writerow([n, repr(r), "" if e is None else repr(e), repr(s)])
        buf.write(f"# status={self.status} seed={self.seed}\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read_csv(cls, path) -> "IterTrace":
        trace = cls()
        with open(path) as fh:
            lines = fh.read().splitlines()
        for row in csv.DictReader(l for l in lines if not l.startswith("#")):
            err = row["true_error"]
            trace.append(int(row["iter"]), float(row["residual"]), float(row["step_norm"]),
                         float(err) if err else None)
        for line in lines:
            if line.startswith("# status="):
                parts = dict(p.split("=", 1) for p in line[2:].split())
                trace.status = parts["status"]
                trace.seed = int(parts["seed"])
        return trace


def alternating_step(data, constraint: ConstraintSet, F) -> np.ndarray:
    """One alternating-projection step ``P_B(P_A(F))``."""
    P_A = TorusProjector(data)
    return projector(constraint)(P_A(np.asarray(F, dtype=np.float64)))


def hybrid_step(data, constraint: ConstraintSet, F) -> np.ndarray:
    """One application of ``D(F) = F + P_A(R_B(F)) - P_B(F)``."""
    return _HybridMap(TorusProjector(data), projector(constraint))(np.asarray(F, dtype=np.float64))[0]


class _HybridMap:
    def __init__(self, P_A, P_B):
        self.P_A = P_A
        self.P_B = P_B

    def __call__(self, F):
        pb = self.P_B(F)
        pa = self.P_A(2.0 * pb - F)
        diff = pa - pb
        return F + diff, pb, float(np.linalg.norm(diff))


class _AlternatingMap:
    def __init__(self, P_A, P_B):
        self.P_A = P_A
        self.P_B = P_B

    def __call__(self, F):
        pa = self.P_A(F)
        nxt = self.P_B(pa)
        # residual: gap between the paired points on the two sets
        return nxt, nxt, float(np.linalg.norm(pa - nxt))


STAGNATION_BLOCKS = 10


def relative_variation(values: Sequence[float], blocks: int = STAGNATION_BLOCKS) -> float:
    """``(max - min) / max`` of the block means of ``values``.

    Averaging over ``blocks`` consecutive blocks first makes an oscillating
    plateau count as constant while a steady decay still shows up.
    """
    x = np.asarray(values, dtype=float)
    nb = max(1, min(blocks, x.size))
    x = x[x.size % nb:]
    means = x.reshape(nb, -1).mean(axis=1)
    top = means.max()
    return float((top - means.min()) / top) if top > 0 else np.inf


def stagnation_detect(residuals: Sequence[float], steps: Sequence[float], rel_tol: float,
                      floor: float) -> bool:
    """Plateau test over a window of records.

    True when residual and step norm each have ``relative_variation`` below
    ``rel_tol`` across the window while the residual stays above ``floor``.
    """
    r = np.asarray(residuals, dtype=float)
    s = np.asarray(steps, dtype=float)
    if r.size < 2:
        return False
    if relative_variation(r) >= rel_tol or relative_variation(s) >= rel_tol:
        return False
    return bool(r.min() > floor)


def initial_iterate(data, seed: int) -> np.ndarray:
    """Random point on the torus: white Gaussian noise projected onto it."""
    rng = np.random.default_rng(seed)
    P_A = TorusProjector(data)
    return P_A(rng.standard_normal(np.shape(data)))


def run(data, config: SolverConfig, F0=None, reference=None) -> tuple[np.ndarray, IterTrace]:
    """Iterate the configured map from ``F0`` and return ``(r^n, trace)``.

    ``r^n = P_B(F^n)`` at the last recorded iterate ``n``.  The loop stops when the residual
    drops below ``convergence_rtol * ||a||``, when the last
    ``stagnation_window`` records form a plateau, or after ``max_iters`` steps.
    """
    a = np.asarray(data, dtype=np.float64)
    P_A = TorusProjector(a)
    P_B = projector(config.constraint)
    step_map = _HybridMap(P_A, P_B) if config.method == "hybrid" else _AlternatingMap(P_A, P_B)
    F = initial_iterate(a, config.seed) if F0 is None else np.array(F0, dtype=np.float64)
    if F.shape != a.shape:
        raise InvalidArgumentError(f"dimension mismatch: {F.shape} vs {a.shape}")
    if reference is not None:
        reference = np.asarray(reference, dtype=np.float64)

    norm_a = float(np.linalg.norm(a))
    tol = config.convergence_rtol * norm_a
    floor = STAGNATION_FLOOR * norm_a
    trace = IterTrace(seed=config.seed)
    window = config.stagnation_window
    for n in range(config.max_iters):
        nxt, r, residual = step_map(F)
        last = residual < tol
        if n % config.record_every == 0 or last or n == config.max_iters - 1:
            step = float(np.linalg.norm(nxt - F))
            err = None
            if reference is not None:
                err = true_error(r, reference, signed=config.signed_error)[0]
            trace.append(n, residual, step, err)
            if last:
                trace.status = CONVERGED
                return r, trace
            if len(trace) >= window and stagnation_detect(
                    trace.residual[-window:], trace.step_norm[-window:],
                    config.stagnation_rel_tol, floor):
                trace.status = STAGNATED
                return r, trace
        F = nxt
    trace.status = MAX_ITERS
    return r, trace


def linear_model_matrix(H) -> np.ndarray:
    """Block matrix ``[[2 H^t H, H^t], [-H, 0]]`` of the hybrid map for two subspaces.

    ``H`` is ``|S| x m``; the result is square of size ``m + |S|``.
    """
    H = np.atleast_2d(np.asarray(H, dtype=np.float64))
    s, m = H.shape
    out = np.zeros((m + s, m + s))
    out[:m, :m] = 2.0 * H.T @ H
    out[:m, m:] = H.T
    out[m:, :m] = -H
    return out


def support_constraint(mask) -> Support:
    return Support(np.asarray(mask, dtype=bool))
