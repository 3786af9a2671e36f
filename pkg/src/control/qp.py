"""TVCBF safety filter: closest admissible command to the reference."""
import time
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import osqp
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import sparse

from cbf.barrier import ConstraintRow
from utils.errors import ParameterError

OSQP_SETTINGS: Dict[str, object] = {
    "verbose": False,
    "eps_abs": 1e-10,
    "eps_rel": 1e-10,
    "eps_prim_inf": 1e-9,
    "eps_dual_inf": 1e-9,
    "polish": True,
    "max_iter": 20000,
}
ROW_TOL = 1e-7


class ControlBox(BaseModel):
    """Element-wise bounds ``lower <= u <= upper``."""
    model_config = ConfigDict(frozen=True)

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    @model_validator(mode="after")
    def _ordered(self) -> "ControlBox":
        if len(self.lower) != len(self.upper):
            raise ParameterError("Control box bounds differ in length")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ParameterError(f"Control box has lower > upper: {self.lower} / {self.upper}")
        return self

    @classmethod
    def symmetric(cls, limit: float, dims: int) -> "ControlBox":
        return cls(lower=(-limit,) * dims, upper=(limit,) * dims)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float)

    @property
    def dims(self) -> int:
        return len(self.lower)

    def clip(self, u) -> np.ndarray:
        return np.clip(np.asarray(u, dtype=float), self.lo, self.hi)

    def contains(self, u, tol: float = 0.0) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lo - tol) and np.all(u <= self.hi + tol))


class QpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITER = "MaxIter"


class QpResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    u: Optional[np.ndarray]
    status: QpStatus
    active_rows: Tuple[int, ...] = ()
    duals: Optional[np.ndarray] = None
    solve_time: float = 0.0


def _dense_csc(M: np.ndarray) -> sparse.csc_matrix:
    # full sparsity pattern so later updates can change any entry
    A = sparse.csc_matrix(np.ones(M.shape))
    A.data = M.flatten(order="F").astype(float)
    return A


def _stack(rows: Sequence[ConstraintRow], m: int) -> Tuple[np.ndarray, np.ndarray]:
    if not rows:
        return np.zeros((0, m)), np.zeros(0)
    A = np.vstack([row.a for row in rows])
    c = np.array([row.c for row in rows])
    if A.shape[1] != m:
        raise ParameterError(f"Constraint rows have {A.shape[1]} columns, control has {m}")
    return A, c


def rows_satisfied(u: np.ndarray, rows: Sequence[ConstraintRow], tol: float = 0.0) -> bool:
    return all(float(row.a @ u) >= row.c - tol for row in rows)


class QpWorkspace:
    """OSQP instance reused across ticks while the same pair rows are active.

    The instance is keyed on the ``(robot_index, obstacle_index, mode)`` tuple
    of every row plus the matrix shape; any change rebuilds it.
    """

    def __init__(self, settings: Optional[Dict[str, object]] = None):
        self.settings = {**OSQP_SETTINGS, **(settings or {})}
        self._solver: Optional[osqp.OSQP] = None
        self._key: Optional[Tuple] = None

    def solve(self, u_ref: np.ndarray, A_rows: np.ndarray, c: np.ndarray, box: ControlBox, pairs: Tuple = ()):
        m = u_ref.size
        A = np.vstack([A_rows, np.eye(m)])
        lower = np.concatenate([c, box.lo])
        upper = np.concatenate([np.full(c.size, np.inf), box.hi])
        q = -2.0 * u_ref

        key = (pairs, A.shape)
        if self._solver is None or self._key != key:
            self._solver = osqp.OSQP()
            P = sparse.csc_matrix(2.0 * np.eye(m))
            self._solver.setup(P=P, q=q, A=_dense_csc(A), l=lower, u=upper, **self.settings)
            self._key = key
        else:
            self._solver.update(q=q, l=lower, u=upper, Ax=A.flatten(order="F"))
        return self._solver.solve()


def fallback_control(u_ref, rows: Sequence[ConstraintRow], box: ControlBox) -> np.ndarray:
    """Box command maximizing the margin of the most violated row.

    The linear program over a box separates per coordinate: each input goes to
    the bound matching the sign of its coefficient, zero coefficients keep the
    clipped reference.
    """
    u_clip = box.clip(u_ref)
    if not rows:
        return u_clip
    margins = [float(row.a @ u_clip) - row.c for row in rows]
    a = rows[int(np.argmin(margins))].a
    return np.where(a > 0.0, box.hi, np.where(a < 0.0, box.lo, u_clip))


def tvcbf_qp(
    u_ref,
    rows: Sequence[ConstraintRow],
    box: ControlBox,
    workspace: Optional[QpWorkspace] = None,
) -> QpResult:
    """min ‖u − u_ref‖² s.t. a_i·u >= c_i for every row, u in box.

    A reference that already satisfies every row and the box is returned
    unchanged. Infeasibility is reported through the status; the caller
    applies :func:`fallback_control`.
    """
    start = time.perf_counter()
    u_ref = np.asarray(u_ref, dtype=float)
    if u_ref.size != box.dims:
        raise ParameterError(f"Reference has {u_ref.size} inputs, box has {box.dims}")
    rows = [row for row in rows if not row.emergency]

    if box.contains(u_ref) and rows_satisfied(u_ref, rows):
        return QpResult(u=u_ref.copy(), status=QpStatus.OPTIMAL, solve_time=time.perf_counter() - start)
    if not rows:
        return QpResult(u=box.clip(u_ref), status=QpStatus.OPTIMAL, solve_time=time.perf_counter() - start)

    A_rows, c = _stack(rows, u_ref.size)
    workspace = workspace or QpWorkspace()
    pairs = tuple((row.robot_index, row.obstacle_index, row.mode) for row in rows)
    res = workspace.solve(u_ref, A_rows, c, box, pairs)
    elapsed = time.perf_counter() - start

    status = res.info.status
    if status.startswith("primal infeasible"):
        return QpResult(u=None, status=QpStatus.INFEASIBLE, solve_time=elapsed)
    if status not in ("solved", "solved inaccurate") or res.x is None:
        return QpResult(u=None, status=QpStatus.MAX_ITER, solve_time=elapsed)

    u = box.clip(res.x)
    if not rows_satisfied(u, rows, ROW_TOL):
        # ADMM stopped short of a certificate; treat as infeasible
        return QpResult(u=None, status=QpStatus.INFEASIBLE, solve_time=elapsed)
    slack = A_rows @ u - c
    active: List[int] = [i for i, s in enumerate(slack) if s <= ROW_TOL]
    duals = np.maximum(-np.asarray(res.y[:len(rows)]), 0.0)
    return QpResult(u=u, status=QpStatus.OPTIMAL, active_rows=tuple(active), duals=duals, solve_time=elapsed)
