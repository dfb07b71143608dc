"""Backend-neutral integer programs and the bundled exact reference solver.

:class:`MipModel` is a plain carrier for variables, linear constraints and a
linear objective.  Models can be handed to any registered backend through
:func:`solve`; two backends ship with the package:

``reference``
    A from-scratch exact solver for bounded pure-integer programs:
    depth-first search with incumbent pruning and integer bound propagation.
    Deterministic given the variable declaration order, exact on int and
    Fraction data, and intended for small models (tests, the enumeration
    oracle, desk-scale runs).  It refuses to approximate: exceeding the node
    budget raises instead of returning a guess.

``scipy``
    An adapter around ``scipy.optimize.milp`` (HiGHS).  Solutions of
    all-integer models are rounded and re-verified exactly against the model
    so the rest of the pipeline keeps exact arithmetic.

Backend selection falls back to the ``PTCOORD_BACKEND`` environment
variable, then to ``reference``.
"""

from __future__ import annotations

import math
import os
import time
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

Num = int | Fraction

DEFAULT_NODE_LIMIT = 10_000_000
_PROP_STEP_CAP = 200_000  # per-node propagation work cap; sound to stop early

RELATIONS = ("<=", ">=", "==")


class SearchSpaceExceeded(RuntimeError):
    """The reference solver ran out of its node budget before proving
    optimality; no approximate answer is returned."""


class BackendError(RuntimeError):
    """An external backend failed or returned an unusable answer."""


@dataclass(frozen=True)
class VarSpec:
    name: str
    lb: Num | None
    ub: Num | None
    integer: bool
    # branching hint: explore the high half of the domain first (None =
    # decide from the objective coefficient sign)
    branch_high: bool | None = None


@dataclass(frozen=True)
class RowSpec:
    terms: tuple[tuple[int, Num], ...]
    rel: str
    rhs: Num
    name: str


@dataclass
class MipModel:
    """A linear integer program: variables, rows, objective, sense.

    Built incrementally through :meth:`add_var` / :meth:`add_constr` /
    :meth:`set_objective`; treat as read-only once handed to a solver.
    """

    sense: str = "min"
    variables: list[VarSpec] = field(default_factory=list)
    constraints: list[RowSpec] = field(default_factory=list)
    objective: dict[int, Num] = field(default_factory=dict)
    objective_const: Num = 0

    def add_var(self, name: str | None = None, lb: Num = 0, ub: Num | None = None,
                integer: bool = True, branch_high: bool | None = None) -> int:
        idx = len(self.variables)
        self.variables.append(VarSpec(name or f"x{idx}", lb, ub, integer, branch_high))
        return idx

    def add_constr(self, terms: Iterable[tuple[int, Num]], rel: str, rhs: Num,
                   name: str | None = None) -> None:
        if rel not in RELATIONS:
            raise ValueError(f"unknown relation {rel!r}")
        agg: dict[int, Num] = {}
        for idx, coef in terms:
            if not 0 <= idx < len(self.variables):
                raise ValueError(f"constraint references undeclared variable {idx}")
            if coef == 0:
                continue
            agg[idx] = agg.get(idx, 0) + coef
        clean = tuple((i, c) for i, c in agg.items() if c != 0)
        self.constraints.append(
            RowSpec(clean, rel, rhs, name or f"c{len(self.constraints)}")
        )

    def set_objective(self, terms: Iterable[tuple[int, Num]] | Mapping[int, Num],
                      constant: Num = 0, sense: str | None = None) -> None:
        if sense is not None:
            if sense not in ("min", "max"):
                raise ValueError(f"unknown sense {sense!r}")
            self.sense = sense
        items = terms.items() if isinstance(terms, Mapping) else terms
        agg: dict[int, Num] = {}
        for idx, coef in items:
            if not 0 <= idx < len(self.variables):
                raise ValueError(f"objective references undeclared variable {idx}")
            if coef != 0:
                agg[idx] = agg.get(idx, 0) + coef
        self.objective = {i: c for i, c in agg.items() if c != 0}
        self.objective_const = constant

    # -- evaluation helpers -------------------------------------------------

    def objective_value(self, values: Sequence[Num]) -> Num:
        return sum(c * values[i] for i, c in self.objective.items()) + self.objective_const

    def check_values(self, values: Sequence[Num], tol: Num = 0) -> list[str]:
        """Return the constraints and bounds violated by ``values``."""
        bad: list[str] = []
        if len(values) != len(self.variables):
            return [f"expected {len(self.variables)} values, got {len(values)}"]
        for i, var in enumerate(self.variables):
            x = values[i]
            if var.lb is not None and x < var.lb - tol:
                bad.append(f"{var.name}: below lower bound")
            if var.ub is not None and x > var.ub + tol:
                bad.append(f"{var.name}: above upper bound")
            if var.integer and x != round(x):
                if abs(x - round(x)) > tol:
                    bad.append(f"{var.name}: not integral")
        for row in self.constraints:
            act = sum(c * values[i] for i, c in row.terms)
            if row.rel == "<=" and act > row.rhs + tol:
                bad.append(f"{row.name}: activity {act} > {row.rhs}")
            elif row.rel == ">=" and act < row.rhs - tol:
                bad.append(f"{row.name}: activity {act} < {row.rhs}")
            elif row.rel == "==" and abs(act - row.rhs) > tol:
                bad.append(f"{row.name}: activity {act} != {row.rhs}")
        return bad


@dataclass(frozen=True)
class MipSolution:
    """Outcome of one solve: a faithful status, variable values, the
    objective, and the best proven bound."""

    status: str  # optimal | infeasible | time_limit | unbounded
    values: tuple[Num, ...] | None
    objective: Num | None
    bound: Num | None


# ---------------------------------------------------------------------------
# Reference solver
# ---------------------------------------------------------------------------


class _Search:
    """Shared machinery for the exact depth-first search.

    Rows are normalized to activity windows ``lo <= sum(terms) <= hi``.  A
    virtual cutoff row over the objective is re-seeded at every node so the
    incumbent (or enumeration target) prunes through propagation as well as
    through the optimistic node bound.
    """

    def __init__(self, model: MipModel, node_limit: int, time_limit: float | None):
        self.model = model
        self.node_limit = node_limit
        self.time_limit = time_limit
        self.maximize = model.sense == "max"
        n = len(model.variables)
        self.n = n

        lb: list[Num] = []
        ub: list[Num] = []
        for var in model.variables:
            if not var.integer:
                raise ValueError(
                    f"reference solver handles integer variables only ({var.name} is continuous)"
                )
            if var.lb is None or var.ub is None:
                raise ValueError(f"variable {var.name} needs finite bounds")
            lb.append(math.ceil(var.lb))
            ub.append(math.floor(var.ub))
        self.root_lb = lb
        self.root_ub = ub

        rows_idx: list[tuple[int, ...]] = []
        rows_coef: list[tuple[Num, ...]] = []
        rows_lo: list[Num | None] = []
        rows_hi: list[Num | None] = []
        self.fixed_fail = False
        for row in model.constraints:
            lo = row.rhs if row.rel in (">=", "==") else None
            hi = row.rhs if row.rel in ("<=", "==") else None
            if not row.terms:
                if (lo is not None and 0 < lo) or (hi is not None and 0 > hi):
                    self.fixed_fail = True
                continue
            rows_idx.append(tuple(i for i, _ in row.terms))
            rows_coef.append(tuple(c for _, c in row.terms))
            rows_lo.append(lo)
            rows_hi.append(hi)

        # virtual cutoff row over the objective, bounds filled per node
        self.obj_terms = tuple(model.objective.items())
        self.cut_row = len(rows_idx)
        rows_idx.append(tuple(i for i, _ in self.obj_terms))
        rows_coef.append(tuple(c for _, c in self.obj_terms))
        rows_lo.append(None)
        rows_hi.append(None)

        self.rows_idx = rows_idx
        self.rows_coef = rows_coef
        self.rows_lo = rows_lo
        self.rows_hi = rows_hi

        var_rows: list[list[int]] = [[] for _ in range(n)]
        for r, idxs in enumerate(rows_idx):
            for i in idxs:
                var_rows[i].append(r)
        self.var_rows = var_rows

        self.obj_coef: list[Num] = [0] * n
        for i, c in self.obj_terms:
            self.obj_coef[i] = c
        maximize = self.maximize
        self.hi_first: list[bool] = []
        for i, var in enumerate(model.variables):
            if var.branch_high is not None:
                self.hi_first.append(var.branch_high)
            else:
                c = self.obj_coef[i]
                self.hi_first.append((maximize and c > 0) or (not maximize and c < 0))
        self.obj_step = 1 if all(
            isinstance(c, int) or (isinstance(c, Fraction) and c.denominator == 1)
            for _, c in self.obj_terms
        ) else 0

    # -- node bound ---------------------------------------------------------

    def node_bound(self, lb: list[Num], ub: list[Num]) -> Num:
        total = self.model.objective_const
        if self.maximize:
            for i, c in self.obj_terms:
                total += c * (ub[i] if c > 0 else lb[i])
        else:
            for i, c in self.obj_terms:
                total += c * (lb[i] if c > 0 else ub[i])
        return total

    # -- propagation ---------------------------------------------------------

    def propagate(self, lb: list[Num], ub: list[Num], seeds: Iterable[int]) -> bool:
        """Tighten bounds to a fixpoint; False when a row proves infeasible."""
        rows_idx = self.rows_idx
        rows_coef = self.rows_coef
        rows_lo = self.rows_lo
        rows_hi = self.rows_hi
        var_rows = self.var_rows
        queue = deque(seeds)
        in_queue = bytearray(len(rows_idx))
        for r in queue:
            in_queue[r] = 1
        steps = 0
        while queue:
            r = queue.popleft()
            in_queue[r] = 0
            steps += 1
            if steps > _PROP_STEP_CAP:
                return True  # sound early stop: bounds stay valid
            idxs = rows_idx[r]
            coefs = rows_coef[r]
            lo = rows_lo[r]
            hi = rows_hi[r]
            minact: Num = 0
            maxact: Num = 0
            for i, c in zip(idxs, coefs):
                if c > 0:
                    minact += c * lb[i]
                    maxact += c * ub[i]
                else:
                    minact += c * ub[i]
                    maxact += c * lb[i]
            if hi is not None and minact > hi:
                return False
            if lo is not None and maxact < lo:
                return False
            for i, c in zip(idxs, coefs):
                li = lb[i]
                ui = ub[i]
                if li == ui:
                    continue
                if c > 0:
                    if hi is not None:
                        new_ub = li + (hi - minact) // c
                        if new_ub < ui:
                            if new_ub < li:
                                return False
                            ub[i] = ui = new_ub
                            for r2 in var_rows[i]:
                                if not in_queue[r2]:
                                    in_queue[r2] = 1
                                    queue.append(r2)
                    if lo is not None:
                        new_lb = ui - (maxact - lo) // c
                        if new_lb > li:
                            if new_lb > ui:
                                return False
                            lb[i] = li = new_lb
                            for r2 in var_rows[i]:
                                if not in_queue[r2]:
                                    in_queue[r2] = 1
                                    queue.append(r2)
                else:
                    if hi is not None:
                        new_lb = ui - (hi - minact) // (-c)
                        if new_lb > li:
                            if new_lb > ui:
                                return False
                            lb[i] = li = new_lb
                            for r2 in var_rows[i]:
                                if not in_queue[r2]:
                                    in_queue[r2] = 1
                                    queue.append(r2)
                    if lo is not None:
                        new_ub = li + (maxact - lo) // (-c)
                        if new_ub < ui:
                            if new_ub < li:
                                return False
                            ub[i] = ui = new_ub
                            for r2 in var_rows[i]:
                                if not in_queue[r2]:
                                    in_queue[r2] = 1
                                    queue.append(r2)
        return True


def reference_solve(model: MipModel, *, node_limit: int = DEFAULT_NODE_LIMIT,
                    time_limit: float | None = None) -> MipSolution:
    """Solve a bounded all-integer model exactly.

    Depth-first search branching on the first unfixed variable in
    declaration order, exploring the objective-preferred half of its domain
    first.  Among tied optima the first one found in this fixed order is
    kept, so identical models always return identical value vectors.
    """
    if model.sense not in ("min", "max"):
        raise ValueError(f"unknown sense {model.sense!r}")
    search = _Search(model, node_limit, time_limit)
    n = search.n
    if search.fixed_fail:
        return MipSolution("infeasible", None, None, None)
    if n == 0:
        obj = model.objective_const
        return MipSolution("optimal", (), obj, obj)

    maximize = search.maximize
    lb0 = list(search.root_lb)
    ub0 = list(search.root_ub)
    if any(l > u for l, u in zip(lb0, ub0)):
        return MipSolution("infeasible", None, None, None)

    cut = search.cut_row
    best_val: Num | None = None
    best_x: tuple[Num, ...] | None = None

    def set_cutoff() -> None:
        if best_val is None:
            return
        target = best_val - model.objective_const
        if maximize:
            search.rows_lo[cut] = target + search.obj_step
        else:
            search.rows_hi[cut] = target - search.obj_step

    # stack entries: (lb, ub, seed rows, parent bound)
    root_bound = search.node_bound(lb0, ub0)
    stack: list[tuple[list[Num], list[Num], tuple[int, ...], Num]] = [
        (lb0, ub0, tuple(range(len(search.rows_idx) - 1)), root_bound)
    ]
    nodes = 0
    start = time.perf_counter()

    def timeout_solution() -> MipSolution:
        open_bounds = [entry[3] for entry in stack]
        if maximize:
            bound = max(open_bounds, default=best_val)
            if best_val is not None and bound is not None:
                bound = max(bound, best_val)
        else:
            bound = min(open_bounds, default=best_val)
            if best_val is not None and bound is not None:
                bound = min(bound, best_val)
        status = "time_limit"
        return MipSolution(status, best_x, best_val, bound)

    while stack:
        lb, ub, seeds, _ = stack.pop()
        nodes += 1
        if nodes > node_limit:
            raise SearchSpaceExceeded(
                f"reference solver exceeded its node budget of {node_limit}"
            )
        if time_limit is not None and (nodes & 63) == 0:
            if time.perf_counter() - start > time_limit:
                return timeout_solution()

        all_seeds = seeds if best_val is None else tuple(seeds) + (cut,)
        if not search.propagate(lb, ub, all_seeds):
            continue
        bound = search.node_bound(lb, ub)
        if best_val is not None:
            # ties never replace the first-found incumbent, so prune them
            if maximize and bound <= best_val:
                continue
            if not maximize and bound >= best_val:
                continue

        branch = -1
        for i in range(n):
            if lb[i] < ub[i]:
                branch = i
                break
        if branch < 0:
            val = model.objective_value(lb)
            if best_val is None or (maximize and val > best_val) or (
                not maximize and val < best_val
            ):
                bad = model.check_values(lb)
                if bad:  # propagation guarantees this never fires
                    raise AssertionError(f"reference solver produced an infeasible leaf: {bad}")
                best_val = val
                best_x = tuple(lb)
                set_cutoff()
            continue

        # assign the preferred bound first; the sibling just excludes it, so
        # chains of excluded values die quickly against the incumbent cutoff
        rows = tuple(search.var_rows[branch])
        if search.hi_first[branch]:
            rest = (list(lb), [*ub[:branch], ub[branch] - 1, *ub[branch + 1:]], rows, bound)
            take = ([*lb[:branch], ub[branch], *lb[branch + 1:]], list(ub), rows, bound)
        else:
            rest = ([*lb[:branch], lb[branch] + 1, *lb[branch + 1:]], list(ub), rows, bound)
            take = (list(lb), [*ub[:branch], lb[branch], *ub[branch + 1:]], rows, bound)
        stack.append(rest)
        stack.append(take)

    if best_val is None:
        return MipSolution("infeasible", None, None, None)
    return MipSolution("optimal", best_x, best_val, best_val)


def reference_enumerate(model: MipModel, objective_value: Num, *,
                        max_solutions: int = 200_000,
                        node_limit: int = DEFAULT_NODE_LIMIT) -> list[tuple[Num, ...]]:
    """Enumerate every feasible point whose objective equals
    ``objective_value`` exactly, in deterministic search order."""
    search = _Search(model, node_limit, None)
    n = search.n
    if search.fixed_fail:
        return []
    if n == 0:
        return [()] if model.objective_const == objective_value else []
    cut = search.cut_row
    target = objective_value - model.objective_const
    search.rows_lo[cut] = target
    search.rows_hi[cut] = target

    lb0 = list(search.root_lb)
    ub0 = list(search.root_ub)
    if any(l > u for l, u in zip(lb0, ub0)):
        return []
    out: list[tuple[Num, ...]] = []
    stack = [(lb0, ub0, tuple(range(len(search.rows_idx))))]
    nodes = 0
    while stack:
        lb, ub, seeds = stack.pop()
        nodes += 1
        if nodes > node_limit:
            raise SearchSpaceExceeded(
                f"enumeration exceeded its node budget of {node_limit}"
            )
        if not search.propagate(lb, ub, seeds):
            continue
        branch = -1
        for i in range(n):
            if lb[i] < ub[i]:
                branch = i
                break
        if branch < 0:
            if model.objective_value(lb) == objective_value and not model.check_values(lb):
                out.append(tuple(lb))
                if len(out) > max_solutions:
                    raise SearchSpaceExceeded(
                        f"more than {max_solutions} tied solutions"
                    )
            continue
        rows = tuple(search.var_rows[branch])
        stack.append(([*lb[:branch], lb[branch] + 1, *lb[branch + 1:]], list(ub), rows))
        stack.append((list(lb), [*ub[:branch], lb[branch], *ub[branch + 1:]], rows))
    return out


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------


class ReferenceBackend:
    """The bundled exact solver behind the common backend interface."""

    name = "reference"

    def __init__(self, node_limit: int = DEFAULT_NODE_LIMIT):
        self.node_limit = node_limit

    def solve(self, model: MipModel, time_limit: float | None = None,
              gap: float | None = None) -> MipSolution:
        # gap is ignored: the solver is exact
        return reference_solve(model, node_limit=self.node_limit, time_limit=time_limit)


class ScipyBackend:
    """Adapter for scipy.optimize.milp (HiGHS).

    All-integer solutions are rounded to integers and re-verified exactly
    against the model, so exact arithmetic survives the float backend.  The
    relative MIP gap defaults to zero.
    """

    name = "scipy"

    def solve(self, model: MipModel, time_limit: float | None = None,
              gap: float | None = None) -> MipSolution:
        import numpy as np
        from scipy import sparse
        from scipy.optimize import Bounds, LinearConstraint, milp

        n = len(model.variables)
        if n == 0:
            obj = model.objective_const
            return MipSolution("optimal", (), obj, obj)
        sign = -1.0 if model.sense == "max" else 1.0
        c = np.zeros(n)
        for i, coef in model.objective.items():
            c[i] = sign * float(coef)
        lb = np.array(
            [-np.inf if v.lb is None else float(v.lb) for v in model.variables]
        )
        ub = np.array(
            [np.inf if v.ub is None else float(v.ub) for v in model.variables]
        )
        integrality = np.array([1 if v.integer else 0 for v in model.variables])

        constraints = []
        if model.constraints:
            data, rows, cols = [], [], []
            c_lo = np.full(len(model.constraints), -np.inf)
            c_hi = np.full(len(model.constraints), np.inf)
            for r, row in enumerate(model.constraints):
                for i, coef in row.terms:
                    rows.append(r)
                    cols.append(i)
                    data.append(float(coef))
                if row.rel in (">=", "=="):
                    c_lo[r] = float(row.rhs)
                if row.rel in ("<=", "=="):
                    c_hi[r] = float(row.rhs)
            mat = sparse.csr_matrix((data, (rows, cols)), shape=(len(model.constraints), n))
            constraints = [LinearConstraint(mat, c_lo, c_hi)]

        options = {"mip_rel_gap": float(gap) if gap else 0.0}
        if time_limit is not None:
            options["time_limit"] = float(time_limit)
        res = milp(
            c,
            constraints=constraints,
            integrality=integrality,
            bounds=Bounds(lb, ub),
            options=options,
        )
        if res.status == 2:
            return MipSolution("infeasible", None, None, None)
        if res.status == 3:
            return MipSolution("unbounded", None, None, None)
        if res.status == 1:
            bound = None
            if res.x is not None:
                values, obj = self._exactify(model, res.x)
                dual = getattr(res, "mip_dual_bound", None)
                bound = sign * dual if dual is not None else None
                return MipSolution("time_limit", values, obj, bound)
            return MipSolution("time_limit", None, None, None)
        if res.status != 0 or res.x is None:
            raise BackendError(f"scipy backend failed: {res.message}")
        values, obj = self._exactify(model, res.x)
        return MipSolution("optimal", values, obj, obj)

    @staticmethod
    def _exactify(model: MipModel, x) -> tuple[tuple[Num, ...], Num]:
        values: list[Num] = []
        exact = True
        for i, var in enumerate(model.variables):
            if var.integer:
                r = round(float(x[i]))
                if abs(x[i] - r) > 1e-5:
                    raise BackendError(
                        f"backend returned non-integral value {x[i]} for {var.name}"
                    )
                values.append(int(r))
            else:
                values.append(float(x[i]))
                exact = False
        if exact:
            bad = model.check_values(values)
            if bad:
                raise BackendError(
                    f"backend solution violates the model after rounding: {bad[:3]}"
                )
            return tuple(values), model.objective_value(values)
        return tuple(values), model.objective_value(values)


_BACKENDS = {
    "reference": ReferenceBackend,
    "scipy": ScipyBackend,
}

ENV_BACKEND = "PTCOORD_BACKEND"


def get_backend(backend=None):
    """Resolve a backend from an object, a name, or the environment."""
    if backend is None:
        backend = os.environ.get(ENV_BACKEND, "reference")
    if isinstance(backend, str):
        try:
            return _BACKENDS[backend]()
        except KeyError:
            raise ValueError(
                f"unknown backend {backend!r}; known: {sorted(_BACKENDS)}"
            ) from None
    if hasattr(backend, "solve"):
        return backend
    raise TypeError(f"not a backend: {backend!r}")


def solve(model: MipModel, *, backend=None, time_limit: float | None = None,
          gap: float | None = None) -> MipSolution:
    """Solve through the selected backend (name, object, or environment)."""
    return get_backend(backend).solve(model, time_limit=time_limit, gap=gap)


# ---------------------------------------------------------------------------
# LP-format export (debugging aid)
# ---------------------------------------------------------------------------


def _lp_num(x: Num) -> str:
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return str(x.numerator)
        d = x.denominator
        twos = fives = 0
        while d % 2 == 0:
            d //= 2
            twos += 1
        while d % 5 == 0:
            d //= 5
            fives += 1
        if d != 1:
            raise ValueError(f"{x} has no exact decimal form for LP export")
        k = max(twos, fives)
        scaled = x.numerator * (10 ** k // x.denominator)
        digits = str(abs(scaled)).rjust(k + 1, "0")
        out = digits[:-k] + "." + digits[-k:]
        return ("-" + out) if scaled < 0 else out
    return str(x)


def _lp_terms(terms: Iterable[tuple[int, Num]], variables: Sequence[VarSpec]) -> str:
    parts = []
    for i, c in terms:
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {_lp_num(abs(c))} {variables[i].name}")
    if not parts:
        return "0"
    joined = " ".join(parts)
    return joined[2:] if joined.startswith("+ ") else joined


def write_lp(model: MipModel, path) -> None:
    """Dump the model as an LP-format text file with exact coefficients."""
    lines = []
    if model.objective_const:
        lines.append(f"\\ objective constant: {_lp_num(model.objective_const)}")
    lines.append("Maximize" if model.sense == "max" else "Minimize")
    lines.append(f" obj: {_lp_terms(sorted(model.objective.items()), model.variables)}")
    lines.append("Subject To")
    rel_map = {"<=": "<=", ">=": ">=", "==": "="}
    for row in model.constraints:
        lines.append(
            f" {row.name}: {_lp_terms(row.terms, model.variables)} "
            f"{rel_map[row.rel]} {_lp_num(row.rhs)}"
        )
    lines.append("Bounds")
    for var in model.variables:
        lo = "-inf" if var.lb is None else _lp_num(var.lb)
        hi = "+inf" if var.ub is None else _lp_num(var.ub)
        lines.append(f" {lo} <= {var.name} <= {hi}")
    generals = [v.name for v in model.variables if v.integer]
    if generals:
        lines.append("Generals")
        lines.append(" " + " ".join(generals))
    lines.append("End")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
