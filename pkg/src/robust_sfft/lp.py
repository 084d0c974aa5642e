"""Linear programming: a dense two-phase simplex and the l1 objectives built on it.

Complex data is handled by realification: every complex scalar becomes an
(re, im) pair and its modulus is replaced by the polyhedral surrogate
|re| + |im|, which keeps every objective linear.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-7
WARM_ITERATION_LIMIT = 1000
SENSES = ("<=", ">=", "=")


class LpError(RuntimeError):
    pass


@dataclass
class LpProblem:
    """minimize c.x subject to rows A x (sense) rhs and per-variable bounds.

    A bound of None means unbounded on that side; the default is x >= 0.
    """

    c: np.ndarray
    A: np.ndarray
    senses: list
    rhs: np.ndarray
    bounds: list | None = None
    names: list | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        self.senses = list(self.senses)
        if self.bounds is None:
            self.bounds = [(0.0, None)] * n
        if self.names is None:
            self.names = [f"x{j}" for j in range(n)]
        m = self.A.shape[0]
        if len(self.senses) != m or self.rhs.size != m:
            raise ValueError("constraint rows, senses and rhs disagree in length")
        if len(self.bounds) != n or len(self.names) != n:
            raise ValueError("bounds/names do not match the number of variables")
        if any(s not in SENSES for s in self.senses):
            raise ValueError(f"senses must be among {SENSES}")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A))
                and np.all(np.isfinite(self.rhs))):
            raise ValueError("LP data must be finite")

    @property
    def num_vars(self) -> int:
        return self.c.size

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    def violation(self, x) -> float:
        """Largest relative constraint or bound violation of x."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        lhs = self.A @ x
        for value, sense, b in zip(lhs, self.senses, self.rhs):
            scale = 1.0 + abs(b)
            if sense == "<=":
                worst = max(worst, (value - b) / scale)
            elif sense == ">=":
                worst = max(worst, (b - value) / scale)
            else:
                worst = max(worst, abs(value - b) / scale)
        for xj, (lo, hi) in zip(x, self.bounds):
            if lo is not None:
                worst = max(worst, (lo - xj) / (1.0 + abs(lo)))
            if hi is not None:
                worst = max(worst, (xj - hi) / (1.0 + abs(hi)))
        return worst

    def dumps(self) -> str:
        """Plain-text canonical dump: objective row, then one line per constraint."""
        fmt = lambda v: repr(float(v))  # noqa: E731
        lines = ["minimize " + " ".join(fmt(v) for v in self.c)]
        for row, sense, b in zip(self.A, self.senses, self.rhs):
            lines.append(" ".join(fmt(v) for v in row) + f" {sense} {fmt(b)}")
        for name, (lo, hi) in zip(self.names, self.bounds):
            lo_s = "-inf" if lo is None else fmt(lo)
            hi_s = "inf" if hi is None else fmt(hi)
            lines.append(f"bound {name} {lo_s} {hi_s}")
        return "\n".join(lines) + "\n"


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | iteration_limit | numerical_error
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0
    multiple_optima: bool = False

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# -- standard form ----------------------------------------------------------------


@dataclass
class _StandardForm:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    c0: float
    M: np.ndarray  # x = offset + M @ x_std[:M.shape[1]]
    offset: np.ndarray


def _to_standard(p: LpProblem) -> _StandardForm:
    n = p.num_vars
    cols = []  # (orig index, coefficient) per structural std column
    offset = np.zeros(n)
    extra_rows = []  # (std column, upper bound)
    for j, (lo, hi) in enumerate(p.bounds):
        if lo is not None:
            offset[j] = lo
            cols.append((j, 1.0))
            if hi is not None:
                if hi < lo:
                    raise ValueError(f"empty bound interval for {p.names[j]}")
                extra_rows.append((len(cols) - 1, hi - lo))
        elif hi is not None:
            offset[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    M = np.zeros((n, len(cols)))
    for k, (j, s) in enumerate(cols):
        M[j, k] = s

    A = p.A @ M
    b = p.rhs - p.A @ offset
    senses = list(p.senses)
    for k, ub in extra_rows:
        row = np.zeros(len(cols))
        row[k] = 1.0
        A = np.vstack([A, row])
        b = np.append(b, ub)
        senses.append("<=")

    n_slack = sum(s != "=" for s in senses)
    S = np.zeros((A.shape[0], n_slack))
    k = 0
    for i, s in enumerate(senses):
        if s == "<=":
            S[i, k] = 1.0
            k += 1
        elif s == ">=":
            S[i, k] = -1.0
            k += 1
    A_std = np.hstack([A, S])
    neg = b < 0
    A_std[neg] *= -1
    b = np.where(neg, -b, b)
    c_std = np.concatenate([p.c @ M, np.zeros(n_slack)])
    return _StandardForm(A_std, b, c_std, float(p.c @ offset), M, offset)


# -- tableau simplex ---------------------------------------------------------------


class _Tableau:
    def __init__(self, A, b, basis):
        self.T = np.hstack([A, b[:, None]]).astype(float)
        self.basis = list(basis)
        self.iterations = 0

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = j
        self.iterations += 1

    def run(self, d, allowed, max_iter, tol=PIVOT_TOL):
        """Bland's rule on reduced costs d (modified in place). Returns a status."""
        T = self.T
        while True:
            cand = np.nonzero((d[:allowed] < -tol))[0]
            if cand.size == 0:
                return "optimal"
            if self.iterations >= max_iter:
                return "iteration_limit"
            j = int(cand[0])
            col = T[:, j]
            pos = np.nonzero(col > tol)[0]
            if pos.size == 0:
                return "unbounded"
            ratios = T[pos, -1] / col[pos]
            best = ratios.min()
            ties = pos[ratios <= best + tol * max(1.0, abs(best))]
            r = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(r, j)
            d -= d[j] * T[r, :-1]
            d[j] = 0.0


def simplex(p: LpProblem, max_iter: int = 100_000) -> LpSolution:
    """Dense two-phase simplex with Bland's anti-cycling rule."""
    sf = _to_standard(p)
    m, n = sf.A.shape
    if m == 0:
        if np.any(sf.c < -PIVOT_TOL):
            return LpSolution("unbounded")
        x_std = np.zeros(n)
        x = sf.offset + sf.M @ x_std[: sf.M.shape[1]]
        return LpSolution("optimal", x, float(p.c @ x))

    # phase 1: artificial basis
    A1 = np.hstack([sf.A, np.eye(m)])
    tab = _Tableau(A1, sf.b, range(n, n + m))
    d = np.concatenate([-sf.A.sum(axis=0), np.zeros(m)])
    status = tab.run(d, n, max_iter)
    if status == "iteration_limit":
        return LpSolution(status, iterations=tab.iterations)
    infeas = tab.T[:, -1] @ np.array([1.0 if bj >= n else 0.0 for bj in tab.basis])
    if infeas > FEAS_TOL * (1.0 + np.abs(sf.b).max()):
        return LpSolution("infeasible", iterations=tab.iterations)

    # drive zero-level artificials out of the basis, dropping redundant rows
    keep = []
    for r in range(m):
        if tab.basis[r] >= n:
            nz = np.nonzero(np.abs(tab.T[r, :n]) > PIVOT_TOL)[0]
            if nz.size:
                tab.pivot(r, int(nz[0]))
                keep.append(r)
        else:
            keep.append(r)
    T = tab.T[keep][:, list(range(n)) + [n + m]]
    basis = [tab.basis[r] for r in keep]
    tab2 = _Tableau(T[:, :-1], T[:, -1], basis)
    tab2.iterations = tab.iterations

    # phase 2
    cB = sf.c[basis]
    d = sf.c - cB @ tab2.T[:, :-1]
    status = tab2.run(d, n, max_iter)
    if status != "optimal":
        return LpSolution(status, iterations=tab2.iterations)
    x_std = np.zeros(n)
    x_std[tab2.basis] = tab2.T[:, -1]
    x_std = np.maximum(x_std, 0.0)
    nonbasic = np.setdiff1d(np.arange(n), tab2.basis)
    multiple = bool(np.any(np.abs(d[nonbasic]) <= PIVOT_TOL)) if nonbasic.size else False
    x = sf.offset + sf.M @ x_std[: sf.M.shape[1]]
    return LpSolution("optimal", x, float(p.c @ x), tab2.iterations, multiple)


def _bounded_below(p: LpProblem) -> bool:
    """True when the objective is bounded below on the box alone."""
    for cj, (lo, hi) in zip(p.c, p.bounds):
        if (cj > 0 and lo is None) or (cj < 0 and hi is None):
            return False
    return True


def _highs_model(p: LpProblem):
    """A HiGHS instance loaded with ``p`` (rows as ranged constraints)."""
    import highspy
    from scipy.sparse import csc_matrix

    inf = highspy.kHighsInf
    senses = np.array(p.senses)
    mat = csc_matrix(p.A)
    lp = highspy.HighsLp()
    lp.num_col_ = p.num_vars
    lp.num_row_ = p.num_rows
    lp.col_cost_ = p.c
    lp.col_lower_ = np.array([-inf if lo is None else lo for lo, _ in p.bounds], dtype=float)
    lp.col_upper_ = np.array([inf if hi is None else hi for _, hi in p.bounds], dtype=float)
    lp.row_lower_ = np.where(senses == "<=", -inf, p.rhs)
    lp.row_upper_ = np.where(senses == ">=", inf, p.rhs)
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = mat.indptr
    lp.a_matrix_.index_ = mat.indices
    lp.a_matrix_.value_ = mat.data
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.passModel(lp)
    return h


def _highs_status(h) -> str:
    import highspy

    st = highspy.HighsModelStatus
    return {
        st.kOptimal: "optimal",
        st.kInfeasible: "infeasible",
        st.kUnbounded: "unbounded",
        st.kUnboundedOrInfeasible: "infeasible",
        st.kIterationLimit: "iteration_limit",
    }.get(h.getModelStatus(), "numerical_error")


def _highs(p: LpProblem) -> LpSolution:
    h = _highs_model(p)
    h.run()
    status = _highs_status(h)
    if status == "infeasible" and not _bounded_below(p):
        # presolve can report an unbounded model as infeasible; feasibility decides
        probe = _highs(LpProblem(np.zeros_like(p.c), p.A, p.senses, p.rhs, p.bounds, p.names))
        status = "unbounded" if probe.optimal else "infeasible"
    iterations = int(h.getInfo().simplex_iteration_count)
    if status != "optimal":
        return LpSolution(status, iterations=iterations)
    x = np.asarray(h.getSolution().col_value)
    return LpSolution("optimal", x, float(p.c @ x), iterations)


def solve_lp(p: LpProblem, method: str = "simplex") -> LpSolution:
    """Solve an LP. ``method`` is "simplex" (built in) or "highs" (scipy)."""
    if method == "simplex":
        sol = simplex(p)
    elif method == "highs":
        sol = _highs(p)
    else:
        raise ValueError(f"unknown LP method {method!r}")
    if sol.optimal:
        viol = p.violation(sol.x)
        if viol > FEAS_TOL:
            log.warning("LP solution violates constraints by %.3g (relative)", viol)
    return sol


# -- l1 objectives -------------------------------------------------------------------


def realify(design, y):
    """Map complex design/observations to the stacked real system.

    Returns (Phi_r, y_r, is_complex) with coefficient layout (re..., im...)
    and row layout (re rows..., im rows...).
    """
    design = np.asarray(design)
    y = np.asarray(y)
    if np.iscomplexobj(design) or np.iscomplexobj(y):
        design = design.astype(complex)
        y = y.astype(complex)
        top = np.hstack([design.real, -design.imag])
        bottom = np.hstack([design.imag, design.real])
        return np.vstack([top, bottom]), np.concatenate([y.real, y.imag]), True
    return design.astype(float), y.astype(float), False


def _unrealify(coeffs, is_complex):
    if not is_complex:
        return coeffs
    half = coeffs.size // 2
    return coeffs[:half] + 1j * coeffs[half:]


def surrogate_abs(values) -> np.ndarray:
    """|re| + |im| elementwise (equals |v| for real data)."""
    v = np.asarray(values)
    return np.abs(v.real) + np.abs(v.imag) if np.iscomplexobj(v) else np.abs(v)


@dataclass
class L1Fit:
    status: str
    coefficients: np.ndarray | None
    objective: float | None
    residual: float | None
    multiple_optima: bool = False
    diagnostics: dict = field(default_factory=dict)


def build_spectral_min_lp(design, y, budget: float) -> tuple[LpProblem, bool]:
    Phi, yr, is_complex = realify(design, y)
    m, N = Phi.shape
    # variables: p (N), q (N), u (m), v (m); Phi(p - q) + u - v = y, sum(u + v) <= budget
    A = np.zeros((m + 1, 2 * N + 2 * m))
    A[:m, :N] = Phi
    A[:m, N : 2 * N] = -Phi
    A[:m, 2 * N : 2 * N + m] = np.eye(m)
    A[:m, 2 * N + m :] = -np.eye(m)
    A[m, 2 * N :] = 1.0
    c = np.concatenate([np.ones(2 * N), np.zeros(2 * m)])
    rhs = np.append(yr, budget)
    names = (
        [f"p{j}" for j in range(N)] + [f"q{j}" for j in range(N)]
        + [f"u{i}" for i in range(m)] + [f"v{i}" for i in range(m)]
    )
    return LpProblem(c, A, ["="] * m + ["<="], rhs, names=names), is_complex


def l1_spectral_min(design, y, budget: float, method: str = "simplex") -> L1Fit:
    """Minimise the (surrogate) l1 norm of the coefficients subject to
    sum_i |g(x_i) - y_i| <= budget, over the span of the design columns."""
    if budget < 0:
        raise ValueError("budget must be non-negative")
    design = np.asarray(design)
    if design.ndim != 2 or design.shape[1] == 0:
        raise ValueError("character set must be non-empty")
    problem, is_complex = build_spectral_min_lp(design, y, budget)
    sol = solve_lp(problem, method)
    if not sol.optimal:
        return L1Fit(sol.status, None, None, None)
    N = design.shape[1] * (2 if is_complex else 1)
    coeffs = sol.x[:N] - sol.x[N : 2 * N]
    coeffs = _unrealify(coeffs, is_complex)
    residual = float(surrogate_abs(design @ coeffs - np.asarray(y)).sum())
    return L1Fit("optimal", coeffs, float(sol.objective), residual, sol.multiple_optima)


def build_regression_lp(design, y) -> tuple[LpProblem, bool]:
    Phi, yr, is_complex = realify(design, y)
    m, k = Phi.shape
    # variables: c (k, free), u (m), v (m); Phi c + u - v = y
    A = np.hstack([Phi, np.eye(m), -np.eye(m)])
    cost = np.concatenate([np.zeros(k), np.ones(2 * m)])
    bounds = [(None, None)] * k + [(0.0, None)] * (2 * m)
    names = [f"c{j}" for j in range(k)] + [f"u{i}" for i in range(m)] + [f"v{i}" for i in range(m)]
    return LpProblem(cost, A, ["="] * m, yr, bounds, names), is_complex


def l1_regression(design, y, method: str = "simplex") -> L1Fit:
    """Least-absolute-deviation fit over the span of the design columns."""
    design = np.asarray(design)
    if design.ndim != 2 or design.shape[1] == 0:
        raise ValueError("support must be non-empty")
    if design.shape[0] < design.shape[1]:
        raise ValueError("need at least as many samples as support characters")
    if method == "highs":
        return _lad_dual_highs(design, y)
    problem, is_complex = build_regression_lp(design, y)
    sol = solve_lp(problem, method)
    if not sol.optimal:
        return L1Fit(sol.status, None, None, None)
    k = design.shape[1] * (2 if is_complex else 1)
    Phi, yr = problem.A[:, :k], problem.rhs
    coeffs = _unrealify(_polish_vertex(Phi, yr, sol.x[:k]), is_complex)
    residual = float(surrogate_abs(design @ coeffs - np.asarray(y)).sum())
    return L1Fit("optimal", coeffs, float(sol.objective), residual, sol.multiple_optima)


def _polish_vertex(Phi, y, coeffs, tol: float = 1e-9):
    """Recompute a LAD vertex from the rows it interpolates.

    An optimal vertex fits some full-rank set of rows exactly; solving that
    square system directly removes the round-off the pivots accumulated (a
    constant fit then returns the sample median bit for bit).
    """
    resid = np.abs(Phi @ coeffs - y)
    rows = np.flatnonzero(resid <= tol * (1 + np.abs(y)))
    k = Phi.shape[1]
    if rows.size < k:
        return coeffs
    chosen: list[int] = []
    for i in rows[np.argsort(resid[rows], kind="stable")]:
        if np.linalg.matrix_rank(Phi[chosen + [i]]) == len(chosen) + 1:
            chosen.append(int(i))
            if len(chosen) == k:
                break
    if len(chosen) < k:
        return coeffs
    polished = np.linalg.solve(Phi[chosen], y[chosen])
    if np.abs(Phi @ polished - y).sum() <= np.abs(Phi @ coeffs - y).sum() + tol:
        return polished
    return coeffs


def _lad_dual_highs(design, y) -> L1Fit:
    """LAD through its dual: max y.w subject to Phi^T w = 0, |w_i| <= 1.

    The dual has one row per coefficient instead of one per sample, which is
    far smaller when the support is short; the coefficients are the
    multipliers of its equality rows.
    """
    Phi, yr, is_complex = realify(design, y)
    m, k = Phi.shape
    dual = LpProblem(-yr, Phi.T.copy(), ["="] * k, np.zeros(k), [(-1.0, 1.0)] * m)
    h = _highs_model(dual)
    # presolve only reshuffles this box-bounded model; skipping it is ~3x faster
    h.setOptionValue("presolve", "off")
    h.run()
    status = _highs_status(h)
    if status != "optimal":
        return L1Fit(status, None, None, None)
    coeffs = _unrealify(-np.asarray(h.getSolution().row_dual), is_complex)
    residual = float(surrogate_abs(design @ coeffs - np.asarray(y)).sum())
    return L1Fit("optimal", coeffs, residual, residual)


def build_grouped_spectral_lp(design, y) -> tuple[LpProblem, bool, float]:
    """The spectral l1 program with one equality row per distinct design row.

    Samples that share a design row phi contribute sum_i |phi.g - y_i|, a
    convex piecewise-linear function of s = phi.g. It is encoded exactly by
    writing s = v_1 - a + sum_j b_j + c over the sorted distinct observations
    v_j, with 0 <= b_j <= v_(j+1) - v_j and costs equal to the segment slopes;
    cheaper segments fill first, so the minimal cost of a split is the sum
    itself. Repeated sample points are common on small bucket domains and the
    basis shrinks from one row per sample to one per distinct point.

    Returns (problem, is_complex, offset); the last row is the budget row and
    takes the right-hand side ``budget - offset``.
    """
    Phi, yr, is_complex = realify(design, y)
    groups, inverse = np.unique(Phi, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    G, N = groups.shape
    columns: list[tuple[int, float, float, float | None]] = []  # (row, coef, cost, upper)
    bases = np.zeros(G)
    offset = 0.0
    for g in range(G):
        vals, counts = np.unique(yr[inverse == g], return_counts=True)
        r = float(counts.sum())
        bases[g] = vals[0]
        offset += float(counts @ (vals - vals[0]))
        columns.append((g, 1.0, r, None))
        below = np.cumsum(counts)[:-1]
        for width, left in zip(np.diff(vals), below):
            columns.append((g, -1.0, float(2 * left - r), float(width)))
        columns.append((g, -1.0, r, None))
    extra = len(columns)
    A = np.zeros((G + 1, 2 * N + extra))
    A[:G, :N] = groups
    A[:G, N : 2 * N] = -groups
    bounds = [(0.0, None)] * (2 * N)
    for j, (g, coef, cost, upper) in enumerate(columns):
        A[g, 2 * N + j] = coef
        A[G, 2 * N + j] = cost
        bounds.append((0.0, upper))
    c = np.concatenate([np.ones(2 * N), np.zeros(extra)])
    names = [f"p{j}" for j in range(N)] + [f"q{j}" for j in range(N)] + [f"s{j}" for j in range(extra)]
    problem = LpProblem(c, A, ["="] * G + ["<="], np.append(bases, 0.0), bounds, names)
    return problem, is_complex, offset


class BudgetSweep:
    """The spectral l1 program for one sample set, solved at many budgets.

    With the HiGHS backend the model is built once, in the grouped form of
    ``build_grouped_spectral_lp``, and each budget only moves the right-hand
    side of the budget row, so the dual simplex restarts from the previous
    basis. Visiting budgets in decreasing order keeps every restart
    primal-infeasible by a single row, which it repairs in a few pivots.
    """

    def __init__(self, design, y, method: str = "highs"):
        self.design = np.asarray(design)
        self.y = np.asarray(y)
        if self.design.ndim != 2 or self.design.shape[1] == 0:
            raise ValueError("character set must be non-empty")
        self.method = method
        self._highs = None
        if method == "highs":
            self.problem, self.is_complex, self._offset = build_grouped_spectral_lp(self.design, self.y)
            self._highs = self._build_highs()

    def _build_highs(self):
        h = _highs_model(self.problem)
        h.setOptionValue("presolve", "off")
        h.setOptionValue("simplex_iteration_limit", WARM_ITERATION_LIMIT)
        return h

    def solve(self, budget: float) -> L1Fit:
        if budget < 0:
            raise ValueError("budget must be non-negative")
        if self._highs is None:
            return l1_spectral_min(self.design, self.y, budget, self.method)
        import highspy

        h = self._highs
        h.changeRowBounds(self.problem.num_rows - 1, -highspy.kHighsInf, float(budget) - self._offset)
        h.run()
        status = h.getModelStatus()
        if status != highspy.HighsModelStatus.kOptimal:
            if status == highspy.HighsModelStatus.kInfeasible:
                return L1Fit("infeasible", None, None, None)
            # a warm start that stalls or fails is retried once from scratch;
            # a cold solve is cheaper than a long walk from a distant basis
            h.setOptionValue("simplex_iteration_limit", 2**31 - 1)
            h.clearSolver()
            h.run()
            h.setOptionValue("simplex_iteration_limit", WARM_ITERATION_LIMIT)
            status = h.getModelStatus()
            if status != highspy.HighsModelStatus.kOptimal:
                name = "infeasible" if status == highspy.HighsModelStatus.kInfeasible else "numerical_error"
                return L1Fit(name, None, None, None)
        x = np.asarray(h.getSolution().col_value)
        N = self.design.shape[1] * (2 if self.is_complex else 1)
        coeffs = _unrealify(x[:N] - x[N : 2 * N], self.is_complex)
        residual = float(surrogate_abs(self.design @ coeffs - self.y).sum())
        return L1Fit("optimal", coeffs, float(h.getInfo().objective_function_value), residual)
