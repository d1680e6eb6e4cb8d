"""Benchmark problem definitions: residual operators over jets,
constraint term point sets, analytical and finite-difference oracles,
collocation grids, and the 1-D noisy function-fitting task.

Each problem is a list of terms; the first is always the interior
residual term, the rest enforce boundary/initial constraints or data.
A term knows its point set, the jet order its residual expression
consumes, and how to evaluate that expression on a tape so the training
loop never special-cases individual benchmarks.

Problem definitions are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tape as tp
from .tape import Tape, Var
from .jets import Jet
from .rng import Rng

__all__ = [
    "CollocationSet",
    "GeometryMask",
    "Term",
    "PdeProblem",
    "make_grid",
    "residual_reaction",
    "residual_wave",
    "residual_cdr",
    "residual_poisson_het",
    "residual_poisson_geom",
    "exact_reaction",
    "exact_wave",
    "exact_poisson_het",
    "geometry_points",
    "fdm_oracle_laplace",
    "target_function",
    "make_fit_dataset",
    "get_problem",
    "PROBLEM_NAMES",
]

PROBLEM_NAMES = ("reaction", "wave", "cdr", "poisson-het", "poisson-geom", "fit")


@dataclass(frozen=True)
class CollocationSet:
    points: np.ndarray  # (n, d)
    provenance: str

    def __len__(self):
        return len(self.points)


def make_grid(ranges, counts) -> CollocationSet:
    """Tensor-product equispaced grid including endpoints.

    Points are ordered lexicographically with the first coordinate
    varying fastest.
    """
    if len(ranges) != len(counts):
        raise ValueError("ranges and counts must have equal length")
    if any(c < 2 for c in counts):
        raise ValueError("need at least 2 points per axis")
    axes = [np.linspace(a, b, n) for (a, b), n in zip(ranges, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    cols = [m.reshape(-1, order="F") for m in mesh]
    prov = "grid " + "x".join(str(c) for c in counts) + " on " + "x".join(f"[{a},{b}]" for a, b in ranges)
    return CollocationSet(np.column_stack(cols), prov)


# ---------------------------------------------------------------------------
# Residual operators.  Inputs are (x, t) or (x, y); index 0 is the first
# coordinate.  Each returns the residual field as a tape variable.

def residual_reaction(u: Jet, rho: float = 5.0) -> Var:
    """u_t - rho*u*(1-u)."""
    fisher = u.val * tp.affine(u.val, -1.0, 1.0)
    return u.grad[1] - tp.affine(fisher, rho, 0.0)


def residual_wave(u: Jet, beta: float = 3.0) -> Var:
    """u_tt - beta*u_xx."""
    return u.d2(1, 1) - tp.affine(u.d2(0, 0), beta, 0.0)


def residual_cdr(u: Jet, beta: float = 1.0, nu: float = 3.0, rho: float = 5.0) -> Var:
    """u_t + beta*u_x - nu*u_xx - rho*u*(1-u)."""
    fisher = u.val * tp.affine(u.val, -1.0, 1.0)
    return (
        u.grad[1]
        + tp.affine(u.grad[0], beta, 0.0)
        - tp.affine(u.d2(0, 0), nu, 0.0)
        - tp.affine(fisher, rho, 0.0)
    )


def residual_poisson_het(u: Jet, x, y, a1: float = 1.0 / 15.0, a2: float = 1.0, r0: float = 0.5) -> Var:
    """a(r)*(u_xx + u_yy) - 16 r^2 with the coefficient jump at r0.

    Points with r == r0 exactly take the outer branch.
    """
    t = u.val.tape
    r2 = np.asarray(x) ** 2 + np.asarray(y) ** 2
    a = np.where(r2 < r0 * r0, a1, a2)
    lap = u.d2(0, 0) + u.d2(1, 1)
    return tp.leaf(t, a) * lap - tp.leaf(t, 16.0 * r2)


def residual_poisson_geom(u: Jet) -> Var:
    """-(u_xx + u_yy)."""
    return tp.affine(u.d2(0, 0) + u.d2(1, 1), -1.0, 0.0)


# ---------------------------------------------------------------------------
# Analytical oracles.

def _reaction_h(x):
    return np.exp(-((np.asarray(x) - math.pi) ** 2) / (2.0 * (math.pi / 4.0) ** 2))


def exact_reaction(x, t, rho: float = 5.0):
    h = _reaction_h(x)
    e = h * np.exp(rho * np.asarray(t))
    return e / (e + 1.0 - h)


def exact_wave(x, t, beta: float = 3.0):
    """The benchmark's published closed form (see problem notes on beta)."""
    x = np.asarray(x)
    t = np.asarray(t)
    return np.sin(math.pi * x) * np.cos(2.0 * math.pi * t) + 0.5 * np.sin(beta * math.pi * x) * np.cos(
        2.0 * beta * math.pi * t
    )


def exact_poisson_het(x, y, a1: float = 1.0 / 15.0, a2: float = 1.0, r0: float = 0.5):
    r = np.hypot(np.asarray(x), np.asarray(y))
    inner = r ** 4 / a1
    outer = r ** 4 / a2 + r0 ** 4 * (1.0 / a1 - 1.0 / a2)
    return np.where(r < r0, inner, outer)


# ---------------------------------------------------------------------------
# Terms.

class Term:
    """One weighted loss component: a named point set plus the rule that
    turns model output jets at those points into a residual vector."""

    def __init__(self, name: str, kind: str, points: np.ndarray, order: int):
        self.name = name
        self.kind = kind
        self.points = np.asarray(points, dtype=np.float64)
        self.order = order

    @property
    def size(self) -> int:
        return len(self.points)

    def evaluate(self, tape: Tape, model, bound) -> Var:
        raise NotImplementedError


class ResidualTerm(Term):
    def __init__(self, points, operator, order: int, name: str = "res"):
        super().__init__(name, "residual", points, order)
        self.operator = operator

    def evaluate(self, tape, model, bound):
        u = _scalar_output(model.forward(tape, self.points, order=self.order, bound=bound))
        return self.operator(u, self.points)


class DirichletTerm(Term):
    def __init__(self, name, kind, points, targets):
        super().__init__(name, kind, points, order=0)
        self.targets = np.asarray(targets, dtype=np.float64)

    def evaluate(self, tape, model, bound):
        u = _scalar_output(model.forward(tape, self.points, order=0, bound=bound))
        return u.val - tp.leaf(tape, self.targets)


class PeriodicTerm(Term):
    """Penalizes u(left_j) - u(right_j) over paired boundary points."""

    def __init__(self, name, left, right):
        super().__init__(name, "bc", left, order=0)
        self.right = np.asarray(right, dtype=np.float64)

    def evaluate(self, tape, model, bound):
        ul = _scalar_output(model.forward(tape, self.points, order=0, bound=bound))
        ur = _scalar_output(model.forward(tape, self.right, order=0, bound=bound))
        return ul.val - ur.val


class InitialTerm(Term):
    """Value and time-derivative conditions at t = 0, stacked into one
    residual vector (value entries first)."""

    def __init__(self, name, points, targets, velocity: bool = False):
        super().__init__(name, "ic", points, order=1 if velocity else 0)
        self.targets = np.asarray(targets, dtype=np.float64)
        self.velocity = velocity

    @property
    def size(self):
        return len(self.points) * (2 if self.velocity else 1)

    def evaluate(self, tape, model, bound):
        u = _scalar_output(model.forward(tape, self.points, order=self.order, bound=bound))
        rho = u.val - tp.leaf(tape, self.targets)
        if self.velocity:
            rho = tp.concat2(rho, u.grad[1], axis=0)
        return rho


class FitTerm(Term):
    """Data mismatch u(x_j) - y_j for the function-fitting task."""

    def __init__(self, points, targets):
        super().__init__("fit", "residual", points, order=0)
        self.targets = np.asarray(targets, dtype=np.float64)

    def evaluate(self, tape, model, bound):
        u = _scalar_output(model.forward(tape, self.points, order=0, bound=bound))
        return u.val - tp.leaf(tape, self.targets)


def _scalar_output(y: Jet) -> Jet:
    from .model import output_coordinate

    return output_coordinate(y, 0)


# ---------------------------------------------------------------------------
# Problem container.

@dataclass
class PdeProblem:
    name: str
    dim: int
    terms: list
    exact: object = None  # callable over coordinate columns, or None
    _eval_points: np.ndarray = None
    _eval_values: np.ndarray = None
    _eval_builder: object = None
    notes: str = ""

    def __post_init__(self):
        if not self.terms or self.terms[0].kind != "residual":
            raise ValueError("a problem needs its residual term first")
        if any(t.size < 1 for t in self.terms):
            raise ValueError("every term needs at least one point")

    @property
    def residual_term(self):
        return self.terms[0]

    @property
    def data_terms(self):
        return self.terms[1:]

    def term_sizes(self) -> dict:
        return {t.name: t.size for t in self.terms}

    def has_oracle(self) -> bool:
        return self.exact is not None or self._eval_builder is not None

    def eval_set(self):
        """(points, reference values) for metrics, built lazily."""
        if self._eval_points is None:
            if self._eval_builder is None:
                raise ValueError(f"problem {self.name!r} has no reference oracle")
            self._eval_points, self._eval_values = self._eval_builder()
        return self._eval_points, self._eval_values


# ---------------------------------------------------------------------------
# Geometry handling for the four-hole Poisson problem.

@dataclass(frozen=True)
class GeometryMask:
    bounds: tuple = (-0.5, 0.5, -0.5, 0.5)  # x0, x1, y0, y1
    circles: tuple = (
        (0.3, 0.3, 0.1),
        (-0.3, 0.3, 0.1),
        (0.3, -0.3, 0.1),
        (-0.3, -0.3, 0.1),
    )

    def __post_init__(self):
        x0, x1, y0, y1 = self.bounds
        for cx, cy, r in self.circles:
            if not (x0 <= cx - r and cx + r <= x1 and y0 <= cy - r and cy + r <= y1):
                raise ValueError(f"circle ({cx},{cy},{r}) leaves the rectangle")

    def inside_any_circle(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        mask = np.zeros(len(pts), dtype=bool)
        for cx, cy, r in self.circles:
            mask |= (pts[:, 0] - cx) ** 2 + (pts[:, 1] - cy) ** 2 <= r * r
        return mask


def geometry_points(mask: GeometryMask, grid_counts=(101, 101), edge_samples: int = 101, circle_samples: int = 64):
    """Interior/boundary point sets for the masked rectangle.

    Interior: the tensor grid with circle interiors removed.  Outer
    boundary: each rectangle edge sampled uniformly (target one).
    Circle boundaries: uniform in angle (target zero).
    """
    x0, x1, y0, y1 = mask.bounds
    grid = make_grid([(x0, x1), (y0, y1)], grid_counts)
    keep = ~mask.inside_any_circle(grid.points)
    interior = grid.points[keep]

    xs = np.linspace(x0, x1, edge_samples)
    ys = np.linspace(y0, y1, edge_samples)
    edges = np.concatenate(
        [
            np.column_stack([xs, np.full_like(xs, y0)]),
            np.column_stack([xs, np.full_like(xs, y1)]),
            np.column_stack([np.full_like(ys, x0), ys]),
            np.column_stack([np.full_like(ys, x1), ys]),
        ]
    )

    theta = 2.0 * math.pi * np.arange(circle_samples) / circle_samples
    rims = np.concatenate(
        [np.column_stack([cx + r * np.cos(theta), cy + r * np.sin(theta)]) for cx, cy, r in mask.circles]
    )
    return {"interior": interior, "outer": edges, "circles": rims}


class FdmConvergenceError(RuntimeError):
    pass


def fdm_oracle_laplace(
    mask: GeometryMask,
    n: int = 101,
    tol: float = 1e-10,
    outer_value: float = 1.0,
    circle_value: float = 0.0,
    max_sweeps: int = 10**6,
):
    """Five-point Laplace solve on the masked rectangle by Gauss-Seidel.

    Dirichlet data: rectangle edge cells take ``outer_value``, cells
    inside any circle take ``circle_value``.  Sweeps run red-black
    (a reordering of Gauss-Seidel that vectorizes) until the largest
    update falls below ``tol``.  Returns (points, values, field) where
    points/values cover the non-Dirichlet cells, the reference set for
    error metrics.
    """
    if n < 3:
        raise ValueError("grid must be at least 3x3")
    x0, x1, y0, y1 = mask.bounds
    xs = np.linspace(x0, x1, n)
    ys = np.linspace(y0, y1, n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")

    fixed = np.zeros((n, n), dtype=bool)
    fixed[0, :] = fixed[-1, :] = fixed[:, 0] = fixed[:, -1] = True
    f = np.full((n, n), outer_value * 1.0)
    f[~fixed] = 0.0
    pts = np.column_stack([X.reshape(-1), Y.reshape(-1)])
    in_circle = mask.inside_any_circle(pts).reshape(n, n)
    f[in_circle] = circle_value
    fixed |= in_circle

    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    inner = (slice(1, -1), slice(1, -1))
    colors = [(((ii + jj) % 2 == c)[inner] & ~fixed[inner]) for c in (0, 1)]

    for sweep in range(max_sweeps):
        delta = 0.0
        for colmask in colors:
            nb = 0.25 * (f[:-2, 1:-1] + f[2:, 1:-1] + f[1:-1, :-2] + f[1:-1, 2:])
            old = f[inner]
            upd = np.where(colmask, nb, old)
            d = np.abs(upd - old).max() if colmask.any() else 0.0
            delta = max(delta, float(d))
            f[inner] = upd
        if delta < tol:
            break
    else:
        raise FdmConvergenceError(f"no convergence to {tol} within {max_sweeps} sweeps")

    free = ~fixed
    return pts[free.reshape(-1)], f[free], f


# ---------------------------------------------------------------------------
# Function-fitting task.

def target_function(x):
    """Three-branch piecewise 1-D target on [0, 2]."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0.0) or np.any(x > 2.0):
        raise ValueError("target function is defined on [0, 2]")
    out = np.empty_like(x)
    lo = x < 0.5
    mid = (x >= 0.5) & (x < 1.5)
    hi = x >= 1.5
    xl = x[lo]
    out[lo] = np.sin(25 * math.pi * xl) + xl**2 + 0.5 * np.cos(30 * math.pi * xl) + 0.2 * xl**3
    xm = x[mid]
    out[mid] = (
        0.5 * xm * np.exp(-xm)
        + np.abs(np.sin(5 * math.pi * xm))
        + 0.3 * xm * np.cos(7 * math.pi * xm)
        + 0.1 * np.exp(-(xm**2))
    )
    xh = x[hi]
    out[hi] = (
        np.log(xh - 1.0) / math.log(2.0)
        - np.cos(2 * math.pi * xh)
        + 0.2 * np.sin(8 * math.pi * xh)
        + 0.1 * np.log(xh + 1.0) / math.log(3.0)
    )
    return out


def make_fit_dataset(rng: Rng, n_train: int = 500, n_test: int = 1000, noise_std: float = 0.1):
    """Noisy training samples and a noise-free test set on [0, 2]."""
    x_train = np.array([rng.uniform(0.0, 2.0) for _ in range(n_train)])
    noise = np.array([rng.normal(0.0, noise_std) for _ in range(n_train)])
    y_train = target_function(x_train) + noise
    x_test = np.array([rng.uniform(0.0, 2.0) for _ in range(n_test)])
    y_test = target_function(x_test)
    return (x_train.reshape(-1, 1), y_train), (x_test.reshape(-1, 1), y_test)


# ---------------------------------------------------------------------------
# Problem factories.

EVAL_GRID_N = 101


def _problem_reaction(grid_n: int, rho: float = 5.0) -> PdeProblem:
    xr, tr = (0.0, 2.0 * math.pi), (0.0, 1.0)
    grid = make_grid([xr, tr], [grid_n, grid_n])
    xs = np.linspace(*xr, grid_n)
    ts = np.linspace(*tr, grid_n)
    ic_pts = np.column_stack([xs, np.zeros_like(xs)])
    left = np.column_stack([np.zeros_like(ts), ts])
    right = np.column_stack([np.full_like(ts, xr[1]), ts])
    exact = lambda p: exact_reaction(p[:, 0], p[:, 1], rho)
    eval_pts = make_grid([xr, tr], [EVAL_GRID_N, EVAL_GRID_N]).points
    return PdeProblem(
        name="reaction",
        dim=2,
        terms=[
            ResidualTerm(grid.points, lambda u, p: residual_reaction(u, rho), order=1),
            InitialTerm("ic", ic_pts, _reaction_h(xs)),
            PeriodicTerm("bc", left, right),
        ],
        exact=exact,
        _eval_points=eval_pts,
        _eval_values=exact(eval_pts),
    )


def _problem_wave(grid_n: int, beta: float = 3.0) -> PdeProblem:
    xr, tr = (0.0, 1.0), (0.0, 1.0)
    grid = make_grid([xr, tr], [grid_n, grid_n])
    xs = np.linspace(*xr, grid_n)
    ts = np.linspace(*tr, grid_n)
    ic_pts = np.column_stack([xs, np.zeros_like(xs)])
    ic_targets = np.sin(math.pi * xs) + 0.5 * np.sin(beta * math.pi * xs)
    bc_pts = np.concatenate(
        [np.column_stack([np.zeros_like(ts), ts]), np.column_stack([np.ones_like(ts), ts])]
    )
    exact = lambda p: exact_wave(p[:, 0], p[:, 1], beta)
    eval_pts = make_grid([xr, tr], [EVAL_GRID_N, EVAL_GRID_N]).points
    return PdeProblem(
        name="wave",
        dim=2,
        terms=[
            ResidualTerm(grid.points, lambda u, p: residual_wave(u, beta), order=2),
            InitialTerm("ic", ic_pts, ic_targets, velocity=True),
            DirichletTerm("bc", "bc", bc_pts, np.zeros(len(bc_pts))),
        ],
        exact=exact,
        _eval_points=eval_pts,
        _eval_values=exact(eval_pts),
        notes=(
            "published closed form pairs sin(pi x) with cos(2 pi t); it solves the "
            "wave equation with speed 4, not the training speed beta=3 - kept verbatim"
        ),
    )


def _problem_cdr(grid_n: int) -> PdeProblem:
    xr, tr = (0.0, 2.0 * math.pi), (0.0, 1.0)
    grid = make_grid([xr, tr], [grid_n, grid_n])
    xs = np.linspace(*xr, grid_n)
    ts = np.linspace(*tr, grid_n)
    ic_pts = np.column_stack([xs, np.zeros_like(xs)])
    left = np.column_stack([np.zeros_like(ts), ts])
    right = np.column_stack([np.full_like(ts, xr[1]), ts])
    return PdeProblem(
        name="cdr",
        dim=2,
        terms=[
            ResidualTerm(grid.points, lambda u, p: residual_cdr(u), order=2),
            InitialTerm("ic", ic_pts, _reaction_h(xs)),
            PeriodicTerm("bc", left, right),
        ],
        exact=None,
    )


def _problem_poisson_het(grid_n: int) -> PdeProblem:
    dom = (-1.0, 1.0)
    grid = make_grid([dom, dom], [grid_n, grid_n])
    s = np.linspace(*dom, grid_n)
    edge_pts = np.concatenate(
        [
            np.column_stack([s, np.full_like(s, dom[0])]),
            np.column_stack([s, np.full_like(s, dom[1])]),
            np.column_stack([np.full_like(s, dom[0]), s]),
            np.column_stack([np.full_like(s, dom[1]), s]),
        ]
    )
    exact = lambda p: exact_poisson_het(p[:, 0], p[:, 1])
    eval_pts = make_grid([dom, dom], [EVAL_GRID_N, EVAL_GRID_N]).points
    return PdeProblem(
        name="poisson-het",
        dim=2,
        terms=[
            ResidualTerm(grid.points, lambda u, p: residual_poisson_het(u, p[:, 0], p[:, 1]), order=2),
            DirichletTerm("bc", "bc", edge_pts, exact(edge_pts)),
        ],
        exact=exact,
        _eval_points=eval_pts,
        _eval_values=exact(eval_pts),
    )


def _problem_poisson_geom(grid_n: int) -> PdeProblem:
    mask = GeometryMask()
    sets = geometry_points(mask, grid_counts=(grid_n, grid_n))

    def build_reference():
        pts, vals, _ = fdm_oracle_laplace(mask)
        return pts, vals

    return PdeProblem(
        name="poisson-geom",
        dim=2,
        terms=[
            ResidualTerm(sets["interior"], lambda u, p: residual_poisson_geom(u), order=2),
            DirichletTerm("bc_outer", "bc", sets["outer"], np.ones(len(sets["outer"]))),
            DirichletTerm("bc_circles", "bc", sets["circles"], np.zeros(len(sets["circles"]))),
        ],
        exact=None,
        _eval_builder=build_reference,
    )


def _problem_fit(seed: int) -> PdeProblem:
    (x_train, y_train), (x_test, y_test) = make_fit_dataset(Rng(seed))
    return PdeProblem(
        name="fit",
        dim=1,
        terms=[FitTerm(x_train, y_train)],
        exact=None,
        _eval_points=x_test,
        _eval_values=y_test,
    )


def get_problem(name: str, grid_n: int = 32, seed: int = 0) -> PdeProblem:
    """Problem lookup by name; ``grid_n`` sets the training resolution."""
    if name == "reaction":
        return _problem_reaction(grid_n)
    if name == "wave":
        return _problem_wave(grid_n)
    if name == "cdr":
        return _problem_cdr(grid_n)
    if name == "poisson-het":
        return _problem_poisson_het(grid_n)
    if name == "poisson-geom":
        return _problem_poisson_geom(grid_n)
    if name == "fit":
        return _problem_fit(seed)
    raise ValueError(f"unknown problem {name!r}; choose from {', '.join(PROBLEM_NAMES)}")
