"""Tabulate ``h_f`` where no closed form exists and fit ``a u / (u + b)`` surrogates."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_is_fitted

from ._validation import DivkitError, NumericalError, ValidationError, check_count
from .densities import RadialDensity, normal
from .estimators import (
    DivergenceEstimate,
    mc_estimate,
    quad_location_1d,
)
from .generators import FGenerator
from .spd import LocationScaleParam, SpdMatrix

TABLE_HEADER = ("u", "h", "std_error", "method")
DETERMINISTIC = ("quad_1d", "quad_nd", "closed")


class TabulationError(DivkitError):
    def __init__(self, u: float, cause: Exception):
        super().__init__(f"tabulation failed at u={u!r}: {cause}")
        self.u = u


@dataclass(frozen=True)
class HfRow:
    u: float
    h: float
    std_error: float
    method: str


@dataclass(frozen=True)
class HfTable:
    """Rows ``(u, h, std_error, method)`` with strictly increasing ``u``."""

    generator_name: str
    family: str
    rows: tuple[HfRow, ...]

    def __post_init__(self):
        rows = tuple(self.rows)
        object.__setattr__(self, "rows", rows)
        us = [r.u for r in rows]
        if any(b <= a for a, b in zip(us, us[1:])):
            raise ValidationError("table u column must be strictly increasing")
        for r in rows:
            if not (math.isfinite(r.h) and math.isfinite(r.std_error) and r.std_error >= 0):
                raise ValidationError(f"row at u={r.u} has invalid value or error")
            if r.method in DETERMINISTIC and r.std_error != 0:
                raise ValidationError(f"deterministic row at u={r.u} has nonzero std_error")

    @property
    def u(self) -> np.ndarray:
        return np.array([r.u for r in self.rows])

    @property
    def h(self) -> np.ndarray:
        return np.array([r.h for r in self.rows])

    @property
    def std_error(self) -> np.ndarray:
        return np.array([r.std_error for r in self.rows])

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for r in self.rows:
            w.writerow([repr(float(r.u)), repr(float(r.h)), repr(float(r.std_error)), r.method])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, generator_name: str = "unknown", family: str = "unknown") -> "HfTable":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError("empty table file") from None
        if tuple(h.strip() for h in header) != TABLE_HEADER:
            raise ValidationError(f"table header must be {','.join(TABLE_HEADER)}, got {','.join(header)}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != 4:
                raise ValidationError(f"line {lineno}: expected 4 fields, got {len(rec)}")
            try:
                rows.append(HfRow(float(rec[0]), float(rec[1]), float(rec[2]), rec[3].strip()))
            except ValueError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from None
        return cls(generator_name, family, tuple(rows))


def _location_pair(dim: int, t: float):
    eye = SpdMatrix.identity(dim)
    loc = np.zeros(dim)
    loc[0] = t
    return LocationScaleParam(np.zeros(dim), eye), LocationScaleParam(loc, eye)


def _tabulate_one(gen, rd, u, method, n, seed, workers) -> DivergenceEstimate:
    t = math.sqrt(u)
    if method == "quad":
        if rd.family != "normal" and rd.dim != 1:
            raise ValidationError("quadrature tables for non-normal families need dim = 1")
        return quad_location_1d(gen, rd, t)
    if rd.family == "normal":
        p1, p2 = _location_pair(1, t)
        return mc_estimate(gen, normal(1), p1, p2, n, seed, workers, method="mc_reduced")
    p1, p2 = _location_pair(rd.dim, t)
    return mc_estimate(gen, rd, p1, p2, n, seed, workers)


def tabulate_hf(gen: FGenerator, rd: RadialDensity, grid: Sequence[float], method: str = "quad",
                n: int | None = None, seed: int = 0x5EED, workers: int = 1) -> HfTable:
    """One row per grid point: ``I_f`` between the family members at ``0`` and ``sqrt(u) e_1``.

    Normal tables use the univariate reduction. ``method`` is ``"quad"`` or
    ``"mc"`` (then ``n`` is required); every Monte Carlo row reuses ``seed``.
    """
    grid = [float(u) for u in grid]
    if any(not math.isfinite(u) or u < 0 for u in grid):
        raise ValidationError("grid values must be finite and nonnegative")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValidationError("grid must be strictly increasing")
    if method not in ("quad", "mc"):
        raise ValidationError(f"unknown tabulation method {method!r}")
    if method == "mc":
        n = check_count(n, "n", 100)
    rows = []
    for u in grid:
        if u == 0.0:
            rows.append(HfRow(0.0, 0.0, 0.0, "quad_1d" if method == "quad" else "mc"))
            continue
        try:
            est = _tabulate_one(gen, rd, u, method, n, seed, workers)
        except ValidationError:
            raise
        except DivkitError as exc:
            raise TabulationError(u, exc) from exc
        rows.append(HfRow(u, est.value, est.std_error, est.method))
    return HfTable(gen.name, rd.label, tuple(rows))


# -- rational surrogate ------------------------------------------------------


def _as_u(X) -> np.ndarray:
    u = np.asarray(X, dtype=float)
    if u.ndim == 2:
        if u.shape[1] != 1:
            raise ValidationError(f"expected a single feature column, got shape {u.shape}")
        u = u[:, 0]
    if u.ndim != 1:
        raise ValidationError(f"expected 1-D input, got shape {u.shape}")
    return u


class RationalSurrogate(RegressorMixin, BaseEstimator):
    """Least-squares fit of ``a u / (u + b)`` in relative error.

    Minimises ``sum(((a u_i/(u_i + b) - h_i) / h_i)^2)`` over ``a, b > 0`` with
    Gauss-Newton steps and Levenberg-Marquardt damping. Starts from
    ``a = max(h)``, ``b = median(u)`` unless given. Stops when the relative
    step drops below ``tol`` or after ``max_iter`` iterations.
    """

    def __init__(self, max_iter: int = 200, tol: float = 1e-10, a_init: float | None = None,
                 b_init: float | None = None):
        self.max_iter = max_iter
        self.tol = tol
        self.a_init = a_init
        self.b_init = b_init

    @staticmethod
    def _residuals(theta, u, h):
        a, b = theta
        return (a * u / (u + b)) / h - 1.0

    def fit(self, X, y):
        u = _as_u(X)
        h = np.asarray(y, dtype=float).ravel()
        if u.shape != h.shape:
            raise ValidationError("u and h must have the same length")
        if u.size < 4:
            raise ValidationError("need at least 4 rows to fit")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(h))):
            raise ValidationError("non-finite table values")
        if np.any(u <= 0):
            raise ValidationError("fit needs u > 0 in every row")
        if np.any(h == 0):
            raise ValidationError("relative least squares needs h != 0 in every row")
        if np.all(h == h[0]):
            raise ValidationError("degenerate table: all h are equal")

        theta = np.array([
            float(self.a_init) if self.a_init is not None else float(np.max(h)),
            float(self.b_init) if self.b_init is not None else float(np.median(u)),
        ])
        if np.any(theta <= 0):
            raise ValidationError("initial a and b must be positive")
        r = self._residuals(theta, u, h)
        cost = float(r @ r)
        lam = 1e-3
        converged = False
        it = 0
        while it < self.max_iter:
            it += 1
            a, b = theta
            jac = np.column_stack([u / (u + b) / h, -a * u / (u + b) ** 2 / h])
            jtj = jac.T @ jac
            grad = jac.T @ r
            improved = False
            while lam < 1e16:
                lhs = jtj + lam * np.diag(np.diag(jtj))
                try:
                    step = np.linalg.solve(lhs, -grad)
                except np.linalg.LinAlgError:
                    lam *= 10.0
                    continue
                trial = theta + step
                if np.all(trial > 0):
                    r_trial = self._residuals(trial, u, h)
                    cost_trial = float(r_trial @ r_trial)
                    if np.isfinite(cost_trial) and cost_trial <= cost:
                        improved = True
                        break
                lam *= 10.0
            if not improved:
                # no descent direction left at working precision
                converged = True
                break
            rel_step = float(np.max(np.abs(step) / np.abs(theta)))
            theta, r, cost = trial, r_trial, cost_trial
            lam = max(lam / 10.0, 1e-15)
            if rel_step < self.tol:
                converged = True
                break
        if not np.all(np.isfinite(theta)):
            raise NumericalError("rational fit produced non-finite parameters")
        if not converged:
            warnings.warn(f"rational fit stopped after {self.max_iter} iterations without meeting tol={self.tol}",
                          ConvergenceWarning, stacklevel=2)
        self.a_, self.b_ = float(theta[0]), float(theta[1])
        self.n_iter_ = it
        self.converged_ = converged
        self.fit_domain_ = (float(u.min()), float(u.max()))
        self.max_rel_error_ = float(np.max(np.abs(self._residuals(theta, u, h))))
        return self

    def predict(self, X):
        check_is_fitted(self, ("a_", "b_"))
        u = _as_u(X)
        return self.a_ * u / (u + self.b_)


@dataclass(frozen=True)
class RationalFit:
    a: float
    b: float
    fit_domain: tuple[float, float]
    max_rel_error: float

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return self.a * u / (u + self.b)

    def rel_errors(self, table: HfTable) -> np.ndarray:
        return self(table.u) / table.h - 1.0

    def format(self) -> str:
        lo, hi = self.fit_domain
        return f"a={self.a!r} b={self.b!r} max_rel_error={self.max_rel_error!r} domain=[{lo!r},{hi!r}]"

    def __str__(self) -> str:
        return self.format()


def fit_rational(table: HfTable, **kwargs) -> RationalFit:
    """Fit ``a u / (u + b)`` to a table; see :class:`RationalSurrogate`."""
    if len(table) < 4:
        raise ValidationError("need at least 4 rows to fit")
    est = RationalSurrogate(**kwargs).fit(table.u, table.h)
    return RationalFit(est.a_, est.b_, est.fit_domain_, est.max_rel_error_)


# -- monotonicity ------------------------------------------------------------


@dataclass(frozen=True)
class MonotonicityReport:
    """``first_violation`` is the index of the later row of the first failing pair."""

    passed: bool
    first_violation: int | None
    slack: float


def monotonicity_report(table: HfTable) -> MonotonicityReport:
    """Check ``h`` increases along the table.

    Deterministic tables need strict increase; Monte Carlo rows may dip by up
    to three combined standard errors, ``h[i+1] > h[i] - 3 (se[i] + se[i+1])``.
    """
    if len(table) < 2:
        raise ValidationError("need at least 2 rows")
    h, se = table.h, table.std_error
    margins = np.diff(h) + 3.0 * (se[:-1] + se[1:])
    bad = np.flatnonzero(margins <= 0)
    first = int(bad[0]) + 1 if bad.size else None
    return MonotonicityReport(first is None, first, float(np.min(margins)))
