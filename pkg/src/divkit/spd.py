"""SPD matrices, Mahalanobis geometry, relative spectra and the affine group.

Everything here is immutable after construction: arrays are stored
read-only and the Cholesky factor is computed once in ``__init__``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import linalg

from ._validation import NumericalError, ValidationError, as_square_matrix, as_vector

SYMMETRY_RTOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


class SpdMatrix:
    """Symmetric positive-definite matrix with a cached lower Cholesky factor.

    Input that is symmetric to within ``1e-12`` (relative to its largest
    entry) is symmetrized as ``(M + M.T) / 2``; ``symmetrized`` records
    whether that changed anything. Larger asymmetry, or a failed Cholesky
    factorization, raises.
    """

    __slots__ = ("entries", "cholesky", "symmetrized")

    def __init__(self, entries):
        if isinstance(entries, SpdMatrix):
            entries = entries.entries
        m = as_square_matrix(entries, "SPD matrix")
        scale = float(np.max(np.abs(m))) if m.size else 0.0
        asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
        if asym > SYMMETRY_RTOL * max(scale, np.finfo(float).tiny):
            raise ValidationError(f"matrix is not symmetric (max |M - M^T| = {asym:.3g})")
        sym = 0.5 * (m + m.T)
        try:
            chol = np.linalg.cholesky(sym)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("matrix is not positive definite (Cholesky failed)") from exc
        if not np.all(np.diag(chol) > 0):
            raise NumericalError("matrix is not positive definite (nonpositive pivot)")
        object.__setattr__(self, "entries", _frozen(sym))
        object.__setattr__(self, "cholesky", _frozen(chol))
        object.__setattr__(self, "symmetrized", bool(asym > 0))

    def __setattr__(self, name, value):
        raise AttributeError("SpdMatrix is immutable")

    @classmethod
    def identity(cls, dim: int) -> "SpdMatrix":
        return cls(np.eye(dim))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.cholesky))))

    def whiten(self, v: np.ndarray) -> np.ndarray:
        """Return ``L^{-1} v`` for ``v`` of shape ``(d,)`` or ``(n, d)`` (row samples)."""
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            return linalg.solve_triangular(self.cholesky, v, lower=True, check_finite=False)
        return linalg.solve_triangular(self.cholesky, v.T, lower=True, check_finite=False).T

    def quad_form(self, v: np.ndarray) -> np.ndarray | float:
        """``v^T M^{-1} v`` row-wise, via triangular solves."""
        w = self.whiten(v)
        if w.ndim == 1:
            return float(w @ w)
        return np.einsum("ij,ij->i", w, w)

    def inverse(self) -> np.ndarray:
        return linalg.cho_solve((self.cholesky, True), np.eye(self.dim), check_finite=False)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpdMatrix):
            return NotImplemented
        return self.entries.shape == other.entries.shape and bool(np.all(self.entries == other.entries))

    def __hash__(self) -> int:
        return hash(self.entries.tobytes())

    def __repr__(self) -> str:
        return f"SpdMatrix({self.entries.tolist()!r})"


def as_spd(m) -> SpdMatrix:
    return m if isinstance(m, SpdMatrix) else SpdMatrix(m)


def sqrt_spd(sigma) -> SpdMatrix:
    """Unique symmetric positive-definite square root, via ``eigh``."""
    sigma = as_spd(sigma)
    w, v = np.linalg.eigh(sigma.entries)
    return SpdMatrix((v * np.sqrt(w)) @ v.T)


def inv_sqrt_spd(sigma) -> np.ndarray:
    sigma = as_spd(sigma)
    w, v = np.linalg.eigh(sigma.entries)
    out = (v / np.sqrt(w)) @ v.T
    return 0.5 * (out + out.T)


def mahalanobis_sq(mu1, mu2, sigma) -> float:
    """Squared Mahalanobis distance ``(mu2 - mu1)^T sigma^{-1} (mu2 - mu1)``.

    Computed by a triangular solve against the Cholesky factor.
    """
    sigma = as_spd(sigma)
    mu1 = as_vector(mu1, "mu1", sigma.dim)
    mu2 = as_vector(mu2, "mu2", sigma.dim)
    return float(sigma.quad_form(mu2 - mu1))


@dataclass(frozen=True)
class Spectrum:
    """Relative spectrum: eigenvalues of ``Sigma2 Sigma1^{-1}``, sorted ascending."""

    eigenvalues: tuple[float, ...]

    def __post_init__(self):
        vals = [float(v) for v in self.eigenvalues]
        if not vals:
            raise ValidationError("spectrum must be non-empty")
        if not all(np.isfinite(v) and v > 0 for v in vals):
            raise ValidationError(f"spectrum entries must be finite and positive, got {vals}")
        object.__setattr__(self, "eigenvalues", tuple(sorted(vals)))

    @classmethod
    def of(cls, values: Iterable[float]) -> "Spectrum":
        return cls(tuple(values))

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def as_array(self) -> np.ndarray:
        return np.array(self.eigenvalues)

    def reciprocal(self) -> "Spectrum":
        return Spectrum(tuple(1.0 / v for v in self.eigenvalues))

    @property
    def log_det(self) -> float:
        return float(np.sum(np.log(self.as_array())))


def relative_spectrum(sigma1, sigma2) -> Spectrum:
    """Eigenvalues of ``Sigma2 Sigma1^{-1}``.

    Obtained from the symmetric congruence ``Sigma1^{-1/2} Sigma2 Sigma1^{-1/2}``,
    so the result is real and positive by construction.
    """
    sigma1, sigma2 = as_spd(sigma1), as_spd(sigma2)
    if sigma1.dim != sigma2.dim:
        raise ValidationError(f"dimension mismatch: {sigma1.dim} vs {sigma2.dim}")
    r = inv_sqrt_spd(sigma1)
    c = r @ sigma2.entries @ r
    w = np.linalg.eigvalsh(0.5 * (c + c.T))
    if not np.all(w > 0):
        raise NumericalError(f"relative spectrum has nonpositive entries: {w}")
    return Spectrum(tuple(w))


class LocationScaleParam:
    """A location-scale family member ``(l, P)`` with ``Sigma = P P^T``.

    Built from a covariance-like matrix, the factor defaults to the
    symmetric square root. Group actions keep a general (possibly
    non-symmetric) factor so sample paths transform exactly.
    """

    __slots__ = ("location", "scale", "factor", "factor_is_sqrt")

    def __init__(self, location, scale, factor=None):
        scale = as_spd(scale)
        loc = as_vector(location, "location", scale.dim)
        if factor is None:
            fac = sqrt_spd(scale).entries
            is_sqrt = True
        else:
            fac = as_square_matrix(factor, "factor")
            if fac.shape[0] != scale.dim:
                raise ValidationError("factor dimension does not match scale")
            is_sqrt = False
        object.__setattr__(self, "location", _frozen(loc))
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "factor", _frozen(fac))
        object.__setattr__(self, "factor_is_sqrt", is_sqrt)

    def __setattr__(self, name, value):
        raise AttributeError("LocationScaleParam is immutable")

    @classmethod
    def from_factor(cls, location, factor) -> "LocationScaleParam":
        p = as_square_matrix(factor, "factor")
        return cls(location, SpdMatrix(p @ p.T), factor=p)

    @classmethod
    def standard(cls, dim: int) -> "LocationScaleParam":
        return cls(np.zeros(dim), SpdMatrix.identity(dim))

    @property
    def dim(self) -> int:
        return self.scale.dim

    def __repr__(self) -> str:
        return f"LocationScaleParam(location={self.location.tolist()}, scale={self.scale.entries.tolist()})"


@dataclass(frozen=True, eq=False)
class AffineElement:
    """Element ``(l, A)`` of the affine group, acting by ``x -> l + A x``."""

    translation: np.ndarray
    linear: np.ndarray

    def __post_init__(self):
        a = as_square_matrix(self.linear, "linear part")
        t = as_vector(self.translation, "translation", a.shape[0])
        object.__setattr__(self, "translation", _frozen(t))
        object.__setattr__(self, "linear", _frozen(a))

    @classmethod
    def identity(cls, dim: int) -> "AffineElement":
        return cls(np.zeros(dim), np.eye(dim))

    @property
    def dim(self) -> int:
        return self.linear.shape[0]


def affine_compose(g1: AffineElement, g2: AffineElement) -> AffineElement:
    """Semidirect product ``(l1, A1).(l2, A2) = (l1 + A1 l2, A1 A2)``."""
    if g1.dim != g2.dim:
        raise ValidationError(f"dimension mismatch: {g1.dim} vs {g2.dim}")
    return AffineElement(g1.translation + g1.linear @ g2.translation, g1.linear @ g2.linear)


def affine_inverse(g: AffineElement) -> AffineElement:
    """``(l, A)^{-1} = (-A^{-1} l, A^{-1})``."""
    a = g.linear
    if np.linalg.cond(a) > 1e14:
        raise NumericalError("linear part is singular")
    a_inv = np.linalg.inv(a)
    return AffineElement(-a_inv @ g.translation, a_inv)


def act(g: AffineElement, param: LocationScaleParam) -> LocationScaleParam:
    """Push ``param`` through the group action: ``(l + A mu, A P)``."""
    if g.dim != param.dim:
        raise ValidationError(f"dimension mismatch: {g.dim} vs {param.dim}")
    return LocationScaleParam.from_factor(g.translation + g.linear @ param.location, g.linear @ param.factor)


def canonicalize_pair(p1: LocationScaleParam, p2: LocationScaleParam):
    """Map ``(p1, p2)`` to ``((0, I), (P1^{-1}(l2 - l1), P1^{-1} P2))``.

    f-divergences are invariant under this move, which sends the first
    argument to the standard density.
    """
    if p1.dim != p2.dim:
        raise ValidationError(f"dimension mismatch: {p1.dim} vs {p2.dim}")
    try:
        lu = linalg.lu_factor(p1.factor, check_finite=False)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError("scale factor of the first argument is singular") from exc
    loc = linalg.lu_solve(lu, p2.location - p1.location, check_finite=False)
    fac = linalg.lu_solve(lu, p2.factor, check_finite=False)
    return LocationScaleParam.standard(p1.dim), LocationScaleParam.from_factor(loc, fac)
