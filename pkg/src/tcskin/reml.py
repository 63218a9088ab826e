"""Variance components and heritability under Var[y] = A*sigma_g^2 + I*sigma_e^2.

The restricted likelihood is parameterized by h2 = sigma_g^2 / (sigma_g^2 +
sigma_e^2) with the intercept and the total variance profiled out analytically,
so the fit is a one-dimensional maximization.  A single symmetric
eigendecomposition of A makes each h2 evaluation O(N).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .grm import RelationshipMatrix
from .smoothing import smooth_covariance
from .treelet import TreeletDecomposition

H2_EPS = 1e-6
MIN_EIGENVALUE = 1e-12


@dataclass
class PhenotypeVector:
    y: np.ndarray
    sample_ids: list[str]
    covariate_adjusted: bool = False

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        if len(self.sample_ids) != self.y.size:
            raise ValueError("sample_ids length does not match phenotype length")
        if not np.isfinite(self.y).all():
            raise ValueError("phenotype contains non-finite values")


@dataclass
class VarianceComponents:
    sigma_g2: float
    sigma_e2: float
    h2: float
    mu_hat: float
    reml_loglik: float
    converged: bool


class _RemlProblem:
    """Cached eigendecomposition of A plus the projected data vectors."""

    def __init__(self, y: PhenotypeVector, a: RelationshipMatrix):
        if list(y.sample_ids) != list(a.sample_ids):
            raise ValueError("phenotype and relationship matrix ids do not match")
        self.n = a.n
        self.d, u = np.linalg.eigh(a.values)
        self.yt = u.T @ y.y
        self.ot = u.T @ np.ones(self.n)

    def loglik(self, h2: float) -> float:
        v = h2 * self.d + (1.0 - h2)
        if v.min() < MIN_EIGENVALUE:
            raise np.linalg.LinAlgError(
                f"h2={h2:.6g} makes h2*A + (1-h2)*I numerically singular; "
                "consider psd_repair or a smaller h2 upper bound"
            )
        return _profiled_reml(self.n, np.log(v).sum(),
                              float(np.sum(self.yt ** 2 / v)),
                              float(np.sum(self.ot ** 2 / v)),
                              float(np.sum(self.yt * self.ot / v)))[0]

    def estimates(self, h2: float):
        v = h2 * self.d + (1.0 - h2)
        return _profiled_reml(self.n, np.log(v).sum(),
                              float(np.sum(self.yt ** 2 / v)),
                              float(np.sum(self.ot ** 2 / v)),
                              float(np.sum(self.yt * self.ot / v)))

    def h2_upper_bound(self) -> float:
        """Largest h2 keeping all eigenvalues of V above the singularity floor."""
        hmax = 1.0 - H2_EPS
        dmin = self.d.min()
        if dmin < 1.0:
            # v_min(h2) = h2*dmin + 1 - h2 decreases in h2; solve for the floor
            limit = (1.0 - 2.0 * MIN_EIGENVALUE) / (1.0 - dmin)
            if limit < hmax:
                warnings.warn(
                    "indefinite relationship matrix: h2 search truncated at "
                    f"{limit:.4f} to keep the covariance nonsingular")
                hmax = max(limit, 0.0)
        return hmax


def _profiled_reml(n, logdet_v, yvy, ovo, ovy):
    """REML log-likelihood with intercept and total variance profiled out."""
    mu = ovy / ovo
    rss = max(yvy - ovy * ovy / ovo, 1e-300)
    sigma2 = rss / (n - 1)
    ll = -0.5 * ((n - 1) * (math.log(2.0 * math.pi * sigma2) + 1.0)
                 + logdet_v + math.log(ovo))
    return ll, mu, sigma2


def reml_loglik(y: PhenotypeVector, a: RelationshipMatrix, h2: float) -> float:
    """Restricted log-likelihood of y under N(1*mu, sigma2*(h2*A + (1-h2)*I))."""
    if not 0.0 <= h2 < 1.0:
        raise ValueError("h2 must lie in [0, 1)")
    return _RemlProblem(y, a).loglik(h2)


def reml_loglik_dense(y: PhenotypeVector, a: RelationshipMatrix, h2: float) -> float:
    """Independent dense-path evaluation (explicit determinant and solves)."""
    n = a.n
    v = h2 * a.values + (1.0 - h2) * np.eye(n)
    sign, logdet = np.linalg.slogdet(v)
    if sign <= 0:
        raise np.linalg.LinAlgError("covariance not positive definite")
    ones = np.ones(n)
    vy = np.linalg.solve(v, y.y)
    vo = np.linalg.solve(v, ones)
    return _profiled_reml(n, logdet, float(y.y @ vy), float(ones @ vo),
                          float(ones @ vy))[0]


def _golden_section(f, lo, hi, tol):
    """Maximize a unimodal function on [lo, hi]; returns (x, f(x), width)."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
    x = (a + b) / 2.0
    return x, f(x), b - a


def fit_variance_components(y: PhenotypeVector, a: RelationshipMatrix,
                            bracket_tol: float = 1e-5) -> VarianceComponents:
    """Maximize the restricted likelihood over h2 and back-solve the components.

    A coarse 21-point scan brackets the optimum before golden-section search,
    guarding against local maxima.
    """
    if np.abs(a.values - np.eye(a.n)).max() < 1e-8:
        raise ValueError("relationship matrix is the identity: "
                         "sigma_g^2 and sigma_e^2 are not separable")
    prob = _RemlProblem(y, a)
    hmax = prob.h2_upper_bound()
    grid = np.linspace(0.0, hmax, 21)
    values = np.array([prob.loglik(h) for h in grid])
    best = int(np.argmax(values))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, len(grid) - 1)]
    h2, ll, width = _golden_section(prob.loglik, lo, hi, bracket_tol)
    # the boundary h2 = 0 can beat the interior point returned by the search
    if prob.loglik(grid[best]) > ll:
        h2, ll = float(grid[best]), prob.loglik(grid[best])
    ll, mu, sigma2 = prob.estimates(h2)
    return VarianceComponents(sigma_g2=h2 * sigma2, sigma_e2=(1.0 - h2) * sigma2,
                              h2=float(h2), mu_hat=mu, reml_loglik=ll,
                              converged=width < bracket_tol)


def profile_lambda(y: PhenotypeVector, a_hat: RelationshipMatrix,
                   decomp: TreeletDecomposition, lambda_grid,
                   tie_tol: float = 1e-8):
    """Profile-likelihood selection of the smoothing parameter.

    Fits the variance components at every lambda on the grid and returns
    (lambda_star, components at lambda_star, curve rows).  Grid points where
    the fit fails are excluded with a warning.  Curve rows are
    (lambda, -2*loglik, h2, sigma_g2, sigma_e2, converged).

    ``lambda_star`` is the smallest grid value whose log-likelihood is within
    ``tie_tol`` of the maximum, so likelihood differences below numerical
    resolution never select a larger (more aggressive) smoothing parameter.
    """
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    if lambda_grid.size == 0:
        raise ValueError("lambda grid is empty")
    curve = []
    fits = []
    for lam in lambda_grid:
        a_tilde = smooth_covariance(a_hat, decomp, lam)
        try:
            vc = fit_variance_components(y, a_tilde.values)
        except (ValueError, np.linalg.LinAlgError) as exc:
            warnings.warn(f"REML failed at lambda={lam:.6g}: {exc}")
            continue
        curve.append((float(lam), -2.0 * vc.reml_loglik, vc.h2,
                      vc.sigma_g2, vc.sigma_e2, vc.converged))
        fits.append((float(lam), vc))
    if not fits:
        raise ValueError("REML failed at every grid point")
    max_ll = max(vc.reml_loglik for _, vc in fits)
    lam_star, vc_star = min(
        ((lam, vc) for lam, vc in fits if vc.reml_loglik >= max_ll - tie_tol),
        key=lambda item: item[0])
    return lam_star, vc_star, curve


def load_phenotype(path) -> PhenotypeVector:
    """Read the two-column ``id value`` phenotype format (header optional)."""
    ids, values = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"phenotype line {lineno}: expected 'id value'")
            if lineno == 1 and ids == []:
                try:
                    float(parts[1])
                except ValueError:
                    continue  # header line
            ids.append(parts[0])
            values.append(float(parts[1]))
    return PhenotypeVector(y=np.array(values), sample_ids=ids)


def save_phenotype(pheno: PhenotypeVector, path) -> None:
    with open(path, "w") as fh:
        for sid, val in zip(pheno.sample_ids, pheno.y):
            fh.write(f"{sid} {float(val)!r}\n")


def write_fit_csv(rows, path, header_lines=()) -> None:
    """Fit report CSV: lambda,neg2loglik,h2,sigma_g2,sigma_e2,converged."""
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["lambda", "neg2loglik", "h2", "sigma_g2", "sigma_e2",
                         "converged"])
        for lam, n2ll, h2, sg2, se2, conv in rows:
            writer.writerow([repr(float(lam)), repr(float(n2ll)), repr(float(h2)),
                             repr(float(sg2)), repr(float(se2)), int(conv)])


__all__ = [
    "PhenotypeVector", "VarianceComponents", "reml_loglik", "reml_loglik_dense",
    "fit_variance_components", "profile_lambda", "load_phenotype",
    "save_phenotype", "write_fit_csv",
]
