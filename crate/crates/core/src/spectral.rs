//! Generalized symmetric eigenproblems `K x = lambda M x` and time tracking.
//!
//! The pencil is reduced through a Cholesky factor of the mass matrix and
//! handed to a dense symmetric eigensolver; at desk scale that is the most
//! robust route and it returns M-orthonormal eigenvectors directly.
//! Per-time solves in a track are independent and run through [`crate::exec`].

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::coeff::Horizon;
use crate::error::{Error, Result};
use crate::exec;
use crate::fem::{assemble_stiffness_with, AssembledSystem};
use crate::linalg::SymMatrix;

/// Relative residual tolerance enforced on every returned eigenpair.
pub const EIG_RTOL: f64 = 1e-10;

/// The `k` smallest eigenpairs, ascending, with M-orthonormal vectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<DVector<f64>>,
}

impl SpectralDecomposition {
    /// Largest M-orthonormality defect `|x_i^T M x_j - delta_ij|`.
    pub fn orthonormality_defect(&self, mass: &SymMatrix) -> f64 {
        let mut worst = 0.0_f64;
        for (i, xi) in self.eigenvectors.iter().enumerate() {
            let mxi = mass.matvec(xi);
            for (j, xj) in self.eigenvectors.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((mxi.dot(xj) - target).abs());
            }
        }
        worst
    }
}

/// Solves `K x = lambda M x` for the `count` smallest eigenpairs.
///
/// The reduced matrix goes to the dense symmetric eigensolver first; if any
/// returned pair misses the residual gate (QL occasionally loses a few
/// digits on clustered spectra) the matrix is re-diagonalized with cyclic
/// Jacobi sweeps, which reach machine-level residuals.
pub fn generalized_eigs(
    stiff: &SymMatrix,
    mass: &SymMatrix,
    count: usize,
) -> Result<SpectralDecomposition> {
    let dim = mass.dim();
    if stiff.dim() != dim {
        return Err(Error::Eigen(format!(
            "dimension mismatch: K is {}, M is {}",
            stiff.dim(),
            dim
        )));
    }
    if count == 0 || count > dim {
        return Err(Error::Eigen(format!(
            "requested {count} eigenpairs from a dimension-{dim} pencil"
        )));
    }
    let chol = Cholesky::new(mass.to_dense())
        .ok_or_else(|| Error::Eigen("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    // C = L^{-1} K L^{-T}, symmetrized against roundoff
    let x = l
        .solve_lower_triangular(&stiff.to_dense())
        .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
    let c = (&c + c.transpose()) * 0.5;

    let eig = SymmetricEigen::new(c.clone());
    let (dec, residual_ok) =
        assemble_pairs(stiff, mass, &l, count, &eig.eigenvalues, &eig.eigenvectors)?;
    if residual_ok {
        return Ok(dec);
    }
    let (values, vectors) = jacobi_eigen(c);
    let (dec, residual_ok) = assemble_pairs(stiff, mass, &l, count, &values, &vectors)?;
    if residual_ok {
        Ok(dec)
    } else {
        Err(Error::Eigen(
            "eigenpair residuals stayed above tolerance after the Jacobi fallback".into(),
        ))
    }
}

/// Sorts, truncates, back-transforms and sign-normalizes raw eigenpairs of
/// the reduced matrix; the flag reports whether every returned pair meets
/// the residual gate.
fn assemble_pairs(
    stiff: &SymMatrix,
    mass: &SymMatrix,
    l: &DMatrix<f64>,
    count: usize,
    values: &DVector<f64>,
    vectors: &DMatrix<f64>,
) -> Result<(SpectralDecomposition, bool)> {
    let dim = mass.dim();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });
    let order = &order[..count];

    let mut y = DMatrix::zeros(dim, count);
    for (col, &idx) in order.iter().enumerate() {
        y.set_column(col, &vectors.column(idx));
    }
    let xs = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;

    let eigenvalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut eigenvectors = Vec::with_capacity(count);
    for col in 0..count {
        let mut v: DVector<f64> = xs.column(col).into();
        // deterministic sign: largest-magnitude component positive
        let mut pivot = 0;
        for i in 1..dim {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        eigenvectors.push(v);
    }

    let k_norm = stiff.inf_norm();
    let m_norm = mass.inf_norm();
    let mut residual_ok = true;
    for (lambda, v) in eigenvalues.iter().zip(&eigenvectors) {
        let residual = (stiff.matvec(v) - mass.matvec(v) * *lambda).norm();
        let bound = EIG_RTOL * (k_norm + lambda.abs() * m_norm) * v.norm();
        if residual > bound {
            residual_ok = false;
        }
    }
    Ok((
        SpectralDecomposition {
            eigenvalues,
            eigenvectors,
        },
        residual_ok,
    ))
}

/// Cyclic Jacobi diagonalization of a symmetric matrix. Slower than QL but
/// with machine-precision residuals and exact handling of clusters.
fn jacobi_eigen(mut a: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..60 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cos = 1.0 / (t * t + 1.0).sqrt();
                let sin = t * cos;
                let (app, aqq) = (a[(p, p)], a[(q, q)]);
                a[(p, p)] = cos * cos * app - 2.0 * sin * cos * apq + sin * sin * aqq;
                a[(q, q)] = sin * sin * app + 2.0 * sin * cos * apq + cos * cos * aqq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for i in 0..n {
                    if i != p && i != q {
                        let (aip, aiq) = (a[(i, p)], a[(i, q)]);
                        a[(i, p)] = cos * aip - sin * aiq;
                        a[(p, i)] = a[(i, p)];
                        a[(i, q)] = sin * aip + cos * aiq;
                        a[(q, i)] = a[(i, q)];
                    }
                    let (vip, viq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = cos * vip - sin * viq;
                    v[(i, q)] = sin * vip + cos * viq;
                }
            }
        }
    }
    (a.diagonal(), v)
}

/// Eigenvalue curves sampled on a time grid.
///
/// For infinite-horizon systems whose profiles settle, the grid is extended
/// until every profile sits within 1e-6 of its limit and the limiting
/// eigenproblem is appended as the `t = inf` sample, so `lambda2_lower`
/// covers the whole half line. It remains a grid estimate, not a certified
/// lower bound.
#[derive(Debug, Clone)]
pub struct SpectralTrack {
    pub times: Vec<f64>,
    /// `eigenvalues[i]` are the `k` smallest eigenvalues at `times[i]`.
    pub eigenvalues: Vec<Vec<f64>>,
    /// Eigenvalues of the limiting pencil, when one was appended.
    pub limit_eigenvalues: Option<Vec<f64>>,
    pub lambda2_lower: f64,
    /// Max over k and the grid of `|dlambda_k| / dt`.
    pub continuity_modulus: f64,
}

pub fn track_spectrum(
    system: &AssembledSystem,
    times: &[f64],
    count: usize,
) -> Result<SpectralTrack> {
    if times.is_empty() {
        return Err(Error::Eigen("empty spectral grid".into()));
    }
    if times[0] < 0.0 {
        return Err(Error::Eigen("spectral grid starts before t = 0".into()));
    }
    for w in times.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::Eigen("spectral grid is not strictly increasing".into()));
        }
    }
    if count < 2 {
        return Err(Error::Eigen(
            "tracking needs at least two eigenvalues (lambda2 lower bound)".into(),
        ));
    }

    let mut grid = times.to_vec();
    let mut limit_eigenvalues = None;
    if system.cert().horizon == Horizon::Infinite {
        if let (Some(settle), Some(limits)) = (
            system.coeffs().settle_time(1e-6),
            system.coeffs().mu_limits(),
        ) {
            let last = *grid.last().expect("nonempty grid");
            if settle > last {
                // stretch the grid to the settling time before the limit sample
                let extra = 8;
                for i in 1..=extra {
                    grid.push(last + (settle - last) * i as f64 / extra as f64);
                }
            }
            let k_inf = assemble_stiffness_with(system.mesh(), &limits);
            limit_eigenvalues =
                Some(generalized_eigs(&k_inf, system.mass(), count)?.eigenvalues);
        }
    }

    let eigenvalues = exec::try_map(&grid, |&t| -> Result<Vec<f64>> {
        let k = system.stiffness(t)?;
        Ok(generalized_eigs(&k, system.mass(), count)?.eigenvalues)
    })?;

    let mut lambda2_lower = f64::INFINITY;
    for row in &eigenvalues {
        lambda2_lower = lambda2_lower.min(row[1]);
    }
    if let Some(limit) = &limit_eigenvalues {
        lambda2_lower = lambda2_lower.min(limit[1]);
    }
    let mut continuity_modulus = 0.0_f64;
    for i in 1..grid.len() {
        let dt = grid[i] - grid[i - 1];
        for (now, before) in eigenvalues[i].iter().zip(&eigenvalues[i - 1]) {
            continuity_modulus = continuity_modulus.max((now - before).abs() / dt);
        }
    }
    Ok(SpectralTrack {
        times: grid,
        eigenvalues,
        limit_eigenvalues,
        lambda2_lower,
        continuity_modulus,
    })
}

/// Outcome of the eigenvalue-continuity probe for one index `k`.
#[derive(Debug, Clone)]
pub struct ContinuityCheck {
    /// `|lambda_k(t + delta_n) - lambda_k(t)|` per perturbation.
    pub differences: Vec<f64>,
    /// Lipschitz budget `lambda_k(t) * max_j L_j / epsilon`.
    pub lipschitz_bound: f64,
    /// Ratios of consecutive differences (halving steps give ratios near 2).
    pub ratios: Vec<f64>,
    pub bounded: bool,
    pub tail_monotone: bool,
}

#[derive(Debug, Clone)]
pub struct ContinuityReport {
    pub base_time: f64,
    pub deltas: Vec<f64>,
    pub checks: Vec<ContinuityCheck>,
}

impl ContinuityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.bounded && c.tail_monotone)
    }
}

/// Samples `lambda_k(t + delta)` for shrinking `delta` and verifies the
/// differences stay under the Lipschitz budget and vanish monotonically in
/// the tail.
pub fn eigenvalue_continuity_test(
    system: &AssembledSystem,
    t: f64,
    deltas: &[f64],
    count: usize,
) -> Result<ContinuityReport> {
    if deltas.is_empty() {
        return Err(Error::Eigen("no perturbations supplied".into()));
    }
    for w in deltas.windows(2) {
        if !(w[0] > w[1]) {
            return Err(Error::Eigen("perturbations must decrease strictly".into()));
        }
    }
    if deltas[deltas.len() - 1] <= 0.0 {
        return Err(Error::Eigen("perturbations must be positive".into()));
    }
    let horizon = system.cert().horizon;
    if !horizon.contains(t + deltas[0]) {
        return Err(Error::Eigen(format!(
            "t + delta = {} leaves the certified horizon",
            t + deltas[0]
        )));
    }

    let base = {
        let k = system.stiffness(t)?;
        generalized_eigs(&k, system.mass(), count)?.eigenvalues
    };
    let perturbed = exec::try_map(deltas, |&d| -> Result<Vec<f64>> {
        let k = system.stiffness(t + d)?;
        Ok(generalized_eigs(&k, system.mass(), count)?.eigenvalues)
    })?;

    let lip = system.cert().max_lipschitz_mu() / system.cert().epsilon;
    let mut checks = Vec::with_capacity(count);
    for k in 0..count {
        let differences: Vec<f64> = perturbed.iter().map(|row| (row[k] - base[k]).abs()).collect();
        let lipschitz_bound = base[k] * lip;
        let atol = 1e-9 * (1.0 + base[k].abs());
        let bounded = differences
            .iter()
            .zip(deltas)
            .all(|(d, &delta)| *d <= lipschitz_bound * delta + atol);
        let tail = differences.len().saturating_sub(5);
        let tail_monotone = differences[tail..]
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-6) + atol);
        let ratios = differences
            .windows(2)
            .map(|w| if w[1] > 0.0 { w[0] / w[1] } else { f64::INFINITY })
            .collect();
        checks.push(ContinuityCheck {
            differences,
            lipschitz_bound,
            ratios,
            bounded,
            tail_monotone,
        });
    }
    Ok(ContinuityReport {
        base_time: t,
        deltas: deltas.to_vec(),
        checks,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ResolventReport {
    pub omega: f64,
    /// Computed M-weighted operator norm of `(omega M + K)^{-1}`.
    pub norm: f64,
    /// The bound `1/omega` this norm must not exceed.
    pub bound: f64,
    pub satisfied: bool,
}

/// Checks `||(omega M + K(t))^{-1}||_M <= 1/omega` through the pencil
/// spectrum: the norm equals `1/(omega + lambda_1)` and the pencil is PSD.
pub fn check_discrete_resolvent_bounds(
    system: &AssembledSystem,
    t: f64,
    omega: f64,
) -> Result<ResolventReport> {
    if omega <= 0.0 {
        return Err(Error::Eigen(format!(
            "omega M + K(t) is singular or indefinite for omega = {omega} <= 0"
        )));
    }
    let k = system.stiffness(t)?;
    let count = 2.min(system.mass().dim());
    let eigs = generalized_eigs(&k, system.mass(), count)?.eigenvalues;
    let scale = eigs.last().copied().unwrap_or(1.0).abs().max(1.0);
    let psd = eigs[0] >= -1e-9 * scale;
    let norm = 1.0 / (omega + eigs[0].max(0.0));
    let bound = 1.0 / omega;
    Ok(ResolventReport {
        omega,
        norm,
        bound,
        satisfied: psd && norm <= bound * (1.0 + 1e-12),
    })
}
