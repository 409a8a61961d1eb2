//! Centered Gaussian paths on a finite time grid from any of the covariance
//! functions of the fluctuation module.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    finite_n_cov, poisson_limit_cov, y_cov, zeta_increments, GKappa, TimeShift, CRITICAL_FACTOR,
};
use crate::error::{Error, Result};
use crate::par::{map_indexed, replica_rng, Execution};
use crate::stepdist::StepLaw;

/// A covariance function `C(s, t)` on positive times.
#[derive(Debug, Clone)]
pub enum CovarianceSpec {
    /// Exact covariance of `X_n` at finite `n`.
    FiniteN { law: StepLaw, n: u64, shift: TimeShift },
    /// `M^{R(s∧t)} g_κ(s∨t)`.
    LimitKappa { g: GKappa, shift: TimeShift },
    /// `scale (1 - e^{-2}) M^{R(s∧t)}`.
    Critical { order: u32, shift: TimeShift, scale: f64 },
    /// `(s∧t)^θ / (s∨t)`.
    YProcess { theta: f64 },
    /// The limit covariance rebuilt from the ζ-representation, with
    /// `R(t) = ⌊log_{1/a} t⌋`.
    Zeta { g: GKappa },
    /// `E η⁰ M^{R(s∧t)}`.
    Poisson { order: u32, mean_eta: f64, shift: TimeShift },
}

/// Short name of each covariance kind, used in reports.
pub type CovarianceKind = &'static str;

impl CovarianceSpec {
    pub fn kind(&self) -> CovarianceKind {
        match self {
            CovarianceSpec::FiniteN { .. } => "finite_n",
            CovarianceSpec::LimitKappa { .. } => "limit_kappa",
            CovarianceSpec::Critical { .. } => "critical",
            CovarianceSpec::YProcess { .. } => "y_process",
            CovarianceSpec::Zeta { .. } => "zeta",
            CovarianceSpec::Poisson { .. } => "poisson",
        }
    }

    /// `C(s, t)` for a single pair.
    pub fn cov(&self, s: f64, t: f64) -> Result<f64> {
        Ok(self.gram(&[s, t])?[(0, 1)])
    }

    /// Gram matrix `C(t_i, t_j)` over the grid.
    pub fn gram(&self, grid: &[f64]) -> Result<DMatrix<f64>> {
        check_grid(grid)?;
        let k = grid.len();
        let mut out = DMatrix::zeros(k, k);
        match self {
            CovarianceSpec::FiniteN { law, n, shift } => {
                for i in 0..k {
                    for j in 0..=i {
                        let v = finite_n_cov(law, *n, grid[i], grid[j], shift)?;
                        out[(i, j)] = v;
                        out[(j, i)] = v;
                    }
                }
            }
            CovarianceSpec::LimitKappa { g, shift } => {
                let levels = levels(grid, shift)?;
                let gv: Vec<f64> = levels.iter().map(|&l| g.at(l)).collect();
                let m = g.order() as f64;
                fill_min_max(&mut out, |i, j| m.powf(levels[j] as f64) * gv[i]);
            }
            CovarianceSpec::Critical { order, shift, scale } => {
                let levels = levels(grid, shift)?;
                let m = *order as f64;
                fill_min_max(&mut out, |_, j| scale * CRITICAL_FACTOR * m.powf(levels[j] as f64));
            }
            CovarianceSpec::Poisson { order, mean_eta, shift } => {
                for i in 0..k {
                    for j in 0..=i {
                        let v = poisson_limit_cov(*order, *mean_eta, grid[i], grid[j], shift)?;
                        out[(i, j)] = v;
                        out[(j, i)] = v;
                    }
                }
            }
            CovarianceSpec::YProcess { theta } => {
                for i in 0..k {
                    for j in 0..k {
                        out[(i, j)] = y_cov(*theta, grid[i], grid[j]);
                    }
                }
            }
            CovarianceSpec::Zeta { g } => {
                let shift = TimeShift::LogA { a: g.a() };
                let levels = levels(grid, &shift)?;
                let top = *levels.iter().max().expect("non-empty grid");
                let (lowest, incs) = zeta_increments(g, top)?;
                let mut cum = Vec::with_capacity(incs.len());
                let mut acc = 0.0;
                for inc in &incs {
                    acc += inc;
                    cum.push(acc);
                }
                let below = |l: i64| if l < lowest { 0.0 } else { cum[(l - lowest) as usize] };
                let gv: Vec<f64> = levels.iter().map(|&l| g.at(l)).collect();
                fill_min_max(&mut out, |i, j| gv[i] * gv[j] * below(levels[j]));
            }
        }
        Ok(out)
    }
}

/// Fills a symmetric matrix on a sorted grid from `f(later, earlier)`.
fn fill_min_max(out: &mut DMatrix<f64>, f: impl Fn(usize, usize) -> f64) {
    let k = out.nrows();
    for i in 0..k {
        for j in 0..=i {
            let v = f(i, j);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
}

fn levels(grid: &[f64], shift: &TimeShift) -> Result<Vec<i64>> {
    grid.iter().map(|&t| shift.eval(t)).collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("time grid is empty".into()));
    }
    if grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter(
            "time grid must be positive, finite and sorted".into(),
        ));
    }
    Ok(())
}

/// Pivots below this fraction of the largest diagonal entry are treated as 0.
const PIVOT_TOLERANCE: f64 = 1e-10;

/// Lower-triangular `L` with `L Lᵀ = A` for a positive semidefinite `A`.
fn semidefinite_cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = a.nrows();
    let scale = a.diagonal().iter().fold(0.0f64, |acc, &d| acc.max(d.abs()));
    let tol = PIVOT_TOLERANCE * scale.max(f64::MIN_POSITIVE);
    let mut l = DMatrix::zeros(k, k);
    for j in 0..k {
        let mut d = a[(j, j)];
        for p in 0..j {
            d -= l[(j, p)] * l[(j, p)];
        }
        if d < -tol {
            return Err(not_psd(a));
        }
        if d <= tol {
            // degenerate direction: the rest of the column must vanish too
            for i in j + 1..k {
                let mut r = a[(i, j)];
                for p in 0..j {
                    r -= l[(i, p)] * l[(j, p)];
                }
                if r.abs() > tol.sqrt() * scale.sqrt() {
                    return Err(not_psd(a));
                }
            }
            continue;
        }
        let root = d.sqrt();
        l[(j, j)] = root;
        for i in j + 1..k {
            let mut r = a[(i, j)];
            for p in 0..j {
                r -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = r / root;
        }
    }
    Ok(l)
}

fn not_psd(a: &DMatrix<f64>) -> Error {
    let eig = SymmetricEigen::new(a.clone());
    let min_eigenvalue = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    Error::NotPositiveSemidefinite { min_eigenvalue }
}

/// A factorized covariance, ready to draw paths.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    grid: Vec<f64>,
    gram: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(spec: &CovarianceSpec, grid: &[f64]) -> Result<Self> {
        let gram = spec.gram(grid)?;
        Self::from_gram(grid.to_vec(), gram)
    }

    pub fn from_gram(grid: Vec<f64>, gram: DMatrix<f64>) -> Result<Self> {
        let factor = semidefinite_cholesky(&gram)?;
        Ok(Self { grid, gram, factor })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.grid.len();
        let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
        (0..k)
            .map(|i| (0..=i).map(|p| self.factor[(i, p)] * z[p]).sum())
            .collect()
    }
}

/// One path on `grid`, determined by `seed`.
pub fn gaussian_path_sample(spec: &CovarianceSpec, grid: &[f64], seed: u64) -> Result<Vec<f64>> {
    let sampler = GaussianSampler::new(spec, grid)?;
    Ok(sampler.sample(&mut replica_rng(seed, 0)))
}

/// `count` independent paths; path `i` uses the stream `(seed, i)`.
pub fn gaussian_paths(
    spec: &CovarianceSpec,
    grid: &[f64],
    seed: u64,
    count: usize,
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    let sampler = GaussianSampler::new(spec, grid)?;
    Ok(map_indexed(exec, count, |i| sampler.sample(&mut replica_rng(seed, i as u64))))
}

/// The critical limit through its Brownian representation
/// `X(t) = sqrt(scale (1 - e^{-2})) W(M^{R(t)})`.
pub fn sample_critical_brownian<R: Rng + ?Sized>(
    order: u32,
    shift: &TimeShift,
    scale: f64,
    grid: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_grid(grid)?;
    let m = order as f64;
    let amp = (scale * CRITICAL_FACTOR).sqrt();
    let mut clock = 0.0;
    let mut w = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    for &t in grid {
        let v = m.powf(shift.eval(t)? as f64);
        let z: f64 = StandardNormal.sample(rng);
        w += z * (v - clock).sqrt();
        clock = v;
        out.push(amp * w);
    }
    Ok(out)
}
