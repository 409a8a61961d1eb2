//! Fluctuations of the ball count around its mean, indexed by an additive
//! time parameter: `X_n(t) = (N_n(L_t) - M^{L_t}) / sqrt(M^{L(n)})` with
//! `L_t = (L(n) + R(t))^+`.
//!
//! Covers the exact pre-asymptotic covariance, the limit covariances
//! `M^{R(s∧t)} g_κ(s∨t)` (geometric tails) and `(1-e^-2) M^{R(s∧t)}`
//! (critical tails), the Markov ζ-representation of the limit, the
//! self-similar rescaling, and increment-correlation diagnostics.

mod gaussian;
mod shift;

pub use gaussian::{
    gaussian_path_sample, gaussian_paths, sample_critical_brownian, CovarianceKind,
    CovarianceSpec, GaussianSampler,
};
pub use shift::TimeShift;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hiergroup::Radius;
use crate::numbervar::variance_relative;
use crate::radial::Radial;
use crate::stepdist::{check_kappa, StepLaw};

/// `1 - e^{-2}`, the critical-regime variance factor.
pub const CRITICAL_FACTOR: f64 = 0.864_664_716_763_387_3;

/// Relative accuracy targeted by the series behind `g_κ`.
const G_SERIES_TOL: f64 = 1e-17;

/// The limit variance profile `g_κ` for a walk with step-ratio limit `a < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GKappa {
    order: u32,
    a: f64,
    b: f64,
    kappa: f64,
}

impl GKappa {
    pub fn new(law: &StepLaw, kappa: f64) -> Result<Self> {
        let a = law.ratio_limit().ok_or_else(|| {
            Error::MissingRatioLimit("g_kappa needs the step-ratio limit a".into())
        })?;
        Self::from_ratio(law.order(), a, kappa)
    }

    pub fn from_ratio(order: u32, a: f64, kappa: f64) -> Result<Self> {
        crate::hiergroup::check_order(order)?;
        if a >= 1.0 {
            return Err(Error::CriticalRegime);
        }
        if !(a > 0.0) {
            return Err(Error::InvalidParameter(format!("step-ratio limit must be positive, got {a}")));
        }
        check_kappa(kappa, a)?;
        let m = order as f64;
        Ok(Self {
            order,
            a,
            b: (m - a) / (m - 1.0),
            kappa,
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `θ = log M / log(1/a)`.
    pub fn theta(&self) -> f64 {
        (self.order as f64).ln() / (1.0 / self.a).ln()
    }

    /// `g_κ(t)` for a time with `R(t) = level`.
    pub fn at(&self, level: i64) -> f64 {
        self.tilde(self.a.powf(level as f64))
    }

    /// `g_κ` with `a^{R(t)}` replaced by `r`.
    pub fn tilde(&self, r: f64) -> f64 {
        self.forms(r).0
    }

    /// `g_κ(t)` for an arbitrary time under the shift `R`.
    pub fn at_time(&self, t: f64, shift: &TimeShift) -> Result<f64> {
        Ok(self.at(shift.eval(t)?))
    }

    /// Both algebraic forms of the bracket at `a^{R(t)} = r`:
    /// `(1 - S)(1 + S) - T` and `1 - S² - T`, where
    /// `S = (M-1)/M Σ_j e^{-x a^j} / M^j` and `x = κ b r`.
    pub fn forms(&self, r: f64) -> (f64, f64) {
        let x = self.kappa * self.b * r;
        if x == 0.0 {
            return (0.0, 0.0);
        }
        let m = self.order as f64;
        let a = self.a;
        let scale = (m - 1.0) / m;

        let u0 = -(-x).exp_m1();
        let floor = G_SERIES_TOL * scale * u0;
        let mut outer_len = 1usize;
        let mut weight = 1.0 / m;
        let mut apow = a;
        while weight * (x * apow).min(1.0) * m / (m - 1.0) > floor && outer_len < 100_000 {
            outer_len += 1;
            weight /= m;
            apow *= a;
        }
        let inner_len = (G_SERIES_TOL.ln() / (1.0 / m).ln()).ceil() as usize + 1;
        let len = outer_len + inner_len + 1;

        let mut pw = Vec::with_capacity(len);
        let mut p = 1.0;
        for _ in 0..len {
            pw.push(p);
            p *= a;
        }
        let e: Vec<f64> = pw.iter().map(|&q| (-x * q).exp()).collect();
        let u: Vec<f64> = pw.iter().map(|&q| -(-x * q).exp_m1()).collect();

        let mut one_minus_s = 0.0;
        let mut s_direct = 0.0;
        let mut w = 1.0;
        for j in 0..outer_len {
            one_minus_s += w * u[j];
            s_direct += w * e[j];
            w /= m;
        }
        one_minus_s *= scale;
        // the neglected e_j are within the tolerance of 1
        s_direct = scale * (s_direct + w * m / (m - 1.0));

        let mut squares = 0.0;
        let mut wj = 1.0;
        for j in 0..outer_len {
            let mut inner = 0.0;
            let mut wk = 1.0;
            for k in 0..inner_len {
                let l = j + k + 1;
                // e_l - e_j without cancellation
                let diff = e[l] * -(-x * (pw[j] - pw[l])).exp_m1();
                inner += wk * diff;
                wk /= m;
            }
            squares += wj * inner * inner;
            wj /= m;
        }
        let t = (m - 1.0).powi(3) / m.powi(4) * squares;

        let primary = one_minus_s * (2.0 - one_minus_s) - t;
        let standard = 1.0 - s_direct * s_direct - t;
        (primary, standard)
    }
}

/// `g_κ` at `R(t) = level`.
pub fn g_kappa(law: &StepLaw, kappa: f64, level: i64) -> Result<f64> {
    Ok(GKappa::new(law, kappa)?.at(level))
}

/// Exact covariance of the fluctuation process at finite `n`, with the
/// pieces used to compute it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteCov {
    pub value: f64,
    /// `L(n)`.
    pub base_radius: Radius,
    pub radius_s: Radius,
    pub radius_t: Radius,
    /// The grouped expression valid once `L(n) + R(s∧t) >= 0`.
    pub grouped: Option<f64>,
}

fn shifted_radius(base: Radius, level: i64) -> Radius {
    (base as i128 + level as i128).max(0) as Radius
}

/// `Cov(X_n(s), X_n(t))`.
pub fn finite_n_cov(law: &StepLaw, n: u64, s: f64, t: f64, shift: &TimeShift) -> Result<f64> {
    Ok(finite_n_cov_detail(law, n, s, t, shift)?.value)
}

pub fn finite_n_cov_detail(law: &StepLaw, n: u64, s: f64, t: f64, shift: &TimeShift) -> Result<FiniteCov> {
    if n == 0 {
        return Err(Error::InvalidParameter("fluctuation covariance needs n >= 1".into()));
    }
    let (s, t) = if s <= t { (s, t) } else { (t, s) };
    let base = law.radius_scale(n)?;
    let (rs, rt) = (shift.eval(s)?, shift.eval(t)?);
    let (ls, lt) = (shifted_radius(base, rs), shifted_radius(base, rt));
    let m = law.order() as f64;
    let value = m.powf(ls as f64 - base as f64) * variance_relative(law, n, lt);
    let grouped = (base as i64 + rs >= 0).then(|| grouped_form(law, n, rs, lt));
    Ok(FiniteCov {
        value,
        base_radius: base,
        radius_s: ls,
        radius_t: lt,
        grouped,
    })
}

/// `M^{R(s)} [P(>L)(1 + P(<=L)) - 1/(M-1) Σ_j P(=L+j)² / M^{j-1}]`, summed
/// shell by shell until the terms are negligible.
fn grouped_form(law: &StepLaw, n: u64, level_s: i64, lt: Radius) -> f64 {
    let rad = Radial::new(law, n);
    let m = law.order() as f64;
    let outside = rad.tail(lt);
    let mut squares = 0.0;
    let mut w = 1.0;
    for j in 1..=20_000u64 {
        let p = rad.pmf_at(lt + j);
        squares += p * p * w;
        w /= m;
        if w < 1e-18 * squares.max(1e-300) || w == 0.0 {
            break;
        }
    }
    m.powf(level_s as f64) * (outside * (2.0 - outside) - squares / (m - 1.0))
}

/// `M^{R(s∧t)} g_κ(s∨t)`.
pub fn limit_cov(law: &StepLaw, kappa: f64, s: f64, t: f64, shift: &TimeShift) -> Result<f64> {
    let g = GKappa::new(law, kappa)?;
    limit_cov_with(&g, s, t, shift)
}

pub fn limit_cov_with(g: &GKappa, s: f64, t: f64, shift: &TimeShift) -> Result<f64> {
    let (lo, hi) = (shift.eval(s.min(t))?, shift.eval(s.max(t))?);
    Ok((g.order as f64).powf(lo as f64) * g.at(hi))
}

/// `scale · (1 - e^{-2}) · M^{R(s∧t)}`.
pub fn limit_cov_critical(order: u32, s: f64, t: f64, shift: &TimeShift, scale: f64) -> Result<f64> {
    let lo = shift.eval(s.min(t))?;
    Ok(scale * CRITICAL_FACTOR * (order as f64).powf(lo as f64))
}

/// Limit covariance `E η⁰ · M^{R(s∧t)}` under i.i.d. initial occupation
/// numbers with mean `mean_eta`.
pub fn poisson_limit_cov(order: u32, mean_eta: f64, s: f64, t: f64, shift: &TimeShift) -> Result<f64> {
    limit_cov_critical(order, s, t, shift, mean_eta / CRITICAL_FACTOR)
}

/// Outcome of rebuilding the limit covariance from the ζ-representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZetaCheck {
    pub constructed: f64,
    pub target: f64,
    /// Lowest level kept in the sum over `i`.
    pub lowest_level: i64,
}

/// Below this value `M^i / g_κ(a^{-i})` is treated as zero.
const ZETA_CUTOFF: f64 = 1e-12;

/// Levels `i_min..=top` of the ζ-representation with the variance
/// increments `M^i/g(i) - M^{i-1}/g(i-1)`, checking that they are positive.
fn zeta_increments(g: &GKappa, top: i64) -> Result<(i64, Vec<f64>)> {
    let m = g.order as f64;
    let ratio = |i: i64| m.powf(i as f64) / g.at(i);
    let mut lowest = top;
    while ratio(lowest) >= ZETA_CUTOFF {
        lowest -= 1;
        if lowest < top - 100_000 {
            return Err(Error::InvalidParameter("ζ-representation does not decay".into()));
        }
    }
    let mut incs = Vec::with_capacity((top - lowest + 1) as usize);
    let mut prev = ratio(lowest - 1);
    for i in lowest..=top {
        let cur = ratio(i);
        if !(cur > prev) {
            return Err(Error::MonotonicityViolation { index: i });
        }
        incs.push(cur - prev);
        prev = cur;
    }
    Ok((lowest, incs))
}

/// Compares `g(m) g(n) Σ_{i <= m∧n} (M^i/g(i) - M^{i-1}/g(i-1))` with the
/// limit covariance `M^{m∧n} g(m∨n)`, where `g(i) = g_κ(a^{-i})`.
pub fn zeta_cov_check(law: &StepLaw, kappa: f64, m: i64, n: i64) -> Result<ZetaCheck> {
    zeta_cov_check_with(&GKappa::new(law, kappa)?, m, n)
}

pub fn zeta_cov_check_with(g: &GKappa, m: i64, n: i64) -> Result<ZetaCheck> {
    let (lo, hi) = (m.min(n), m.max(n));
    let (lowest, incs) = zeta_increments(g, lo)?;
    let sum: f64 = incs.iter().sum();
    Ok(ZetaCheck {
        constructed: g.at(m) * g.at(n) * sum,
        target: (g.order as f64).powf(lo as f64) * g.at(hi),
        lowest_level: lowest,
    })
}

/// Draws `(ζ_l)` for the requested levels from one set of independent
/// standard normals `ν_i`.
pub fn sample_zeta_path<R: rand::Rng + ?Sized>(g: &GKappa, levels: &[i64], rng: &mut R) -> Result<Vec<f64>> {
    use rand_distr::{Distribution, StandardNormal};
    let Some(&top) = levels.iter().max() else {
        return Ok(Vec::new());
    };
    let (lowest, incs) = zeta_increments(g, top)?;
    let mut partial = Vec::with_capacity(incs.len());
    let mut acc = 0.0;
    for inc in &incs {
        let nu: f64 = StandardNormal.sample(rng);
        acc += nu * inc.sqrt();
        partial.push(acc);
    }
    Ok(levels
        .iter()
        .map(|&l| {
            if l < lowest {
                0.0
            } else {
                g.at(l) * partial[(l - lowest) as usize]
            }
        })
        .collect())
}

/// `E Y(s) Y(t) = (s∧t)^θ / (s∨t)`.
pub fn y_cov(theta: f64, s: f64, t: f64) -> f64 {
    s.min(t).powf(theta) / s.max(t)
}

/// `M^{R(s)} a^{-m} g_κ(a^{-m} t)` for `s <= t` under `R(t) = ⌊log_{1/a} t⌋`:
/// the covariance of the rescaled process `Y_m`.
pub fn rescale_diagnostic(law: &StepLaw, kappa: f64, m: i64, s: f64, t: f64) -> Result<f64> {
    let g = GKappa::new(law, kappa)?;
    let shift = TimeShift::LogA { a: g.a };
    let (lo, hi) = (shift.eval(s.min(t))?, shift.eval(s.max(t))?);
    Ok((g.order as f64).powf(lo as f64) * g.a.powf(-(m as f64)) * g.at(m + hi))
}

/// `2κ M^{R(s)} a^{R(t)}`, the `m → ∞` limit of [`rescale_diagnostic`].
pub fn rescale_limit(law: &StepLaw, kappa: f64, s: f64, t: f64) -> Result<f64> {
    let g = GKappa::new(law, kappa)?;
    let shift = TimeShift::LogA { a: g.a };
    let (lo, hi) = (shift.eval(s.min(t))?, shift.eval(s.max(t))?);
    Ok(2.0 * kappa * (g.order as f64).powf(lo as f64) * g.a.powf(hi as f64))
}

/// One row of a long-range-dependence scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrdPoint {
    pub m: i64,
    pub tau: f64,
    pub value: f64,
}

/// `τ_m (M^{R(t)} - M^{R(s)}) |g_κ(t+τ_m) - g_κ(s+τ_m)|` with
/// `τ_m = a^{-m} - d`; `d` defaults to `(s+t)/2`.
pub fn lrd_scan(
    law: &StepLaw,
    kappa: f64,
    s: f64,
    t: f64,
    ms: std::ops::RangeInclusive<i64>,
    d: Option<f64>,
) -> Result<Vec<LrdPoint>> {
    if !(0.0 < s && s < t) {
        return Err(Error::InvalidParameter(format!("need 0 < s < t, got s={s}, t={t}")));
    }
    let d = d.unwrap_or(0.5 * (s + t));
    if !(s < d && d <= t) {
        return Err(Error::InvalidParameter(format!("offset d={d} must lie in (s, t]")));
    }
    let g = GKappa::new(law, kappa)?;
    let shift = TimeShift::LogA { a: g.a };
    let mf = g.order as f64;
    let spread = mf.powf(shift.eval(t)? as f64) - mf.powf(shift.eval(s)? as f64);
    ms.map(|m| {
        let tau = g.a.powf(-(m as f64)) - d;
        let dg = g.at(shift.eval(t + tau)?) - g.at(shift.eval(s + tau)?);
        Ok(LrdPoint {
            m,
            tau,
            value: tau * spread * dg.abs(),
        })
    })
    .collect()
}
