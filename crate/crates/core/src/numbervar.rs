//! Moments of the ball count `N_n(L)`: the number of particles inside `B_L`
//! after `n` steps when initially every site carries one independent walker
//! (or a Poisson number of them).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hiergroup::{check_order, Radius};
use crate::radial::Radial;
use crate::stepdist::{Family, StepLaw};

/// Default shell-series tolerance, relative to `M^L`.
pub const DEFAULT_SHELL_TOLERANCE: f64 = 1e-12;

const MAX_SHELLS: Radius = 20_000;

/// `M^L` as a double, with a flag telling whether it is exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallMass {
    pub value: f64,
    pub exact: bool,
}

/// `E N_n(L) = M^L`, whatever `n` and the step law.
pub fn expected_count(order: u32, radius: Radius) -> Result<BallMass> {
    check_order(order)?;
    let value = (order as f64).powf(radius as f64);
    if !value.is_finite() {
        return Err(Error::Overflow("M^L"));
    }
    let exact = match u32::try_from(radius).ok().and_then(|e| (order as u128).checked_pow(e)) {
        Some(v) => v <= 1 << 53,
        None => false,
    };
    Ok(BallMass { value, exact })
}

/// First two moments of `N_n(L)` and the two parts of the variance.
///
/// `Var N_n(L) = I + II` with `I = M^L P(|ξ_n| <= L) P(|ξ_n| > L)` and
/// `II = M^L Σ_k P(|ξ_n| = L+k) (1 - P(|ξ_n| = L+k) / ((M-1) M^(k-1)))`.
/// Relative quantities are divided by `M^L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct CountMoments {
    pub n: u64,
    pub L: Radius,
    pub mean: f64,
    pub mean_exact: bool,
    pub variance: f64,
    pub var_rel: f64,
    pub part_I: f64,
    pub part_II: f64,
    /// Bound on the shell-series remainder, relative to `M^L`.
    pub truncation_error: f64,
}

/// Relative variance pieces `(I/M^L, II/M^L, remainder bound)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RelativeParts {
    pub inner: f64,
    pub outer: f64,
    pub error: f64,
}

/// Evaluates `Σ_{k>=1} P(|ξ_n| = L+k)^2 / ((M-1) M^(k-1))`, the only part of
/// the variance that needs a shell-by-shell sum.
///
/// After shell `k` the remainder is at most `P(|ξ_n| > L+k)^2 / ((M-1) M^k)`.
pub(crate) fn shell_square_sum(rad: &Radial<'_>, radius: Radius, tol: f64) -> (f64, f64) {
    let m = rad.law().order() as f64;
    let mut sum = 0.0;
    let mut shell = m - 1.0;
    for k in 1..=MAX_SHELLS {
        let p = rad.pmf_at(radius + k);
        sum += p * p / shell;
        shell *= m;
        // checking the bound needs a tail evaluation, so only do it every few shells
        if k % 4 == 0 || shell > 1e30 {
            let t = rad.tail(radius + k);
            let bound = t * t / shell;
            if bound <= tol || !shell.is_finite() {
                return (sum, bound);
            }
        }
    }
    (sum, 1.0 / shell)
}

pub(crate) fn relative_parts(law: &StepLaw, n: u64, radius: Radius, tol: f64) -> RelativeParts {
    if n == 0 {
        return RelativeParts {
            inner: 0.0,
            outer: 0.0,
            error: 0.0,
        };
    }
    let rad = Radial::new(law, n);
    let outside = rad.tail(radius);
    let inside = 1.0 - outside;
    let (squares, error) = shell_square_sum(&rad, radius, tol);
    RelativeParts {
        inner: inside * outside,
        outer: (outside - squares).max(0.0),
        error,
    }
}

/// `Var N_n(L) / M^L`.
pub fn variance_relative(law: &StepLaw, n: u64, radius: Radius) -> f64 {
    let p = relative_parts(law, n, radius, DEFAULT_SHELL_TOLERANCE);
    p.inner + p.outer
}

pub fn variance_exact(law: &StepLaw, n: u64, radius: Radius) -> Result<CountMoments> {
    variance_exact_with(law, n, radius, DEFAULT_SHELL_TOLERANCE)
}

pub fn variance_exact_with(law: &StepLaw, n: u64, radius: Radius, tol: f64) -> Result<CountMoments> {
    let mass = expected_count(law.order(), radius)?;
    let p = relative_parts(law, n, radius, tol);
    let var_rel = p.inner + p.outer;
    Ok(CountMoments {
        n,
        L: radius,
        mean: mass.value,
        mean_exact: mass.exact,
        variance: var_rel * mass.value,
        var_rel,
        part_I: p.inner * mass.value,
        part_II: p.outer * mass.value,
        truncation_error: p.error,
    })
}

/// `lim_{L→∞} M^L r_L` when the family determines it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Limit {
    Finite(f64),
    Infinite,
    Unknown,
}

impl Limit {
    pub fn scale(self, factor: f64) -> Self {
        match self {
            Limit::Finite(v) => Limit::Finite(v * factor),
            other => other,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Limit::Finite(v) => v,
            Limit::Infinite => f64::INFINITY,
            Limit::Unknown => f64::NAN,
        }
    }
}

/// `M^L r_L`.
pub fn scaled_step_prob(law: &StepLaw, radius: Radius) -> f64 {
    let m = law.order() as f64;
    m.powf(radius as f64) * law.step_prob(radius)
}

/// `lim M^L r_L` for the built-in families.
pub fn scaled_step_limit(law: &StepLaw) -> Limit {
    let m = law.order() as f64;
    match law.family() {
        Family::Crw { c } => {
            if *c < 1.0 {
                Limit::Finite(0.0)
            } else if *c == 1.0 {
                Limit::Finite(m - 1.0)
            } else {
                Limit::Infinite
            }
        }
        Family::JBeta { beta } => {
            if *beta < 0.0 {
                Limit::Finite(0.0)
            } else if *beta == 0.0 {
                Limit::Finite(law.normalizer())
            } else {
                Limit::Infinite
            }
        }
        Family::PowerLaw { .. } => Limit::Infinite,
        Family::Custom(_) => Limit::Unknown,
    }
}

/// `lim_{L→∞} Var N_n(L) = 2n / (M-1) · lim M^L r_L`.
pub fn variance_limit(law: &StepLaw, n: u64) -> Limit {
    let m = law.order() as f64;
    if n == 0 {
        return Limit::Finite(0.0);
    }
    scaled_step_limit(law).scale(2.0 * n as f64 / (m - 1.0))
}

/// Mean and variance of `N_n(L)` when the initial occupation numbers are
/// i.i.d. Poisson with mean `lambda`: both equal `lambda M^L`.
pub fn poisson_count_stats(law: &StepLaw, _n: u64, radius: Radius, lambda: f64) -> Result<(f64, f64)> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Poisson intensity must be finite and nonnegative, got {lambda}"
        )));
    }
    let v = lambda * expected_count(law.order(), radius)?.value;
    Ok((v, v))
}
