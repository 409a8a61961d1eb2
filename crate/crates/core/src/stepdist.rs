//! Step-size laws `r_j`, their tails `h(L) = P(|ρ| > L)`, the eigenvalues
//! `f_k`, the asymptotic walk parameters and the radius scale `L(n)`.
//!
//! Tails are always computed directly (never as `1 - partial sum`) so that
//! quantities like `1 - f_k` keep full relative precision at large `k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hiergroup::{check_order, Radius};

/// Default relative tolerance on the certified remainder of tail sums.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-15;

/// Number of leading `r_j`, `h(j)` values cached at construction.
const TABLE_LEN: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `r_j = (1 - c/M) (c/M)^(j-1)`, `0 < c < M`.
    Crw { c: f64 },
    /// `r_j = D j^beta / M^j`, `beta >= 0`.
    JBeta { beta: f64 },
    /// `r_j = D j^-beta`, `beta > 1`.
    PowerLaw { beta: f64 },
    Custom(CustomLaw),
}

/// Finitely supported step law with user-asserted asymptotics.
///
/// Limits cannot be inferred from finitely many terms, so the ratio limit
/// `a` and the hypotheses used by the fluctuation limits are declared.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomLaw {
    pub probs: Vec<f64>,
    pub ratio_limit: Option<f64>,
    /// `r_{j+1} <= r_j` eventually.
    pub monotone: bool,
    /// `r_{j+1} / h(j) -> 0`, the weaker hypothesis for the critical regime.
    pub weak_tail: bool,
    /// Recurrence when `a = 1/M`, where the ratio limit does not decide it.
    pub recurrent_at_critical: Option<bool>,
}

/// Degree-based classification of the walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Recurrent,
    Transient,
    /// `gamma = 0`; recurrence then depends on the family.
    Critical { recurrent: Option<bool> },
}

impl Classification {
    pub fn is_recurrent(&self) -> Option<bool> {
        match *self {
            Classification::Recurrent => Some(true),
            Classification::Transient => Some(false),
            Classification::Critical { recurrent } => recurrent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    /// `lim r_{j+1} / r_j`.
    pub a: f64,
    /// `(M - a) / (M - 1)`.
    pub b: f64,
    /// `log M / log(1/a)`, infinite when `a = 1`.
    pub theta: f64,
    /// Degree, `theta - 1`.
    pub gamma: f64,
    pub classification: Classification,
}

#[derive(Debug, Clone)]
pub struct StepLaw {
    order: u32,
    family: Family,
    tail_tol: f64,
    norm: f64,
    r: Vec<f64>,
    h: Vec<f64>,
}

impl StepLaw {
    pub fn crw(order: u32, c: f64) -> Result<Self> {
        check_order(order)?;
        if !(c > 0.0 && c < order as f64) {
            return Err(Error::InvalidParameter(format!(
                "c-rw needs 0 < c < M, got c = {c}, M = {order}"
            )));
        }
        Ok(Self::build(order, Family::Crw { c }, DEFAULT_TAIL_TOLERANCE))
    }

    pub fn jbeta(order: u32, beta: f64) -> Result<Self> {
        check_order(order)?;
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "j^beta law needs beta >= 0, got {beta}"
            )));
        }
        Ok(Self::build(order, Family::JBeta { beta }, DEFAULT_TAIL_TOLERANCE))
    }

    pub fn power_law(order: u32, beta: f64) -> Result<Self> {
        check_order(order)?;
        if !(beta > 1.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "power law needs beta > 1, got {beta}"
            )));
        }
        Ok(Self::build(order, Family::PowerLaw { beta }, DEFAULT_TAIL_TOLERANCE))
    }

    pub fn custom(order: u32, law: CustomLaw) -> Result<Self> {
        check_order(order)?;
        if law.probs.is_empty() || law.probs.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter(
                "custom law needs a non-empty list of non-negative probabilities".into(),
            ));
        }
        let total: f64 = law.probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "custom probabilities sum to {total}, not 1"
            )));
        }
        if let Some(a) = law.ratio_limit {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "ratio limit must lie in (0, 1], got {a}"
                )));
            }
        }
        Ok(Self::build(order, Family::Custom(law), DEFAULT_TAIL_TOLERANCE))
    }

    /// Rebuilds the law with a different relative tail tolerance.
    pub fn with_tail_tolerance(self, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol < 1e-3) {
            return Err(Error::InvalidParameter(format!(
                "tail tolerance must lie in (0, 1e-3), got {tol}"
            )));
        }
        Ok(Self::build(self.order, self.family, tol))
    }

    fn build(order: u32, family: Family, tail_tol: f64) -> Self {
        let mut law = StepLaw {
            order,
            family,
            tail_tol,
            norm: 1.0,
            r: Vec::new(),
            h: Vec::new(),
        };
        law.norm = match &law.family {
            Family::Crw { .. } | Family::Custom(_) => 1.0,
            Family::JBeta { beta } => 1.0 / law.jbeta_sum(*beta, 1),
            Family::PowerLaw { beta } => 1.0 / zeta_tail(*beta, 1),
        };
        match &law.family {
            Family::Crw { .. } => {}
            Family::Custom(c) => {
                let mut r = Vec::with_capacity(c.probs.len() + 1);
                r.push(0.0);
                r.extend_from_slice(&c.probs);
                let mut h = vec![0.0; r.len()];
                for l in (0..r.len() - 1).rev() {
                    h[l] = h[l + 1] + r[l + 1];
                }
                law.r = r;
                law.h = h;
            }
            _ => {
                let r: Vec<f64> = (0..TABLE_LEN as Radius).map(|j| law.formula_prob(j)).collect();
                let h: Vec<f64> = (0..TABLE_LEN as Radius).map(|l| law.formula_tail(l)).collect();
                law.r = r;
                law.h = h;
            }
        }
        law
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tol
    }

    /// Normalizing constant `D` (1 for the families that need none).
    pub fn normalizer(&self) -> f64 {
        self.norm
    }

    fn m(&self) -> f64 {
        self.order as f64
    }

    /// `r_j`; zero at `j = 0` since a step never stays put.
    pub fn step_prob(&self, j: Radius) -> f64 {
        if j == 0 {
            return 0.0;
        }
        match &self.family {
            Family::Custom(_) => self.r.get(j as usize).copied().unwrap_or(0.0),
            Family::Crw { .. } => self.formula_prob(j),
            _ => match self.r.get(j as usize) {
                Some(&p) => p,
                None => self.formula_prob(j),
            },
        }
    }

    /// `h(L) = P(|ρ| > L)`.
    pub fn tail(&self, radius: Radius) -> f64 {
        if radius == 0 {
            return 1.0;
        }
        match &self.family {
            Family::Custom(_) => self.h.get(radius as usize).copied().unwrap_or(0.0),
            Family::Crw { .. } => self.formula_tail(radius),
            _ => match self.h.get(radius as usize) {
                Some(&p) => p,
                None => self.formula_tail(radius),
            },
        }
    }

    /// `P(|ρ| <= L)`.
    pub fn cdf(&self, radius: Radius) -> f64 {
        1.0 - self.tail(radius)
    }

    fn formula_prob(&self, j: Radius) -> f64 {
        if j == 0 {
            return 0.0;
        }
        let jf = j as f64;
        match &self.family {
            Family::Crw { c } => {
                let q = c / self.m();
                (1.0 - q) * pow_int(q, j - 1)
            }
            Family::JBeta { beta } => self.norm * (beta * jf.ln() - jf * self.m().ln()).exp(),
            Family::PowerLaw { beta } => self.norm * jf.powf(-beta),
            Family::Custom(c) => c.probs.get(j as usize - 1).copied().unwrap_or(0.0),
        }
    }

    fn formula_tail(&self, radius: Radius) -> f64 {
        if radius == 0 {
            return 1.0;
        }
        match &self.family {
            Family::Crw { c } => pow_int(c / self.m(), radius),
            Family::JBeta { beta } => self.norm * self.jbeta_sum(*beta, radius + 1),
            Family::PowerLaw { beta } => self.norm * zeta_tail(*beta, radius + 1),
            Family::Custom(c) => c.probs.iter().skip(radius as usize).sum(),
        }
    }

    /// `Σ_{j >= start} j^beta M^-j` with a ratio-bounded remainder.
    fn jbeta_sum(&self, beta: f64, start: Radius) -> f64 {
        let ln_m = self.m().ln();
        let term = |j: f64| (beta * j.ln() - j * ln_m).exp();
        let mut sum = 0.0;
        let mut j = start as f64;
        loop {
            let t = term(j);
            sum += t;
            let rho = ((j + 1.0) / j).powf(beta) / self.m();
            if rho < 1.0 {
                let remainder = t * rho / (1.0 - rho);
                if remainder <= self.tail_tol * sum || t == 0.0 {
                    return sum;
                }
            }
            j += 1.0;
        }
    }

    /// `1 - f_k = h(k-1) + r_k / (M-1)`, computed without cancellation.
    pub fn eigen_gap(&self, k: Radius) -> f64 {
        debug_assert!(k >= 1);
        self.tail(k.saturating_sub(1)) + self.step_prob(k) / (self.m() - 1.0)
    }

    /// `f_k = 1 - h(k-1) - r_k / (M-1)`.
    pub fn eigen_f(&self, k: Radius) -> f64 {
        1.0 - self.eigen_gap(k)
    }

    /// `lim r_{j+1} / r_j`, when known.
    pub fn ratio_limit(&self) -> Option<f64> {
        match &self.family {
            Family::Crw { c } => Some(c / self.m()),
            Family::JBeta { .. } => Some(1.0 / self.m()),
            Family::PowerLaw { .. } => Some(1.0),
            Family::Custom(c) => c.ratio_limit,
        }
    }

    /// Whether the eventual-monotonicity and ratio-limit hypotheses hold.
    pub fn has_regular_tail(&self) -> bool {
        match &self.family {
            Family::Custom(c) => c.ratio_limit.is_some() && c.monotone,
            _ => true,
        }
    }

    /// Whether `r_{j+1} / h(j) -> 0` holds (needed when `a = 1`).
    pub fn has_thin_increments(&self) -> bool {
        match &self.family {
            Family::Custom(c) => c.weak_tail || c.ratio_limit == Some(1.0),
            _ => self.ratio_limit() == Some(1.0),
        }
    }

    pub fn walk_params(&self) -> Result<WalkParams> {
        let a = self.ratio_limit().ok_or_else(|| {
            Error::MissingRatioLimit("custom law declares no ratio limit".into())
        })?;
        let m = self.m();
        let b = (m - a) / (m - 1.0);
        let theta = if a < 1.0 { m.ln() / (1.0 / a).ln() } else { f64::INFINITY };
        let gamma = match &self.family {
            Family::Crw { c } => c.ln() / (m / c).ln(),
            _ => theta - 1.0,
        };
        let classification = match &self.family {
            Family::Crw { c } if *c == 1.0 => Classification::Critical { recurrent: Some(true) },
            Family::Crw { c } if *c < 1.0 => Classification::Recurrent,
            Family::Crw { .. } => Classification::Transient,
            Family::JBeta { beta } => Classification::Critical {
                recurrent: Some(*beta <= 1.0),
            },
            Family::PowerLaw { .. } => Classification::Transient,
            Family::Custom(c) => {
                if a * m < 1.0 {
                    Classification::Recurrent
                } else if a * m > 1.0 {
                    Classification::Transient
                } else {
                    Classification::Critical {
                        recurrent: c.recurrent_at_critical,
                    }
                }
            }
        };
        Ok(WalkParams {
            a,
            b,
            theta,
            gamma,
            classification,
        })
    }

    fn reaches(&self, radius: Radius, n: u64) -> bool {
        self.tail(radius) * n as f64 >= 1.0
    }

    /// `L(n) = sup{L : h(L) >= 1/n}`.
    pub fn radius_scale(&self, n: u64) -> Result<Radius> {
        if n == 0 {
            return Err(Error::InvalidParameter("radius scale needs n >= 1".into()));
        }
        let mut hi: Radius = 1;
        while self.reaches(hi, n) {
            hi = hi
                .checked_mul(2)
                .filter(|&h| h < 1 << 62)
                .ok_or(Error::Overflow("radius scale"))?;
        }
        let mut lo = hi / 2;
        // invariant: reaches(lo) && !reaches(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.reaches(mid, n) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// Closed form `floor(log_{M/c} n)` for the c-rw, snapped to the
    /// definitional inequality. `None` for other families.
    pub fn radius_scale_closed_form(&self, n: u64) -> Option<Radius> {
        let Family::Crw { c } = self.family else {
            return None;
        };
        if n == 0 {
            return None;
        }
        let estimate = ((n as f64).ln() / (self.m() / c).ln()).floor().max(0.0);
        let mut l = estimate as Radius;
        while self.reaches(l + 1, n) {
            l += 1;
        }
        while l > 0 && !self.reaches(l, n) {
            l -= 1;
        }
        Some(l)
    }

    /// `n_i = ceil(kappa / h(i))`, a subsequence with `n_i h(L(n_i)) -> kappa`.
    pub fn kappa_sequence(&self, kappa: f64, i: Radius) -> Result<u64> {
        let a = self.ratio_limit().ok_or_else(|| {
            Error::MissingRatioLimit("custom law declares no ratio limit".into())
        })?;
        if a >= 1.0 {
            return Err(Error::CriticalRegime);
        }
        check_kappa(kappa, a)?;
        let n = (kappa / self.tail(i)).ceil();
        if !(n.is_finite() && n < u64::MAX as f64) {
            return Err(Error::Overflow("kappa subsequence index"));
        }
        Ok(n as u64)
    }

    pub fn to_spec(&self) -> LawSpec {
        let tail_tolerance = (self.tail_tol != DEFAULT_TAIL_TOLERANCE).then_some(self.tail_tol);
        let order = self.order;
        match &self.family {
            Family::Crw { c } => LawSpec::Crw { order, c: *c, tail_tolerance },
            Family::JBeta { beta } => LawSpec::Jbeta { order, beta: *beta, tail_tolerance },
            Family::PowerLaw { beta } => LawSpec::Powerlaw { order, beta: *beta, tail_tolerance },
            Family::Custom(c) => LawSpec::Custom {
                order,
                probs: c.probs.clone(),
                a: c.ratio_limit,
                monotone: c.monotone,
                weak_tail: c.weak_tail,
                recurrent_at_critical: c.recurrent_at_critical,
                tail_tolerance,
            },
        }
    }
}

pub(crate) fn check_kappa(kappa: f64, a: f64) -> Result<()> {
    let upper = 1.0 / a;
    if !(kappa >= 1.0 && kappa < upper) {
        return Err(Error::KappaOutOfRange { kappa, upper });
    }
    Ok(())
}

fn pow_int(q: f64, e: Radius) -> f64 {
    match i32::try_from(e) {
        Ok(e) => q.powi(e),
        Err(_) => q.powf(e as f64),
    }
}

// Bernoulli numbers B_2 .. B_12 for the Euler-Maclaurin correction.
const BERNOULLI: [f64; 6] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
];

/// `Σ_{j >= start} j^-beta` for `beta > 1`.
///
/// Direct summation up to a cutoff `N >= 32`, then Euler-Maclaurin from `N`
/// with corrections through `B_12`; the neglected remainder is below
/// `1e-16` relative for every `beta > 1`.
pub fn zeta_tail(beta: f64, start: Radius) -> f64 {
    const CUT: Radius = 32;
    let start = start.max(1);
    let n0 = start.max(CUT);
    let mut head = 0.0;
    for j in (start..n0).rev() {
        head += (j as f64).powf(-beta);
    }
    let n = n0 as f64;
    let mut tail = n.powf(1.0 - beta) / (beta - 1.0) + 0.5 * n.powf(-beta);
    // rising factorial (beta)_{2k-1} and (2k)!
    let mut rising = beta;
    let mut fact = 2.0;
    let mut power = n.powf(-beta - 1.0);
    for (k, b) in BERNOULLI.iter().enumerate() {
        tail += b / fact * rising * power;
        let k2 = 2.0 * (k as f64 + 1.0);
        rising *= (beta + k2 - 1.0) * (beta + k2);
        fact *= (k2 + 1.0) * (k2 + 2.0);
        power /= n * n;
    }
    head + tail
}

/// JSON description of a step law, e.g. `{"family":"crw","M":2,"c":1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum LawSpec {
    Crw {
        #[serde(rename = "M")]
        order: u32,
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail_tolerance: Option<f64>,
    },
    Jbeta {
        #[serde(rename = "M")]
        order: u32,
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail_tolerance: Option<f64>,
    },
    Powerlaw {
        #[serde(rename = "M")]
        order: u32,
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail_tolerance: Option<f64>,
    },
    Custom {
        #[serde(rename = "M")]
        order: u32,
        probs: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        #[serde(default)]
        monotone: bool,
        #[serde(default)]
        weak_tail: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        recurrent_at_critical: Option<bool>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail_tolerance: Option<f64>,
    },
}

impl LawSpec {
    pub fn build(&self) -> Result<StepLaw> {
        let (law, tol) = match self {
            LawSpec::Crw { order, c, tail_tolerance } => (StepLaw::crw(*order, *c)?, tail_tolerance),
            LawSpec::Jbeta { order, beta, tail_tolerance } => {
                (StepLaw::jbeta(*order, *beta)?, tail_tolerance)
            }
            LawSpec::Powerlaw { order, beta, tail_tolerance } => {
                (StepLaw::power_law(*order, *beta)?, tail_tolerance)
            }
            LawSpec::Custom {
                order,
                probs,
                a,
                monotone,
                weak_tail,
                recurrent_at_critical,
                tail_tolerance,
            } => (
                StepLaw::custom(
                    *order,
                    CustomLaw {
                        probs: probs.clone(),
                        ratio_limit: *a,
                        monotone: *monotone,
                        weak_tail: *weak_tail,
                        recurrent_at_critical: *recurrent_at_critical,
                    },
                )?,
                tail_tolerance,
            ),
        };
        match tol {
            Some(t) => law.with_tail_tolerance(*t),
            None => Ok(law),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn families() -> Vec<StepLaw> {
        let mut out = Vec::new();
        for m in [2, 3, 5] {
            for c in [0.5, 1.0, 1.5] {
                out.push(StepLaw::crw(m, c).unwrap());
            }
            for beta in [0.0, 1.0, 2.0] {
                out.push(StepLaw::jbeta(m, beta).unwrap());
            }
            out.push(StepLaw::power_law(m, 2.0).unwrap());
        }
        out
    }

    #[test]
    fn crw_step_and_tail() {
        let law = StepLaw::crw(2, 1.0).unwrap();
        assert_eq!(law.step_prob(3), 0.125);
        assert_eq!(law.tail(3), 0.125);
        assert_eq!(law.step_prob(0), 0.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(StepLaw::crw(2, 2.0).is_err());
        assert!(StepLaw::crw(2, 0.0).is_err());
        assert!(StepLaw::power_law(2, 1.0).is_err());
        assert!(StepLaw::jbeta(2, -0.1).is_err());
        assert!(StepLaw::crw(1, 0.5).is_err());
    }

    #[test]
    fn jbeta_zero_is_crw_one() {
        for m in [2, 3, 7] {
            let jb = StepLaw::jbeta(m, 0.0).unwrap();
            let crw = StepLaw::crw(m, 1.0).unwrap();
            assert_relative_eq!(jb.normalizer(), m as f64 - 1.0, max_relative = 1e-14);
            for j in 1..=50 {
                assert!((jb.step_prob(j) - crw.step_prob(j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn power_law_normalizer_matches_zeta_two() {
        let law = StepLaw::power_law(2, 2.0).unwrap();
        let d = 6.0 / std::f64::consts::PI.powi(2);
        assert!((law.normalizer() - d).abs() < 1e-14);
        // brute-force oracle: partial sum plus integral bracket on the rest
        let big = 2_000_000u64;
        let partial: f64 = (1..big).rev().map(|j| (j as f64).powi(-2)).sum();
        let lower = partial + 1.0 / big as f64;
        let upper = partial + 1.0 / (big as f64 - 1.0);
        assert!(lower / law.normalizer().recip() <= 1.0 + 1e-13);
        assert!(upper / law.normalizer().recip() >= 1.0 - 1e-13);
        assert!((law.normalizer() * (lower + upper) / 2.0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zeta_tail_inside_integral_bracket() {
        for beta in [1.1, 1.5, 2.0, 3.7] {
            for start in [1u64, 5, 31, 32, 33, 1000, 123_456] {
                let s = zeta_tail(beta, start);
                let n = start as f64;
                let lo = n.powf(1.0 - beta) / (beta - 1.0);
                let hi = lo + n.powf(-beta);
                assert!(s >= lo * (1.0 - 1e-15) && s <= hi * (1.0 + 1e-15), "beta={beta} start={start}");
                let next = zeta_tail(beta, start + 1);
                assert_relative_eq!(s - next, n.powf(-beta), max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn tail_identities_for_all_families() {
        for law in families() {
            assert_eq!(law.tail(0), 1.0);
            let mut partial = 0.0;
            for j in 1..=60 {
                partial += law.step_prob(j);
                assert!((partial + law.tail(j) - 1.0).abs() < 1e-12, "{:?} J={j}", law.family());
            }
            for l in 0..=40 {
                let diff = law.tail(l) - law.tail(l + 1);
                assert!((diff - law.step_prob(l + 1)).abs() < 1e-14, "{:?} L={l}", law.family());
            }
        }
    }

    #[test]
    fn table_and_formula_agree_at_boundary() {
        let law = StepLaw::power_law(3, 2.5).unwrap();
        let edge = TABLE_LEN as Radius;
        for l in edge - 3..edge + 3 {
            let diff = law.tail(l) - law.tail(l + 1);
            assert_relative_eq!(diff, law.step_prob(l + 1), max_relative = 1e-8);
        }
    }

    #[test]
    fn eigenvalue_examples() {
        let law = StepLaw::crw(2, 1.0).unwrap();
        assert_eq!(law.eigen_f(1), -0.5);
        assert_eq!(law.eigen_f(2), 0.25);
        assert!(law.eigen_f(40) > 0.99);
        for lw in families() {
            for k in 1..=80 {
                let f = lw.eigen_f(k);
                assert!((-1.0..=1.0).contains(&f));
            }
        }
    }

    #[test]
    fn ratio_limits() {
        for law in families() {
            let a = law.ratio_limit().unwrap();
            let ratio = law.step_prob(201) / law.step_prob(200);
            // polynomial prefactors shift the ratio by O(β/j)
            let tol = 2e-2;
            assert!((ratio - a).abs() < tol, "{:?}: {ratio} vs {a}", law.family());
            if a < 1.0 {
                let r = law.step_prob(201) / law.tail(200);
                assert!((r - (1.0 - a)).abs() < 1e-2, "{:?}", law.family());
            }
        }
    }

    #[test]
    fn walk_params_examples() {
        let p = StepLaw::crw(2, 1.0).unwrap().walk_params().unwrap();
        assert_eq!((p.a, p.b, p.theta, p.gamma), (0.5, 1.5, 1.0, 0.0));
        assert_eq!(p.classification, Classification::Critical { recurrent: Some(true) });

        let p = StepLaw::crw(3, 2.0).unwrap().walk_params().unwrap();
        let gamma = 2f64.ln() / 1.5f64.ln();
        assert_relative_eq!(p.gamma, gamma, max_relative = 1e-15);
        assert!((p.gamma - 1.70951).abs() < 1e-5);
        assert_relative_eq!(p.theta - 1.0, p.gamma, max_relative = 1e-12);
        assert_eq!(p.classification, Classification::Transient);

        let p = StepLaw::power_law(2, 2.0).unwrap().walk_params().unwrap();
        assert_eq!(p.a, 1.0);
        assert!(p.gamma.is_infinite() && p.theta.is_infinite());
        assert_eq!(p.classification, Classification::Transient);

        assert_eq!(
            StepLaw::crw(4, 0.7).unwrap().walk_params().unwrap().classification,
            Classification::Recurrent
        );
        for (beta, rec) in [(0.5, true), (1.0, true), (1.5, false)] {
            let p = StepLaw::jbeta(3, beta).unwrap().walk_params().unwrap();
            assert_eq!(p.gamma, 0.0);
            assert_eq!(p.classification.is_recurrent(), Some(rec));
        }
    }

    #[test]
    fn custom_law_requires_ratio_limit() {
        let law = StepLaw::custom(
            2,
            CustomLaw {
                probs: vec![0.5, 0.25, 0.25],
                ratio_limit: None,
                monotone: true,
                weak_tail: false,
                recurrent_at_critical: None,
            },
        )
        .unwrap();
        assert!(matches!(law.walk_params(), Err(Error::MissingRatioLimit(_))));
        assert_eq!(law.tail(1), 0.5);
        assert_eq!(law.tail(3), 0.0);
        assert_eq!(law.step_prob(4), 0.0);
        assert_eq!(law.eigen_f(5), 1.0);
        assert!(StepLaw::custom(
            2,
            CustomLaw {
                probs: vec![0.5, 0.4],
                ratio_limit: None,
                monotone: true,
                weak_tail: false,
                recurrent_at_critical: None
            }
        )
        .is_err());
    }

    #[test]
    fn radius_scale_examples() {
        let law = StepLaw::crw(2, 1.0).unwrap();
        assert_eq!(law.radius_scale(8).unwrap(), 3);
        assert!(law.radius_scale(0).is_err());
        for lw in families() {
            assert_eq!(lw.radius_scale(1).unwrap(), 0);
        }
        let a = 0.5;
        for i in 1..=30 {
            let n = 1u64 << i;
            let l = law.radius_scale(n).unwrap();
            let nh = n as f64 * law.tail(l);
            assert!((1.0..=1.0 / a + 0.01).contains(&nh), "n={n} nh={nh}");
        }
    }

    #[test]
    fn radius_scale_definition_and_closed_form() {
        for law in families() {
            for n in [1u64, 2, 3, 7, 100, 1536, 99_999, 1 << 20, 123_456_789] {
                let l = law.radius_scale(n).unwrap();
                assert!(law.tail(l) * n as f64 >= 1.0);
                assert!(law.tail(l + 1) * (n as f64) < 1.0);
                if let Some(closed) = law.radius_scale_closed_form(n) {
                    assert_eq!(closed, l, "{:?} n={n}", law.family());
                }
            }
        }
    }

    #[test]
    fn radius_scale_is_logarithmic_for_geometric_tails() {
        let ratio_at = |law: &StepLaw, n: u64| {
            let a = law.ratio_limit().unwrap();
            law.radius_scale(n).unwrap() as f64 / ((n as f64).ln() / (1.0 / a).ln())
        };
        for law in families() {
            if law.ratio_limit().unwrap() >= 1.0 {
                continue;
            }
            let small = ratio_at(&law, 1 << 20);
            let large = ratio_at(&law, 1 << 62);
            if matches!(law.family(), Family::Crw { .. }) {
                assert!((0.95..=1.05).contains(&large), "{:?}: {large}", law.family());
            } else {
                // polynomial prefactors give an O(log log n / log n) correction
                let improving = (large - 1.0).abs() <= (small - 1.0).abs();
                assert!(improving || (large - 1.0).abs() < 0.05, "{:?}", law.family());
                assert!((0.8..=1.3).contains(&large), "{:?}: {large}", law.family());
            }
        }
    }

    #[test]
    fn kappa_sequence_examples() {
        let law = StepLaw::crw(2, 1.0).unwrap();
        for i in 1..=30 {
            let n = law.kappa_sequence(1.0, i).unwrap();
            assert_eq!(n, 1 << i);
            let l = law.radius_scale(n).unwrap();
            assert_eq!(n as f64 * law.tail(l), 1.0);
        }
        let n = law.kappa_sequence(1.5, 10).unwrap();
        assert_eq!(n, 1536);
        assert_eq!(n as f64 * law.tail(law.radius_scale(n).unwrap()), 1.5);

        assert!(law.kappa_sequence(2.0, 3).is_err());
        assert!(law.kappa_sequence(0.9, 3).is_err());
        assert!(matches!(
            StepLaw::power_law(2, 2.0).unwrap().kappa_sequence(1.0, 3),
            Err(Error::CriticalRegime)
        ));

        let jb = StepLaw::jbeta(2, 1.0).unwrap();
        for kappa in [1.0, 1.3, 1.9] {
            let n = jb.kappa_sequence(kappa, 20).unwrap();
            let nh = n as f64 * jb.tail(jb.radius_scale(n).unwrap());
            assert!((nh - kappa).abs() < 1e-3, "kappa={kappa} nh={nh}");
        }
    }

    #[test]
    fn law_spec_json() {
        let law: LawSpec = serde_json::from_str(r#"{"family":"crw","M":2,"c":1.0}"#).unwrap();
        assert_eq!(law, StepLaw::crw(2, 1.0).unwrap().to_spec());
        let text = serde_json::to_string(&law).unwrap();
        assert_eq!(text, r#"{"family":"crw","M":2,"c":1.0}"#);
        assert!(serde_json::from_str::<LawSpec>(r#"{"family":"crw","M":2,"c":1.0,"x":1}"#).is_err());
        assert!(serde_json::from_str::<LawSpec>(r#"{"family":"levy","M":2}"#).is_err());
        let pl: LawSpec =
            serde_json::from_str(r#"{"family":"powerlaw","M":3,"beta":2.0,"tail_tolerance":1e-13}"#).unwrap();
        let built = pl.build().unwrap();
        assert_eq!(built.tail_tolerance(), 1e-13);
        assert_eq!(built.to_spec(), pl);
    }
}
