//! Law of the distance `|ξ_n|` of an n-step walk from its start.
//!
//! Two independent routes are provided:
//!
//! * the eigenvalue series `P(|ξ_n| = k) = (M-1)/M Σ_j (f^n_{j+k+1} - f^n_{j+k}) / M^j`
//!   and its tail counterpart, evaluated with certified truncation;
//! * a dynamic program over the radial chain, whose one-step kernel follows
//!   from ultrametric geometry alone.

use crate::error::{Error, Result};
use crate::hiergroup::{ball_size, sphere_size, Radius};
use crate::par::{map_indexed, Execution};
use crate::stepdist::StepLaw;

/// Default relative tolerance for truncating the eigenvalue series.
pub const DEFAULT_SERIES_TOLERANCE: f64 = 1e-14;

/// Target for the oracle's bound on mass lost through its radius cutoff.
pub const ORACLE_TOLERANCE: f64 = 1e-13;

const MAX_SERIES_TERMS: u64 = 100_000;
const TINY: f64 = 1e-290;
const MAX_ORACLE_CUTOFF: Radius = 1 << 26;

/// Probabilities of `|ξ_n| = k` for `k = 0..=K`, plus the mass beyond `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialLaw {
    pub n: u64,
    pub pmf: Vec<f64>,
    /// `P(|ξ_n| > K)`.
    pub tail: f64,
    /// Bound on the absolute error of each entry from truncation.
    pub error_bound: f64,
}

impl RadialLaw {
    pub fn k_max(&self) -> Radius {
        self.pmf.len() as Radius - 1
    }

    pub fn total_mass(&self) -> f64 {
        self.pmf.iter().sum::<f64>() + self.tail
    }
}

/// Radial quantities of the n-step walk for one step law.
#[derive(Debug, Clone, Copy)]
pub struct Radial<'a> {
    law: &'a StepLaw,
    n: u64,
    tol: f64,
}

impl<'a> Radial<'a> {
    pub fn new(law: &'a StepLaw, n: u64) -> Self {
        Self {
            law,
            n,
            tol: DEFAULT_SERIES_TOLERANCE,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn law(&self) -> &'a StepLaw {
        self.law
    }

    pub fn steps(&self) -> u64 {
        self.n
    }

    fn m(&self) -> f64 {
        self.law.order() as f64
    }

    /// `1 - f_k^n`, accurate when `f_k` is close to 1.
    pub fn one_minus_fpow(&self, k: Radius) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let gap = self.law.eigen_gap(k);
        if gap <= 1.0 {
            -(self.n as f64 * (-gap).ln_1p()).exp_m1()
        } else {
            // f_k < 0
            let mag = (gap - 1.0).powf(self.n as f64);
            if self.n.is_multiple_of(2) {
                1.0 - mag
            } else {
                1.0 + mag
            }
        }
    }

    /// Bound on `1 - f_i^n` over all `i > from`.
    fn envelope(&self, from: Radius) -> f64 {
        let m = self.m();
        (self.n as f64 * m / (m - 1.0) * self.law.tail(from)).min(2.0)
    }

    /// `P(|ξ_n| = k)` for `k >= 1` by the eigenvalue series; `k = 0` by
    /// complement of the tail.
    pub fn pmf_at(&self, k: Radius) -> f64 {
        if self.n == 0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        if k == 0 {
            return 1.0 - self.tail(0);
        }
        let m = self.m();
        let mut sum = 0.0;
        let mut weight = 1.0;
        let mut lower = self.one_minus_fpow(k);
        for j in 0..MAX_SERIES_TERMS {
            let upper = self.one_minus_fpow(j + k + 1);
            sum += weight * (lower - upper);
            lower = upper;
            weight /= m;
            // remainder after terms 0..=j
            if weight * self.envelope(j + k) <= self.tol * sum.abs().max(TINY) {
                break;
            }
        }
        (m - 1.0) / m * sum
    }

    /// `P(|ξ_n| > L)`.
    pub fn tail(&self, radius: Radius) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let m = self.m();
        let mut sum = 0.0;
        let mut weight = 1.0;
        for j in 0..MAX_SERIES_TERMS {
            sum += weight * self.one_minus_fpow(radius + j + 1);
            weight /= m;
            if weight * self.envelope(radius + j + 1) <= self.tol * sum.max(TINY) {
                break;
            }
        }
        (m - 1.0) / m * sum
    }

    /// `P(|ξ_n| <= L)`.
    pub fn cdf(&self, radius: Radius) -> f64 {
        1.0 - self.tail(radius)
    }

    /// Law of `|ξ_n|` on `0..=K`, entries evaluated under `exec`.
    pub fn pmf_with(&self, k_max: Radius, exec: Execution) -> RadialLaw {
        let mut pmf = vec![0.0; k_max as usize + 1];
        if self.n == 0 {
            pmf[0] = 1.0;
            return RadialLaw {
                n: 0,
                pmf,
                tail: 0.0,
                error_bound: 0.0,
            };
        }
        let entries = map_indexed(exec, k_max as usize, |i| self.pmf_at(i as Radius + 1));
        pmf[1..].copy_from_slice(&entries);
        let tail = self.tail(k_max);
        pmf[0] = 1.0 - entries.iter().sum::<f64>() - tail;
        RadialLaw {
            n: self.n,
            pmf,
            tail,
            error_bound: self.tol * (k_max as f64 + 2.0),
        }
    }

    pub fn pmf(&self, k_max: Radius) -> RadialLaw {
        self.pmf_with(k_max, Execution::Serial)
    }

    /// `p^u_n(L) = P(u + ξ_n ∈ B_L)` for a start point with `|u| = m`.
    pub fn entry_prob(&self, start_radius: Radius, radius: Radius) -> f64 {
        if start_radius <= radius {
            return self.cdf(radius);
        }
        let k = start_radius - radius;
        let shell = (self.m() - 1.0) * self.m().powf(k as f64 - 1.0);
        self.pmf_at(start_radius) / shell
    }

    /// Lower and upper bounds on `P(|ξ_n| > L)` from the maximal-jump argument.
    pub fn tail_bounds(&self, radius: Radius) -> (f64, f64) {
        let h = self.law.tail(radius);
        let n = self.n as f64;
        if self.n == 0 {
            return (0.0, 0.0);
        }
        if self.n == 1 {
            return (h, h);
        }
        let log_stay = (-h).ln_1p();
        let lower = n * ((n - 1.0) * log_stay).exp() * h;
        let upper = -(n * log_stay).exp_m1();
        (lower, upper)
    }
}

/// `P(|ξ_n| = k)` for `k = 0..=K`.
pub fn radial_pmf(law: &StepLaw, n: u64, k_max: Radius) -> RadialLaw {
    Radial::new(law, n).pmf(k_max)
}

pub fn radial_tail(law: &StepLaw, n: u64, radius: Radius) -> f64 {
    Radial::new(law, n).tail(radius)
}

pub fn entry_prob(law: &StepLaw, n: u64, start_radius: Radius, radius: Radius) -> f64 {
    Radial::new(law, n).entry_prob(start_radius, radius)
}

pub fn tail_bounds(law: &StepLaw, n: u64, radius: Radius) -> (f64, f64) {
    Radial::new(law, n).tail_bounds(radius)
}

/// Where a uniform step of size `i` from a point at radius `i` lands, as
/// exact point counts indexed by the new radius `0..=i`. The counts sum to
/// `|S_i| = (M-1) M^(i-1)`.
pub fn same_scale_counts(order: u32, i: Radius) -> Result<Vec<u128>> {
    let total = sphere_size(order, i)?;
    let m = order as u128;
    let mut counts = Vec::with_capacity(i as usize + 1);
    counts.push(1);
    for level in 1..i {
        counts.push((m - 1) * ball_size(order, level - 1)?);
    }
    counts.push((m - 2) * ball_size(order, i - 1)?);
    debug_assert_eq!(counts.iter().sum::<u128>(), total);
    Ok(counts)
}

/// One row of the radial chain's transition kernel, truncated at `cut`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    /// Probability of each next radius `0..=cut`.
    pub probs: Vec<f64>,
    /// Probability of jumping beyond `cut`.
    pub beyond: f64,
}

/// Next-radius law after one step from radius `i`.
pub fn step_radius_kernel(law: &StepLaw, i: Radius, cut: Radius) -> Result<KernelRow> {
    if i > cut {
        return Err(Error::InvalidParameter(format!(
            "kernel row {i} lies beyond the cutoff {cut}"
        )));
    }
    let m = law.order() as f64;
    let mut probs = vec![0.0; cut as usize + 1];
    for j in 1..=cut {
        let r = law.step_prob(j);
        if j != i {
            probs[i.max(j) as usize] += r;
        } else {
            probs[0] += r * m.powf(1.0 - i as f64) / (m - 1.0);
            for level in 1..i {
                probs[level as usize] += r * m.powf(level as f64 - i as f64);
            }
            probs[i as usize] += r * (m - 2.0) / (m - 1.0);
        }
    }
    Ok(KernelRow {
        probs,
        beyond: law.tail(cut),
    })
}

/// Result of the radial-chain dynamic program.
#[derive(Debug, Clone)]
pub struct OracleRun {
    /// `laws[n]` is the law after `n` steps.
    pub laws: Vec<RadialLaw>,
    /// Largest radius tracked individually.
    pub cutoff: Radius,
    /// Mass parked beyond the cutoff after the last step.
    pub parked: f64,
}

/// Bound on the mass that can return from beyond `cut` in one step:
/// `sup_{i > cut} r_i M^(cut+1-i) / (M-1)`.
fn return_rate(law: &StepLaw, cut: Radius) -> f64 {
    const LOOKAHEAD: u32 = 64;
    let m = law.order() as f64;
    let mut worst: f64 = 0.0;
    let mut scale = 1.0;
    for d in 1..=LOOKAHEAD {
        worst = worst.max(law.step_prob(cut + d as Radius) * scale);
        scale /= m;
    }
    worst = worst.max(law.tail(cut + LOOKAHEAD as Radius) * scale);
    worst / (m - 1.0)
}

fn oracle_cutoff(law: &StepLaw, n_max: u64, k_max: Radius) -> Result<Radius> {
    let n = n_max as f64;
    let mut cut = (k_max + 1).max(8);
    loop {
        let bound = 0.5 * n * n * law.tail(cut) * return_rate(law, cut);
        if bound <= ORACLE_TOLERANCE {
            return Ok(cut);
        }
        cut *= 2;
        if cut > MAX_ORACLE_CUTOFF {
            return Err(Error::ShellTruncation {
                tol: ORACLE_TOLERANCE,
                radius: cut,
            });
        }
    }
}

/// Runs the radial chain from radius 0 for `n_max` steps, recording the law
/// on `0..=K` after every step.
///
/// Radii above an internal cutoff are parked in an absorbing bucket. The
/// cutoff is chosen so that the mass which could have come back from the
/// bucket, at most `n²/2 · h(cut) · sup_{i>cut} r_i M^(cut+1-i)/(M-1)`, is
/// below [`ORACLE_TOLERANCE`].
pub fn radial_pmf_oracle_sequence(law: &StepLaw, n_max: u64, k_max: Radius) -> Result<OracleRun> {
    let cut = oracle_cutoff(law, n_max.max(1), k_max)?;
    let len = cut as usize + 1;
    let m = law.order() as f64;
    let r: Vec<f64> = (0..len).map(|j| law.step_prob(j as Radius)).collect();
    let stay: Vec<f64> = (0..len)
        .map(|i| match i {
            0 => 0.0,
            _ => law.cdf(i as Radius - 1) + r[i] * (m - 2.0) / (m - 1.0),
        })
        .collect();
    let escape = law.tail(cut);
    let error_bound = {
        let n = n_max as f64;
        0.5 * n * n * escape * return_rate(law, cut)
    };

    let mut dist = vec![0.0; len];
    dist[0] = 1.0;
    let mut parked = 0.0;
    let mut next = vec![0.0; len];
    let mut laws = Vec::with_capacity(n_max as usize + 1);
    let snapshot = |dist: &[f64], parked: f64, n: u64| {
        let pmf = dist[..=k_max as usize].to_vec();
        let tail = dist[k_max as usize + 1..].iter().sum::<f64>() + parked;
        RadialLaw {
            n,
            pmf,
            tail,
            error_bound: if n == 0 { 0.0 } else { error_bound },
        }
    };
    laws.push(snapshot(&dist, parked, 0));

    for step in 1..=n_max {
        // downward moves: carry(m) = Σ_{i>m} dist[i] r_i M^(m-i)
        let mut carry = 0.0;
        for i in (1..len).rev() {
            next[i] = carry;
            carry = (carry + dist[i] * r[i]) / m;
        }
        next[0] = carry * m / (m - 1.0);
        // upward jumps and staying put
        let mut below = 0.0;
        for i in 0..len {
            if i > 0 {
                next[i] += r[i] * below + dist[i] * stay[i];
            }
            below += dist[i];
        }
        parked += escape * below;
        std::mem::swap(&mut dist, &mut next);
        laws.push(snapshot(&dist, parked, step));
    }
    Ok(OracleRun {
        laws,
        cutoff: cut,
        parked,
    })
}

/// Law of `|ξ_n|` on `0..=K` from the radial-chain dynamic program.
pub fn radial_pmf_oracle(law: &StepLaw, n: u64, k_max: Radius) -> Result<RadialLaw> {
    let mut run = radial_pmf_oracle_sequence(law, n, k_max)?;
    Ok(run.laws.pop().expect("at least the initial law"))
}
