//! Monte Carlo: single walks, exact draws of ball counts of the infinite
//! particle system, and replica estimation.
//!
//! Ball counts are drawn by grouping start sites into classes on which the
//! landing probabilities are constant (the ball `B_{L_1}` itself and every
//! shell `S_m` beyond it). Within a class the particles are independent and
//! identically distributed over "smallest target ball reached", so a single
//! multinomial draw per class reproduces the exact joint law.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal, Open01, Poisson};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fluct::{finite_n_cov, TimeShift};
use crate::hiergroup::{sample_sphere, GroupElement, Radius};
use crate::numbervar::variance_exact;
use crate::par::{map_indexed, replica_rng, Execution};
use crate::radial::Radial;
use crate::stepdist::StepLaw;

/// Largest expected count the samplers agree to produce.
pub const MAX_EXACT_COUNT: f64 = 9_007_199_254_740_992.0; // 2^53

/// Default bound on the expected number of particles ignored by truncation.
pub const DEFAULT_LEFTOVER: f64 = 1e-9;

const MAX_EXTRA_SHELLS: Radius = 4096;

/// `|ρ|` drawn by inversion of the tail function.
pub fn sample_step_radius<R: Rng + ?Sized>(law: &StepLaw, rng: &mut R) -> Radius {
    let v: f64 = Open01.sample(rng);
    // smallest j with h(j) <= v; h(0) = 1 > v
    let mut hi: Radius = 1;
    while law.tail(hi) > v {
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if law.tail(mid) > v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// One step `ρ`: a distance from the step law, then a uniform point at that
/// distance.
pub fn sample_step<R: Rng + ?Sized>(law: &StepLaw, rng: &mut R) -> Result<GroupElement> {
    let j = sample_step_radius(law, rng);
    sample_sphere(law.order(), j, rng)
}

/// Next radius of the radial chain after one step from radius `i`.
pub fn sample_radial_step<R: Rng + ?Sized>(law: &StepLaw, i: Radius, rng: &mut R) -> Radius {
    let j = sample_step_radius(law, rng);
    if j != i {
        return i.max(j);
    }
    let m = law.order();
    // same scale: the top digits differ unless they cancel
    if rng.random_range(0..m - 1) != 0 {
        return i;
    }
    // they cancelled, so the result is uniform on B_{i-1}
    let mut level = i - 1;
    while level > 0 {
        if rng.random_range(0..m) != 0 {
            return level;
        }
        level -= 1;
    }
    0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkMode {
    /// Track the group element.
    Element,
    /// Track only the distance from the start.
    Radial,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WalkPath {
    Element(Vec<GroupElement>),
    Radial(Vec<Radius>),
}

impl WalkPath {
    pub fn radii(&self) -> Vec<Radius> {
        match self {
            WalkPath::Element(p) => p.iter().map(GroupElement::norm).collect(),
            WalkPath::Radial(r) => r.clone(),
        }
    }
}

/// Path `ξ_0 = 0, ξ_1, …, ξ_n`.
pub fn walk_path_with<R: Rng + ?Sized>(law: &StepLaw, n: u64, mode: WalkMode, rng: &mut R) -> Result<WalkPath> {
    match mode {
        WalkMode::Element => {
            let mut pos = GroupElement::zero(law.order());
            let mut path = vec![pos.clone()];
            for _ in 0..n {
                pos = pos.add(&sample_step(law, rng)?)?;
                path.push(pos.clone());
            }
            Ok(WalkPath::Element(path))
        }
        WalkMode::Radial => {
            let mut r = 0;
            let mut path = vec![0];
            for _ in 0..n {
                r = sample_radial_step(law, r, rng);
                path.push(r);
            }
            Ok(WalkPath::Radial(path))
        }
    }
}

pub fn walk_path(law: &StepLaw, n: u64, seed: u64, mode: WalkMode) -> Result<WalkPath> {
    walk_path_with(law, n, mode, &mut replica_rng(seed, 0))
}

/// `Binomial(n, p)` with the degenerate cases handled up front.
pub fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("p in (0, 1)").sample(rng)
}

/// Exact `Poisson(mean)`; zero mean gives 0.
fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|_| Error::Overflow("Poisson mean"))?;
    Ok(d.sample(rng) as u64)
}

/// How far out the start-site classes are followed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Truncation {
    /// Stop once the expected number of ignored particles reaching the
    /// largest ball falls below `leftover`.
    Auto { leftover: f64 },
    /// Only start sites within `extra` levels of the largest ball: the
    /// particle system restricted to a finite box.
    Box { extra: Radius },
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Auto {
            leftover: DEFAULT_LEFTOVER,
        }
    }
}

/// Start sites sharing one landing law.
#[derive(Debug, Clone)]
struct SiteClass {
    population: u128,
    /// `outcomes[i]`: probability that the smallest target ball reached is
    /// `B_{L_i}`; the last entry is "none of them".
    outcomes: Vec<f64>,
}

impl SiteClass {
    /// Adds the class's contribution to the per-outcome tallies.
    fn draw<R: Rng + ?Sized>(&self, tallies: &mut [u64], rng: &mut R) {
        let k = tallies.len();
        if self.population > u64::MAX as u128 {
            // such huge classes only arise far out, where every landing
            // probability is tiny; split a Poisson total by thinning
            let reach: f64 = self.outcomes[..k].iter().sum();
            let total = poisson(self.population as f64 * reach, rng).expect("mean below the Poisson limit");
            multinomial(total, &self.outcomes[..k], reach, tallies, rng);
            return;
        }
        let n = self.population as u64;
        multinomial(n, &self.outcomes[..k], 1.0, tallies, rng);
    }
}

/// Splits `n` items over cells with probabilities `probs` (summing to at most
/// `total`; the rest is discarded) by conditional binomials.
fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], total: f64, tallies: &mut [u64], rng: &mut R) {
    let mut left = n;
    let mut mass = total;
    for (cell, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        let x = binomial(left, p / mass, rng);
        tallies[cell] += x;
        left -= x;
        mass -= p;
        if mass <= 0.0 {
            break;
        }
    }
}

/// Exact sampler of `(N_n(L_1), …, N_n(L_k))` for the system started with
/// one particle per site.
#[derive(Debug, Clone)]
pub struct CountSampler {
    radii: Vec<Radius>,
    classes: Vec<SiteClass>,
    leftover: f64,
    outermost: Radius,
}

impl CountSampler {
    pub fn new(law: &StepLaw, n: u64, radii: &[Radius], truncation: Truncation) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::InvalidParameter("need at least one radius".into()));
        }
        if radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("radii must be strictly increasing".into()));
        }
        let m = law.order();
        let mf = m as f64;
        let top = *radii.last().expect("non-empty");
        let mass = mf.powf(top as f64);
        if mass > MAX_EXACT_COUNT {
            return Err(Error::Overflow("expected ball count above 2^53"));
        }
        let rad = Radial::new(law, n);
        let outermost = match truncation {
            Truncation::Box { extra } => top + extra,
            Truncation::Auto { leftover } => {
                let mut r = top;
                while mass * rad.tail(r) >= leftover {
                    r += 1;
                    if r > top + MAX_EXTRA_SHELLS {
                        return Err(Error::ShellTruncation { tol: leftover, radius: r });
                    }
                }
                r
            }
        };
        let leftover = mass * rad.tail(outermost);

        let k = radii.len();
        let tails: Vec<f64> = radii.iter().map(|&l| rad.tail(l)).collect();
        let mut classes = Vec::new();
        // the innermost ball: every site lands like the origin does
        let mut inner = vec![0.0; k + 1];
        inner[0] = 1.0 - tails[0];
        for i in 1..k {
            inner[i] = tails[i - 1] - tails[i];
        }
        inner[k] = tails[k - 1];
        classes.push(SiteClass {
            population: (m as u128).pow(radii[0] as u32),
            outcomes: inner,
        });
        for start in radii[0] + 1..=outermost {
            let shell = mf - 1.0;
            let shell_p = rad.pmf_at(start);
            // P(u + ξ ∈ B_L) for |u| = start
            let reach = |l: Radius, tail: f64| {
                if start <= l {
                    1.0 - tail
                } else {
                    shell_p / (shell * mf.powf((start - l - 1) as f64))
                }
            };
            let mut outcomes = Vec::with_capacity(k + 1);
            let mut prev = 0.0;
            for i in 0..k {
                let p = reach(radii[i], tails[i]);
                let q = if i > 0 && start <= radii[i - 1] {
                    tails[i - 1] - tails[i]
                } else {
                    p - prev
                };
                outcomes.push(q.max(0.0));
                prev = p;
            }
            outcomes.push((1.0 - prev).max(0.0));
            let population = (m as u128 - 1)
                .checked_mul((m as u128).checked_pow((start - 1) as u32).ok_or(Error::Overflow("shell size"))?)
                .ok_or(Error::Overflow("shell size"))?;
            classes.push(SiteClass { population, outcomes });
        }
        Ok(Self {
            radii: radii.to_vec(),
            classes,
            leftover,
            outermost,
        })
    }

    pub fn radii(&self) -> &[Radius] {
        &self.radii
    }

    /// Expected number of particles landing in the largest ball that the
    /// truncation leaves out.
    pub fn leftover(&self) -> f64 {
        self.leftover
    }

    /// Largest start radius included.
    pub fn outermost(&self) -> Radius {
        self.outermost
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        let k = self.radii.len();
        let mut tallies = vec![0u64; k];
        for class in &self.classes {
            class.draw(&mut tallies, rng);
        }
        // smallest-ball tallies to nested counts
        for i in 1..k {
            tallies[i] += tallies[i - 1];
        }
        tallies
    }
}

/// One draw of `N_n(L)`.
pub fn count_sample(law: &StepLaw, n: u64, radius: Radius, seed: u64) -> Result<u64> {
    Ok(joint_count_sample(law, n, &[radius], seed)?[0])
}

/// One joint draw of `(N_n(L_1), …, N_n(L_k))` for increasing radii.
pub fn joint_count_sample(law: &StepLaw, n: u64, radii: &[Radius], seed: u64) -> Result<Vec<u64>> {
    let sampler = CountSampler::new(law, n, radii, Truncation::default())?;
    Ok(sampler.sample(&mut replica_rng(seed, 0)))
}

/// A count together with whether it came from the normal approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PoissonCount {
    pub value: u64,
    pub approximate: bool,
}

/// Sampler of ball counts when the initial occupation numbers are i.i.d.
/// Poisson with mean `lambda`. The configuration stays a Poisson field of
/// intensity `lambda` at every time, so nested counts are sums of
/// independent Poisson increments whatever the walk and `n`.
#[derive(Debug, Clone)]
pub struct PoissonCountSampler {
    means: Vec<f64>,
}

impl PoissonCountSampler {
    pub fn new(order: u32, radii: &[Radius], lambda: f64) -> Result<Self> {
        crate::hiergroup::check_order(order)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("Poisson intensity must be nonnegative, got {lambda}")));
        }
        if radii.is_empty() || radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("radii must be non-empty and strictly increasing".into()));
        }
        let m = order as f64;
        let mut prev = 0.0;
        let mut means = Vec::with_capacity(radii.len());
        for &l in radii {
            let ball = m.powf(l as f64);
            means.push(lambda * (ball - prev));
            prev = ball;
        }
        if lambda * prev > u64::MAX as f64 / 2.0 {
            return Err(Error::Overflow("Poisson ball count"));
        }
        Ok(Self { means })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<PoissonCount> {
        let mut acc = PoissonCount {
            value: 0,
            approximate: false,
        };
        self.means
            .iter()
            .map(|&mean| {
                // above 2^53 the f64 draws no longer resolve single particles
                let inc = if mean <= MAX_EXACT_COUNT {
                    poisson(mean, rng).expect("mean below the Poisson limit")
                } else {
                    acc.approximate = true;
                    let z = Normal::new(mean, mean.sqrt()).expect("finite mean").sample(rng);
                    z.round().max(0.0) as u64
                };
                acc.value += inc;
                acc
            })
            .collect()
    }
}

/// One draw of `N_n(L)` under a Poisson(`lambda`) initial configuration.
pub fn poisson_count_sample(law: &StepLaw, _n: u64, radius: Radius, lambda: f64, seed: u64) -> Result<PoissonCount> {
    let sampler = PoissonCountSampler::new(law.order(), &[radius], lambda)?;
    Ok(sampler.sample(&mut replica_rng(seed, 0))[0])
}

/// What a replica run estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    /// `E N_n(L)`.
    CountMean { radius: Radius },
    /// `Var N_n(L)`.
    CountVariance { radius: Radius },
    /// `Cov(X_n(s), X_n(t))`.
    FluctuationCov { s: f64, t: f64, shift: TimeShift },
    PoissonMean { radius: Radius, lambda: f64 },
    PoissonVariance { radius: Radius, lambda: f64 },
    PoissonFluctuationCov { s: f64, t: f64, shift: TimeShift, lambda: f64 },
}

#[derive(Debug, Clone)]
pub struct ReplicaPlan {
    pub law: StepLaw,
    pub n: u64,
    pub statistic: Statistic,
    pub replicas: usize,
    pub base_seed: u64,
    pub truncation: Truncation,
    pub exec: Execution,
}

impl ReplicaPlan {
    pub fn new(law: StepLaw, n: u64, statistic: Statistic, replicas: usize, base_seed: u64) -> Self {
        Self {
            law,
            n,
            statistic,
            replicas,
            base_seed,
            truncation: Truncation::default(),
            exec: Execution::default(),
        }
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub statistic: Statistic,
    pub estimate: f64,
    /// Jackknife standard error.
    pub standard_error: f64,
    pub replicas: usize,
    pub reference: Option<f64>,
    pub z_score: Option<f64>,
    /// Whether any draw used the normal approximation.
    pub approximate: bool,
}

/// The draws behind a replica plan: one row per replica.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub rows: Vec<Vec<u64>>,
    pub approximate: bool,
}

fn resolved_radii(plan: &ReplicaPlan) -> Result<(Vec<Radius>, f64)> {
    let fluct_radii = |s: f64, t: f64, shift: &TimeShift| -> Result<(Vec<Radius>, f64)> {
        let base = plan.law.radius_scale(plan.n.max(1))?;
        let at = |x: f64| -> Result<Radius> { Ok((base as i64 + shift.eval(x)?).max(0) as Radius) };
        let (a, b) = (at(s.min(t))?, at(s.max(t))?);
        let norm = (plan.law.order() as f64).powf(base as f64);
        Ok((if a == b { vec![a] } else { vec![a, b] }, norm))
    };
    match &plan.statistic {
        Statistic::CountMean { radius }
        | Statistic::CountVariance { radius }
        | Statistic::PoissonMean { radius, .. }
        | Statistic::PoissonVariance { radius, .. } => Ok((vec![*radius], 1.0)),
        Statistic::FluctuationCov { s, t, shift } | Statistic::PoissonFluctuationCov { s, t, shift, .. } => {
            fluct_radii(*s, *t, shift)
        }
    }
}

/// Runs the replicas of a plan; replica `i` uses the stream `(base_seed, i)`.
pub fn draw_replicas(plan: &ReplicaPlan) -> Result<Draws> {
    let (radii, _) = resolved_radii(plan)?;
    let lambda = match &plan.statistic {
        Statistic::PoissonMean { lambda, .. }
        | Statistic::PoissonVariance { lambda, .. }
        | Statistic::PoissonFluctuationCov { lambda, .. } => Some(*lambda),
        _ => None,
    };
    let seed = plan.base_seed;
    match lambda {
        None => {
            let sampler = CountSampler::new(&plan.law, plan.n, &radii, plan.truncation)?;
            let rows = map_indexed(plan.exec, plan.replicas, |i| sampler.sample(&mut replica_rng(seed, i as u64)));
            Ok(Draws {
                rows,
                approximate: false,
            })
        }
        Some(lambda) => {
            let sampler = PoissonCountSampler::new(plan.law.order(), &radii, lambda)?;
            let rows = map_indexed(plan.exec, plan.replicas, |i| sampler.sample(&mut replica_rng(seed, i as u64)));
            let approximate = rows.iter().flatten().any(|c| c.approximate);
            Ok(Draws {
                rows: rows.into_iter().map(|r| r.into_iter().map(|c| c.value).collect()).collect(),
                approximate,
            })
        }
    }
}

/// Estimate, jackknife standard error and exact reference for a plan.
pub fn estimate(plan: &ReplicaPlan) -> Result<EstimateReport> {
    let draws = draw_replicas(plan)?;
    summarize(plan, &draws)
}

/// Computes the report for draws produced by [`draw_replicas`].
pub fn summarize(plan: &ReplicaPlan, draws: &Draws) -> Result<EstimateReport> {
    let n_rep = draws.rows.len();
    let (_, norm) = resolved_radii(plan)?;
    let column = |c: usize| -> Vec<f64> {
        draws
            .rows
            .iter()
            .map(|r| r[c.min(r.len() - 1)] as f64)
            .collect()
    };
    let needs = |min: usize| -> Result<()> {
        if n_rep < min {
            return Err(Error::InvalidParameter(format!(
                "this statistic needs at least {min} replicas, got {n_rep}"
            )));
        }
        Ok(())
    };
    let law = &plan.law;
    let m = law.order() as f64;
    let (estimate, se, reference) = match &plan.statistic {
        Statistic::CountMean { radius } => {
            needs(2)?;
            let (est, se) = mean_with_se(&column(0));
            (est, se, Some(m.powf(*radius as f64)))
        }
        Statistic::PoissonMean { radius, lambda } => {
            needs(2)?;
            let (est, se) = mean_with_se(&column(0));
            (est, se, Some(lambda * m.powf(*radius as f64)))
        }
        Statistic::CountVariance { radius } => {
            needs(3)?;
            let x = column(0);
            let (est, se) = cov_with_se(&x, &x);
            (est, se, Some(variance_exact(law, plan.n, *radius)?.variance))
        }
        Statistic::PoissonVariance { radius, lambda } => {
            needs(3)?;
            let x = column(0);
            let (est, se) = cov_with_se(&x, &x);
            (est, se, Some(lambda * m.powf(*radius as f64)))
        }
        Statistic::FluctuationCov { s, t, shift } => {
            needs(3)?;
            let (est, se) = cov_with_se(&column(0), &column(1));
            let exact = if plan.n >= 1 {
                Some(finite_n_cov(law, plan.n, *s, *t, shift)?)
            } else {
                None
            };
            (est / norm, se / norm, exact)
        }
        Statistic::PoissonFluctuationCov { lambda, .. } => {
            needs(3)?;
            let (est, se) = cov_with_se(&column(0), &column(1));
            let (radii, _) = resolved_radii(plan)?;
            (est / norm, se / norm, Some(lambda * m.powf(radii[0] as f64) / norm))
        }
    };
    let z_score = match reference {
        Some(r) if se > 0.0 => Some((estimate - r) / se),
        _ => None,
    };
    Ok(EstimateReport {
        statistic: plan.statistic.clone(),
        estimate,
        standard_error: se,
        replicas: n_rep,
        reference,
        z_score,
        approximate: draws.approximate,
    })
}

/// Neumaier-compensated sum in slice order.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean and its standard error (the jackknife SE of a mean is the
/// usual `sd / sqrt(N)`).
pub fn mean_with_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = compensated_sum(x.iter().copied()) / n;
    let ss = compensated_sum(x.iter().map(|v| (v - mean) * (v - mean)));
    (mean, (ss / (n - 1.0) / n).sqrt())
}

/// Unbiased sample covariance and its jackknife standard error.
///
/// Each leave-one-out estimate is `((N-1) c - N/(N-1) d_i e_i) / (N-2)` with
/// `d, e` the deviations from the full-sample means, so the jackknife costs
/// one extra pass.
pub fn cov_with_se(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = compensated_sum(x.iter().copied()) / n;
    let my = compensated_sum(y.iter().copied()) / n;
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let c = compensated_sum(prods.iter().copied()) / (n - 1.0);
    let loo: Vec<f64> = prods
        .iter()
        .map(|p| ((n - 1.0) * c - n / (n - 1.0) * p) / (n - 2.0))
        .collect();
    let loo_mean = compensated_sum(loo.iter().copied()) / n;
    let spread = compensated_sum(loo.iter().map(|v| (v - loo_mean) * (v - loo_mean)));
    (c, ((n - 1.0) / n * spread).sqrt())
}
