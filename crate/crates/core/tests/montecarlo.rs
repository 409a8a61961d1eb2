mod common;

use common::two_sample_p;
use hierwalk::fluct::{gaussian_paths, CovarianceSpec, GKappa, TimeShift};
use hierwalk::numbervar::variance_exact;
use hierwalk::par::{map_indexed, replica_rng};
use hierwalk::radial::radial_pmf;
use hierwalk::simulate::{
    count_sample, cov_with_se, estimate, joint_count_sample, mean_with_se, poisson_count_sample, walk_path,
    walk_path_with, CountSampler, PoissonCountSampler, ReplicaPlan, Statistic, Truncation, WalkMode,
};
use hierwalk::{Execution, StepLaw};
use proptest::prelude::*;

const DRAWS: usize = 100_000;

fn crw(m: u32, c: f64) -> StepLaw {
    StepLaw::crw(m, c).unwrap()
}

fn final_radii(law: &StepLaw, n: u64, mode: WalkMode, seed: u64) -> Vec<u64> {
    map_indexed(Execution::Parallel, DRAWS, |i| {
        let path = walk_path_with(law, n, mode, &mut replica_rng(seed, i as u64)).unwrap();
        *path.radii().last().unwrap()
    })
}

fn within_multinomial_bands(draws: &[u64], law: &StepLaw, n: u64) {
    let k_max = 12;
    let pmf = radial_pmf(law, n, k_max);
    let total = draws.len() as f64;
    for k in 0..=k_max {
        let seen = draws.iter().filter(|&&r| r == k).count() as f64;
        let p = pmf.pmf[k as usize];
        let sd = (total * p * (1.0 - p)).sqrt();
        assert!(
            (seen - total * p).abs() <= 4.0 * sd + 1e-9,
            "k={k}: saw {seen}, expected {}",
            total * p
        );
    }
}

#[test]
fn radius_histograms_match_radial_law() {
    for law in [crw(2, 1.0), StepLaw::power_law(3, 2.0).unwrap()] {
        for (mode, seed) in [(WalkMode::Element, 1), (WalkMode::Radial, 2)] {
            within_multinomial_bands(&final_radii(&law, 5, mode, seed), &law, 5);
        }
    }
}

#[test]
fn element_and_radial_walks_agree() {
    let law = crw(3, 1.5);
    let a = final_radii(&law, 5, WalkMode::Element, 3);
    let b = final_radii(&law, 5, WalkMode::Radial, 4);
    let p = two_sample_p(&a, &b);
    assert!(p > 1e-3, "p={p}");
}

#[test]
fn walk_paths_are_seeded() {
    let law = crw(2, 1.0);
    let a = walk_path(&law, 50, 9, WalkMode::Element).unwrap();
    assert_eq!(a, walk_path(&law, 50, 9, WalkMode::Element).unwrap());
    assert_eq!(a.radii().len(), 51);
}

#[test]
fn count_moments() {
    let law = crw(2, 1.0);
    let sampler = CountSampler::new(&law, 5, &[10], Truncation::default()).unwrap();
    let x: Vec<f64> = map_indexed(Execution::Parallel, DRAWS, |i| {
        sampler.sample(&mut replica_rng(21, i as u64))[0] as f64
    });
    let (mean, mse) = mean_with_se(&x);
    assert!((mean - 1024.0).abs() <= 4.0 * mse, "mean {mean} ± {mse}");
    let (var, vse) = cov_with_se(&x, &x);
    let exact = variance_exact(&law, 5, 10).unwrap().variance;
    assert!((var - exact).abs() <= 5.0 * vse, "var {var} ± {vse} vs {exact}");
}

#[test]
fn joint_marginals_match_single_counts() {
    let law = crw(2, 1.0);
    let joint = CountSampler::new(&law, 3, &[2, 4, 5], Truncation::default()).unwrap();
    let single = CountSampler::new(&law, 3, &[4], Truncation::default()).unwrap();
    let a: Vec<u64> = map_indexed(Execution::Parallel, DRAWS, |i| joint.sample(&mut replica_rng(31, i as u64))[1]);
    let b: Vec<u64> = map_indexed(Execution::Parallel, DRAWS, |i| single.sample(&mut replica_rng(32, i as u64))[0]);
    let p = two_sample_p(&a, &b);
    assert!(p > 1e-3, "p={p}");
}

#[test]
fn poisson_counts() {
    let sampler = PoissonCountSampler::new(3, &[4], 0.7).unwrap();
    let target = 0.7 * 81.0;
    let x: Vec<u64> = map_indexed(Execution::Parallel, DRAWS, |i| {
        sampler.sample(&mut replica_rng(41, i as u64))[0].value
    });
    let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let (mean, mse) = mean_with_se(&xf);
    let (var, vse) = cov_with_se(&xf, &xf);
    assert!((mean - target).abs() <= 4.0 * mse);
    assert!((var - target).abs() <= 4.0 * vse);
    assert!((0.95..=1.05).contains(&(var / mean)));

    // the law does not depend on the walk or on n
    let law = crw(3, 1.0);
    let at = |n: u64, seed: u64| -> Vec<u64> {
        (0..20_000)
            .map(|i| poisson_count_sample(&law, n, 4, 0.7, seed * 1_000_003 + i).unwrap().value)
            .collect()
    };
    let p = two_sample_p(&at(1, 1), &at(7, 2));
    assert!(p > 1e-3, "p={p}");
}

#[test]
fn estimates_are_reproducible_and_calibrated() {
    let law = crw(2, 1.0);
    let plan = ReplicaPlan::new(law.clone(), 5, Statistic::CountMean { radius: 8 }, 20_000, 5);
    let a = estimate(&plan).unwrap();
    assert_eq!(a, estimate(&plan).unwrap());
    assert_eq!(a, estimate(&plan.clone().with_exec(Execution::Serial)).unwrap());
    assert!(a.z_score.unwrap().abs() <= 4.0);

    let mut doubled = plan.clone();
    doubled.replicas *= 2;
    let b = estimate(&doubled).unwrap();
    let ratio = a.standard_error / b.standard_error;
    assert!((ratio / 2f64.sqrt() - 1.0).abs() <= 0.2, "ratio {ratio}");

    for statistic in [
        Statistic::CountVariance { radius: 8 },
        Statistic::FluctuationCov {
            s: 1.0,
            t: 2.0,
            shift: TimeShift::LogA { a: 0.5 },
        },
    ] {
        let plan = ReplicaPlan::new(law.clone(), 64, statistic, 20_000, 6);
        let r = estimate(&plan).unwrap();
        assert!(r.standard_error > 0.0);
        assert!(r.z_score.unwrap().abs() <= 4.0, "{r:?}");
    }
}

#[test]
fn gaussian_path_covariances() {
    let law = crw(2, 1.0);
    let g = GKappa::new(&law, 1.0).unwrap();
    let shift = TimeShift::LogA { a: 0.5 };
    let grid = [0.5, 1.0, 2.0, 4.0, 8.0];
    for spec in [
        CovarianceSpec::LimitKappa { g, shift: shift.clone() },
        CovarianceSpec::YProcess { theta: 1.0 },
        CovarianceSpec::FiniteN { law: law.clone(), n: 1024, shift },
    ] {
        let gram = spec.gram(&grid).unwrap();
        let paths = gaussian_paths(&spec, &grid, 17, DRAWS, Execution::Parallel).unwrap();
        let col = |c: usize| -> Vec<f64> { paths.iter().map(|p| p[c]).collect() };
        for i in 0..grid.len() {
            for j in i..grid.len() {
                let (c, se) = cov_with_se(&col(i), &col(j));
                assert!((c - gram[(i, j)]).abs() <= 4.0 * se, "{} ({i},{j}): {c} vs {}", spec.kind(), gram[(i, j)]);
            }
        }
    }
}

#[test]
fn single_point_grid() {
    let spec = CovarianceSpec::Critical {
        order: 3,
        shift: TimeShift::LogM { order: 3 },
        scale: 1.0,
    };
    let paths = gaussian_paths(&spec, &[9.0], 3, DRAWS, Execution::Parallel).unwrap();
    let x: Vec<f64> = paths.iter().map(|p| p[0]).collect();
    let (v, se) = cov_with_se(&x, &x);
    let target = spec.cov(9.0, 9.0).unwrap();
    assert!((v - target).abs() <= 4.0 * se);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn single_radius_joint_draw_is_count_draw(seed in any::<u64>(), n in 0u64..40, radius in 0u64..12) {
        let law = crw(3, 1.0);
        prop_assert_eq!(
            joint_count_sample(&law, n, &[radius], seed).unwrap()[0],
            count_sample(&law, n, radius, seed).unwrap()
        );
    }

    #[test]
    fn joint_counts_nested(seed in any::<u64>(), n in 1u64..200, base in 0u64..6, gaps in prop::collection::vec(1u64..3, 1..4)) {
        let law = crw(2, 1.0);
        let mut radii = vec![base];
        for g in gaps {
            radii.push(radii.last().unwrap() + g);
        }
        let counts = joint_count_sample(&law, n, &radii, seed).unwrap();
        prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn element_paths_stay_consistent(seed in any::<u64>(), n in 0u64..30) {
        let law = StepLaw::jbeta(3, 1.0).unwrap();
        let path = walk_path(&law, n, seed, WalkMode::Element).unwrap();
        let radii = path.radii();
        prop_assert_eq!(radii.len() as u64, n + 1);
        prop_assert_eq!(radii[0], 0);
    }
}
