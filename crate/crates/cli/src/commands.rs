use std::io::Write;

use hierwalk::fluct::{
    finite_n_cov_detail, gaussian_paths, limit_cov, limit_cov_critical, lrd_scan, zeta_cov_check_with,
    CovarianceSpec, GKappa, TimeShift,
};
use hierwalk::numbervar::{variance_exact_with, variance_limit, Limit, DEFAULT_SHELL_TOLERANCE};
use hierwalk::radial::{radial_pmf_oracle, Radial, DEFAULT_SERIES_TOLERANCE};
use hierwalk::simulate::{draw_replicas, summarize, ReplicaPlan, Statistic, Truncation};
use hierwalk::{Execution, StepLaw};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Grid, MRange, ProcessKind, StatisticKind};
use crate::output::{fmt_f64, write_sidecar, Table};
use crate::{CliError, Command};

/// What a command produced.
pub struct Report {
    pub table: Table,
    /// Machine-readable summary for the sidecar.
    pub summary: Value,
    /// Human-readable summary lines.
    pub lines: Vec<String>,
}

pub fn execute(command: Command, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let report = build(command, cfg)?;
    match &cfg.out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| CliError::Failure(format!("creating {}: {e}", path.display())))?;
            report.table.write(std::io::BufWriter::new(file))?;
            let doc = json!({
                "tool": "hrw",
                "version": env!("CARGO_PKG_VERSION"),
                "command": command.name(),
                "seed": seed(cfg),
                "config": cfg,
                "summary": report.summary,
            });
            write_sidecar(path, &doc)?;
            let mut stdout = std::io::stdout().lock();
            for line in &report.lines {
                let _ = writeln!(stdout, "{line}");
            }
        }
        None => {
            report.table.write(std::io::stdout().lock())?;
            for line in &report.lines {
                eprintln!("{line}");
            }
        }
    }
    Ok(())
}

/// Runs a command without writing anything.
pub fn build(command: Command, cfg: &ExperimentConfig) -> Result<Report, CliError> {
    match command {
        Command::Walkinfo => walkinfo(cfg),
        Command::Radial => radial(cfg),
        Command::VarianceScan => variance_scan(cfg),
        Command::FluctCov => fluct_cov(cfg),
        Command::Gkappa => gkappa(cfg),
        Command::Simulate => simulate(cfg),
        Command::SampleLimit => sample_limit(cfg),
    }
}

fn seed(cfg: &ExperimentConfig) -> u64 {
    cfg.seed.unwrap_or(0)
}

fn law(cfg: &ExperimentConfig) -> Result<StepLaw, CliError> {
    let spec = cfg
        .law
        .as_ref()
        .ok_or_else(|| CliError::Config("no step law: pass --law or put `law` in the config".into()))?;
    Ok(spec.build()?)
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

/// The ratio limit when it is below 1, where the κ-limits live.
fn subcritical_ratio(law: &StepLaw) -> Option<f64> {
    law.ratio_limit().filter(|&a| a < 1.0)
}

fn default_shift(law: &StepLaw) -> TimeShift {
    match subcritical_ratio(law) {
        Some(a) => TimeShift::LogA { a },
        None => TimeShift::LogM { order: law.order() },
    }
}

fn shift(cfg: &ExperimentConfig, law: &StepLaw) -> Result<TimeShift, CliError> {
    let shift = cfg.shift.clone().unwrap_or_else(|| default_shift(law));
    shift.validate()?;
    Ok(shift)
}

fn grid(cfg: &ExperimentConfig, law: &StepLaw, default: &str) -> Result<Vec<f64>, CliError> {
    let g = cfg.grid.clone().unwrap_or_else(|| Grid::Text(default.into()));
    let points = g
        .parse()
        .and_then(|p| p.points(law.ratio_limit()))
        .map_err(CliError::Config)?;
    if points.is_empty() || points.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(CliError::Config("grid points must be positive and finite".into()));
    }
    if points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config("grid points must be strictly increasing".into()));
    }
    Ok(points)
}

fn default_grid(law: &StepLaw) -> &'static str {
    if subcritical_ratio(law).is_some() {
        "a^{-m}, m=0..3"
    } else {
        "1, 2, 4, 8"
    }
}

fn limit_json(limit: Limit) -> Value {
    serde_json::to_value(limit).unwrap_or(Value::Null)
}

fn walkinfo(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let law = law(cfg)?;
    let k = cfg.radius.unwrap_or(20).max(1);
    let mut table = Table::new(&["j", "r", "h", "f"]);
    for j in 1..=k {
        table.push(vec![
            j.to_string(),
            fmt_f64(law.step_prob(j)),
            fmt_f64(law.tail(j)),
            fmt_f64(law.eigen_f(j)),
        ]);
    }
    let mut lines = vec![format!("M = {}", law.order())];
    let summary = match law.walk_params() {
        Ok(p) => {
            lines.push(format!("a = {}", p.a));
            lines.push(format!("b = {}", p.b));
            lines.push(format!("theta = {:.5}", p.theta));
            lines.push(format!("gamma = {:.5}", p.gamma));
            let verdict = match p.classification.is_recurrent() {
                Some(true) => "recurrent",
                Some(false) => "transient",
                None => "undetermined",
            };
            lines.push(verdict.to_string());
            json!({ "walk_params": p, "recurrence": verdict })
        }
        Err(e) => {
            lines.push(format!("walk parameters unavailable: {e}"));
            json!({ "walk_params": null })
        }
    };
    Ok(Report { table, summary, lines })
}

fn radial(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let law = law(cfg)?;
    let n = cfg.n.unwrap_or(5);
    let k_max = cfg.radius.unwrap_or(40).max(1);
    let tol = positive("tol", cfg.tol.unwrap_or(DEFAULT_SERIES_TOLERANCE))?;
    let rad = Radial::new(&law, n).with_tolerance(tol);
    let pmf = rad.pmf_with(k_max, Execution::Parallel);
    let oracle = if cfg.oracle.unwrap_or(false) {
        Some(radial_pmf_oracle(&law, n, k_max)?)
    } else {
        None
    };
    let mut table = Table::new(if oracle.is_some() {
        &["k", "pmf", "tail", "oracle", "abs_diff"]
    } else {
        &["k", "pmf", "tail"]
    });
    let mut worst: f64 = 0.0;
    for k in 0..=k_max {
        let p = pmf.pmf[k as usize];
        let mut row = vec![k.to_string(), fmt_f64(p), fmt_f64(rad.tail(k))];
        if let Some(o) = &oracle {
            let q = o.pmf[k as usize];
            worst = worst.max((p - q).abs());
            row.push(fmt_f64(q));
            row.push(fmt_f64((p - q).abs()));
        }
        table.push(row);
    }
    let mut lines = vec![format!("n = {n}, k <= {k_max}: total mass {:.17}", pmf.total_mass())];
    let mut summary = json!({ "n": n, "k_max": k_max, "total_mass": pmf.total_mass(), "error_bound": pmf.error_bound });
    if oracle.is_some() {
        lines.push(format!("max |closed form - oracle| = {worst:.3e}"));
        summary["max_oracle_diff"] = json!(worst);
    }
    Ok(Report { table, summary, lines })
}

fn variance_scan(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let law = law(cfg)?;
    let n = cfg.n.unwrap_or(5);
    let top = cfg.radius.unwrap_or(30);
    let tol = positive("tol", cfg.tol.unwrap_or(DEFAULT_SHELL_TOLERANCE))?;
    let mut table = Table::new(&["L", "mean", "variance", "var_rel", "part_I", "part_II", "truncation_error"]);
    let mut last = None;
    for l in 0..=top {
        let cm = variance_exact_with(&law, n, l, tol)?;
        table.push(vec![
            l.to_string(),
            fmt_f64(cm.mean),
            fmt_f64(cm.variance),
            fmt_f64(cm.var_rel),
            fmt_f64(cm.part_I),
            fmt_f64(cm.part_II),
            fmt_f64(cm.truncation_error),
        ]);
        last = Some(cm.variance);
    }
    let limit = variance_limit(&law, n);
    let lines = vec![
        format!("Var N_{n}({top}) = {}", last.unwrap_or(f64::NAN)),
        format!("limit as L -> infinity: {}", describe(limit)),
    ];
    let summary = json!({ "n": n, "L_max": top, "limit": limit_json(limit), "last_variance": last });
    Ok(Report { table, summary, lines })
}

fn describe(limit: Limit) -> String {
    match limit {
        Limit::Finite(v) => v.to_string(),
        Limit::Infinite => "infinite".into(),
        Limit::Unknown => "unknown".into(),
    }
}

fn fluct_cov(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let law = law(cfg)?;
    let shift = shift(cfg, &law)?;
    let times = grid(cfg, &law, default_grid(&law))?;
    let range = cfg.m_range.unwrap_or(MRange { start: 10, end: 20 });
    if range.start < 0 {
        return Err(CliError::Config("subsequence indices must be nonnegative".into()));
    }
    let kappa = cfg.kappa.unwrap_or(1.0);
    let critical = subcritical_ratio(&law).is_none();
    let scale = cfg.scale.unwrap_or(1.0);
    let mut table = Table::new(&["i", "n", "L_n", "s", "t", "finite", "limit", "rel_error"]);
    let mut worst_last: f64 = 0.0;
    for i in range.start..=range.end {
        let i = i as u64;
        let n = if critical {
            let n = (1.0 / law.tail(i)).ceil();
            if !(n.is_finite() && n < u64::MAX as f64) {
                return Err(CliError::Failure(format!("subsequence index overflows at i = {i}")));
            }
            n as u64
        } else {
            law.kappa_sequence(kappa, i)?
        };
        for (p, &s) in times.iter().enumerate() {
            for &t in &times[p..] {
                let detail = finite_n_cov_detail(&law, n, s, t, &shift)?;
                let lim = if critical {
                    limit_cov_critical(law.order(), s, t, &shift, scale)?
                } else {
                    limit_cov(&law, kappa, s, t, &shift)?
                };
                let rel = (detail.value / lim - 1.0).abs();
                if i == range.end as u64 {
                    worst_last = worst_last.max(rel);
                }
                table.push(vec![
                    i.to_string(),
                    n.to_string(),
                    detail.base_radius.to_string(),
                    fmt_f64(s),
                    fmt_f64(t),
                    fmt_f64(detail.value),
                    fmt_f64(lim),
                    fmt_f64(rel),
                ]);
            }
        }
    }
    let regime = if critical { "critical" } else { "kappa" };
    let lines = vec![format!(
        "{regime} limit: max relative error at i = {} is {worst_last:.3e}",
        range.end
    )];
    let summary = json!({
        "regime": regime,
        "kappa": (!critical).then_some(kappa),
        "shift": shift,
        "grid": times,
        "max_rel_error_last": worst_last,
    });
    Ok(Report { table, summary, lines })
}

fn gkappa(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let law = law(cfg)?;
    let kappa = cfg.kappa.unwrap_or(1.0);
    let g = GKappa::new(&law, kappa)?;
    let range = cfg.m_range.unwrap_or(MRange { start: -10, end: 30 });
    let (a, m_order) = (g.a(), law.order() as f64);
    let mut table = Table::new(&[
        "m",
        "t",
        "g",
        "scaled",
        "scaled_over_2kappa",
        "variance",
        "zeta_variance",
        "lrd_tau",
        "lrd_value",
    ]);
    let mut zeta_worst: f64 = 0.0;
    for m in range.start..=range.end {
        let gv = g.at(m);
        let scaled = a.powf(-(m as f64)) * gv;
        let var = m_order.powf(m as f64) * gv;
        let zeta = zeta_cov_check_with(&g, m, m)?;
        zeta_worst = zeta_worst.max((zeta.constructed / zeta.target - 1.0).abs());
        let (tau, lrd) = if m >= 1 {
            let p = lrd_scan(&law, kappa, 1.0, 1.0 / a, m..=m, None)?[0];
            (fmt_f64(p.tau), fmt_f64(p.value))
        } else {
            (String::new(), String::new())
        };
        table.push(vec![
            m.to_string(),
            fmt_f64(a.powf(-(m as f64))),
            fmt_f64(gv),
            fmt_f64(scaled),
            fmt_f64(scaled / (2.0 * kappa)),
            fmt_f64(var),
            fmt_f64(zeta.constructed),
            tau,
            lrd,
        ]);
    }
    let end_scaled = a.powf(-(range.end as f64)) * g.at(range.end) / (2.0 * kappa);
    let lines = vec![
        format!("a = {a}, kappa = {kappa}, theta = {:.5}", g.theta()),
        format!("a^-m g / (2 kappa) at m = {}: {end_scaled:.8}", range.end),
        format!("max relative error of the zeta variance: {zeta_worst:.3e}"),
    ];
    let summary = json!({
        "a": a,
        "kappa": kappa,
        "theta": g.theta(),
        "scaled_over_2kappa_last": end_scaled,
        "zeta_max_rel_error": zeta_worst,
    });
    Ok(Report { table, summary, lines })
}

fn simulate(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let law = law(cfg)?;
    let n = cfg.n.unwrap_or(5);
    let radius = cfg.radius.unwrap_or(10);
    let lambda = cfg.lambda.unwrap_or(1.0);
    let kind = cfg.statistic.unwrap_or(StatisticKind::Variance);
    let pair = || -> Result<(f64, f64, TimeShift), CliError> {
        let times = grid(cfg, &law, "1, 2")?;
        let (s, t) = (times[0], *times.get(1).unwrap_or(&times[0]));
        Ok((s, t, shift(cfg, &law)?))
    };
    let statistic = match kind {
        StatisticKind::Mean => Statistic::CountMean { radius },
        StatisticKind::Variance => Statistic::CountVariance { radius },
        StatisticKind::FluctCov => {
            let (s, t, shift) = pair()?;
            Statistic::FluctuationCov { s, t, shift }
        }
        StatisticKind::PoissonMean => Statistic::PoissonMean { radius, lambda },
        StatisticKind::PoissonVariance => Statistic::PoissonVariance { radius, lambda },
        StatisticKind::PoissonFluctCov => {
            let (s, t, shift) = pair()?;
            Statistic::PoissonFluctuationCov { s, t, shift, lambda }
        }
    };
    let mut plan = ReplicaPlan::new(law, n, statistic, cfg.replicas.unwrap_or(10_000), seed(cfg));
    if let Some(tol) = cfg.tol {
        plan.truncation = Truncation::Auto {
            leftover: positive("tol", tol)?,
        };
    }
    let draws = draw_replicas(&plan)?;
    let report = summarize(&plan, &draws)?;
    let width = draws.rows.first().map_or(1, Vec::len);
    let mut table = Table::new(if width == 1 {
        &["replica", "count"]
    } else {
        &["replica", "count_s", "count_t"]
    });
    for (i, row) in draws.rows.iter().enumerate() {
        let mut cells = vec![i.to_string()];
        cells.extend(row.iter().map(u64::to_string));
        table.push(cells);
    }
    let mut lines = vec![format!(
        "estimate {} ± {} over {} replicas",
        report.estimate, report.standard_error, report.replicas
    )];
    if let (Some(r), Some(z)) = (report.reference, report.z_score) {
        lines.push(format!("exact {r}, z = {z:.3}"));
    }
    if report.approximate {
        lines.push("some draws used the normal approximation".into());
    }
    let summary = serde_json::to_value(&report).map_err(|e| CliError::Failure(e.to_string()))?;
    Ok(Report { table, summary, lines })
}

fn sample_limit(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let law = law(cfg)?;
    let shift = shift(cfg, &law)?;
    let times = grid(cfg, &law, default_grid(&law))?;
    let kappa = cfg.kappa.unwrap_or(1.0);
    let process = cfg.process.unwrap_or(if subcritical_ratio(&law).is_some() {
        ProcessKind::Kappa
    } else {
        ProcessKind::Critical
    });
    let spec = match process {
        ProcessKind::Kappa => CovarianceSpec::LimitKappa {
            g: GKappa::new(&law, kappa)?,
            shift,
        },
        ProcessKind::Zeta => CovarianceSpec::Zeta {
            g: GKappa::new(&law, kappa)?,
        },
        ProcessKind::Critical => CovarianceSpec::Critical {
            order: law.order(),
            shift,
            scale: cfg.scale.unwrap_or(1.0),
        },
        ProcessKind::Y => CovarianceSpec::YProcess {
            theta: law.walk_params()?.theta,
        },
        ProcessKind::FiniteN => CovarianceSpec::FiniteN {
            law: law.clone(),
            n: cfg.n.unwrap_or(1024),
            shift,
        },
        ProcessKind::Poisson => CovarianceSpec::Poisson {
            order: law.order(),
            mean_eta: cfg.lambda.unwrap_or(1.0),
            shift,
        },
    };
    let count = cfg.replicas.unwrap_or(1);
    let paths = gaussian_paths(&spec, &times, seed(cfg), count, Execution::Parallel)?;
    let mut table = Table::new(&["path", "t", "value"]);
    for (i, path) in paths.iter().enumerate() {
        for (t, v) in times.iter().zip(path) {
            table.push(vec![i.to_string(), fmt_f64(*t), fmt_f64(*v)]);
        }
    }
    let lines = vec![format!("{} path(s) of the {} process on {} points", count, spec.kind(), times.len())];
    let summary = json!({ "process": spec.kind(), "paths": count, "grid": times });
    Ok(Report { table, summary, lines })
}
