use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pools adjacent histogram cells until every pooled cell has at least
/// five expected counts in both samples, then returns the chi-square p-value.
pub fn two_sample_p(a: &[u64], b: &[u64]) -> f64 {
    let top = a.iter().chain(b).copied().max().unwrap() as usize;
    let mut ha = vec![0f64; top + 1];
    let mut hb = vec![0f64; top + 1];
    for &x in a {
        ha[x as usize] += 1.0;
    }
    for &x in b {
        hb[x as usize] += 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for k in 0..=top {
        acc.0 += ha[k];
        acc.1 += hb[k];
        let tot = acc.0 + acc.1;
        if tot * na.min(nb) / (na + nb) >= 5.0 {
            cells.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let stat: f64 = cells
        .iter()
        .map(|&(x, y)| (ka * x - kb * y).powi(2) / (x + y))
        .sum();
    let df = (cells.len() - 1).max(1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}
