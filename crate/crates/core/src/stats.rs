//! Correlation coefficients between human and machine score vectors:
//! Pearson product-moment, Spearman with average-rank ties, and
//! Kendall tau-b.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("vectors must have equal length >= 3 (got {0} and {1})")]
    BadLength(usize, usize),
    #[error("coefficient undefined: zero variance in input")]
    DegenerateVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Correlations {
    pub pearson: f64,
    pub spearman: f64,
    pub kendall: f64,
}

fn check(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(StatsError::BadLength(x.len(), y.len()));
    }
    Ok(())
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    // sqrt(vx*vy) keeps r == 1 exact for identical inputs
    Ok(cov / (vx * vy).sqrt())
}

/// Average ranks (1-based); tied values share the mean of the ranks
/// they occupy.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Kendall tau-b: concordance count normalized with per-variable tie
/// corrections.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check(x, y)?;
    let n = x.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut ties_x = 0i64;
    let mut ties_y = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                ties_x += 1;
            } else if dy == 0.0 {
                ties_y += 1;
            } else if dx * dy > 0.0 {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = (((n0 - ties_x) as f64) * ((n0 - ties_y) as f64)).sqrt();
    if denom == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    Ok((concordant - discordant) as f64 / denom)
}

pub fn correlate(human: &[f64], machine: &[f64]) -> Result<Correlations, StatsError> {
    Ok(Correlations {
        pearson: pearson(human, machine)?,
        spearman: spearman(human, machine)?,
        kendall: kendall_tau_b(human, machine)?,
    })
}
