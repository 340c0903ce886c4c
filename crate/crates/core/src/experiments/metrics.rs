//! Summary statistics of learner traces.

use crate::learner::RunTrace;

/// Average of the last `window` values (all of them when fewer).
pub fn final_window_average(values: &[f64], window: usize) -> f64 {
    let tail = &values[values.len().saturating_sub(window)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Means of consecutive full windows: entry `i` averages `values[i..i + window]`.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || values.len() < window {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(values.len() - window + 1);
    let mut sum: f64 = values[..window].iter().sum();
    out.push(sum / window as f64);
    for i in window..values.len() {
        sum += values[i] - values[i - window];
        out.push(sum / window as f64);
    }
    out
}

/// Pointwise mean of equally long curves.
pub fn mean_curve(curves: &[Vec<f64>]) -> Vec<f64> {
    let Some(len) = curves.iter().map(Vec::len).min() else {
        return Vec::new();
    };
    (0..len)
        .map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / curves.len() as f64)
        .collect()
}

/// Pointwise maximum of equally long curves.
pub fn max_curve(curves: &[Vec<f64>]) -> Vec<f64> {
    let Some(len) = curves.iter().map(Vec::len).min() else {
        return Vec::new();
    };
    (0..len)
        .map(|i| {
            curves
                .iter()
                .map(|c| c[i])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// First round (1-based) whose value is at most `target`.
pub fn first_round_below(curve: &[f64], target: f64) -> Option<usize> {
    curve.iter().position(|&v| v <= target).map(|i| i + 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretPoint {
    pub rounds: usize,
    pub online_loss: f64,
    pub baseline_loss: f64,
    pub regret: f64,
    /// `R_T / sqrt(T)`.
    pub normalized: f64,
}

/// Regret at each horizon given the baseline's total loss over the first `T` rounds.
pub fn regret_series(losses: &[f64], baseline: &[(usize, f64)]) -> Vec<RegretPoint> {
    baseline
        .iter()
        .map(|&(rounds, baseline_loss)| {
            let online_loss: f64 = losses[..rounds].iter().sum();
            let regret = online_loss - baseline_loss;
            RegretPoint {
                rounds,
                online_loss,
                baseline_loss,
                regret,
                normalized: regret / (rounds as f64).sqrt(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceReport {
    pub est_error: Option<Vec<f64>>,
    pub losses: Vec<f64>,
    pub cum_loss_avg: Vec<f64>,
    pub final_window_loss: f64,
    pub total_wall_ms: f64,
}

/// Curves of one trace; the loss window is the last 200 rounds.
pub fn report(trace: &RunTrace) -> TraceReport {
    let losses = trace.losses();
    TraceReport {
        est_error: trace.est_errors(),
        final_window_loss: final_window_average(&losses, 200),
        cum_loss_avg: trace.rounds.iter().map(|r| r.cum_loss_avg).collect(),
        total_wall_ms: trace.rounds.iter().map(|r| r.wall_time_ms).sum(),
        losses,
    }
}
