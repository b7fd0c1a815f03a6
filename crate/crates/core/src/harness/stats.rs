//! RMSE per state component and Monte-Carlo aggregation.

use std::collections::BTreeMap;

use crate::angle;
use crate::filters::FilterKind;

use super::log::TrajectoryLog;

/// RMSE per named component, in log order (`R`, `theta`, `alpha`, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct StateRmse {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl StateRmse {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn range(&self) -> f64 {
        self.values[0]
    }

    pub fn theta(&self) -> f64 {
        self.values[1]
    }

    pub fn alpha(&self) -> f64 {
        self.values[2]
    }
}

/// `sqrt(mean(err²))` per component; every component except `R` is an angle
/// and its error is wrapped before squaring.
pub fn rmse_from_rows(names: &[String], truth: &[Vec<f64>], estimate: &[Vec<f64>]) -> StateRmse {
    let n = truth.len().max(1) as f64;
    let values = (0..names.len())
        .map(|c| {
            let sum: f64 = truth
                .iter()
                .zip(estimate)
                .map(|(t, e)| {
                    let err = if names[c] == "R" {
                        t[c] - e[c]
                    } else {
                        angle::diff(t[c], e[c])
                    };
                    err * err
                })
                .sum();
            (sum / n).sqrt()
        })
        .collect();
    StateRmse {
        names: names.to_vec(),
        values,
    }
}

pub fn rmse(log: &TrajectoryLog) -> StateRmse {
    let truth: Vec<Vec<f64>> = log.records.iter().map(|r| r.truth.iter().copied().collect()).collect();
    let est: Vec<Vec<f64>> = log
        .records
        .iter()
        .map(|r| r.estimate.iter().copied().collect())
        .collect();
    rmse_from_rows(&log.component_names(), &truth, &est)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSummary {
    pub filter: FilterKind,
    pub replicates: usize,
    pub failed: usize,
    /// Over successful replicates: mean and population standard deviation of
    /// the pose RMSEs `(R, θ, α)`.
    pub mean: [f64; 3],
    pub std: [f64; 3],
    pub median_range: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub filters: Vec<FilterSummary>,
    /// `(a, b) → fraction of shared seeds where a's R̂-RMSE is below b's`.
    pub wins: BTreeMap<(String, String), f64>,
    /// Range RMSE per filter label, keyed by seed.
    pub range_rmse: BTreeMap<String, BTreeMap<u64, f64>>,
}

impl Summary {
    pub fn filter(&self, label: &str) -> Option<&FilterSummary> {
        self.filters.iter().find(|f| f.filter.label() == label)
    }

    pub fn win_rate(&self, a: &str, b: &str) -> Option<f64> {
        self.wins.get(&(a.to_string(), b.to_string())).copied()
    }

    /// Median over shared seeds of `R̂-RMSE(num) / R̂-RMSE(den)`.
    pub fn median_ratio(&self, num: &str, den: &str) -> Option<f64> {
        let a = self.range_rmse.get(num)?;
        let b = self.range_rmse.get(den)?;
        let ratios: Vec<f64> = a
            .iter()
            .filter_map(|(s, x)| b.get(s).map(|y| x / y))
            .collect();
        median(ratios)
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 0 { 0.5 * (v[m - 1] + v[m]) } else { v[m] })
}

/// Per-filter RMSE statistics and pairwise win rates. Failed replicates are
/// counted but excluded from the statistics.
pub fn aggregate_replicates(logs: &[TrajectoryLog]) -> Summary {
    let mut order: Vec<FilterKind> = Vec::new();
    let mut by_filter: BTreeMap<String, Vec<(u64, StateRmse)>> = BTreeMap::new();
    let mut failures: BTreeMap<String, usize> = BTreeMap::new();
    for log in logs {
        if !order.contains(&log.filter) {
            order.push(log.filter.clone());
        }
        let label = log.filter.label().to_string();
        if log.failure.is_some() {
            *failures.entry(label).or_default() += 1;
        } else {
            by_filter.entry(label).or_default().push((log.seed, rmse(log)));
        }
    }

    let mut filters = Vec::new();
    let mut range_rmse = BTreeMap::new();
    for kind in &order {
        let label = kind.label().to_string();
        let runs = by_filter.get(&label).map(Vec::as_slice).unwrap_or(&[]);
        let failed = failures.get(&label).copied().unwrap_or(0);
        let mut mean = [0.0; 3];
        let mut std = [0.0; 3];
        if !runs.is_empty() {
            let n = runs.len() as f64;
            for c in 0..3 {
                mean[c] = runs.iter().map(|(_, r)| r.values[c]).sum::<f64>() / n;
                std[c] = (runs.iter().map(|(_, r)| (r.values[c] - mean[c]).powi(2)).sum::<f64>() / n).sqrt();
            }
        }
        let ranges: BTreeMap<u64, f64> = runs.iter().map(|(s, r)| (*s, r.range())).collect();
        filters.push(FilterSummary {
            filter: kind.clone(),
            replicates: runs.len() + failed,
            failed,
            mean,
            std,
            median_range: median(ranges.values().copied().collect()).unwrap_or(f64::NAN),
        });
        range_rmse.insert(label, ranges);
    }

    let mut wins = BTreeMap::new();
    for a in &order {
        for b in &order {
            if a == b {
                continue;
            }
            let ra = &range_rmse[a.label()];
            let rb = &range_rmse[b.label()];
            let shared: Vec<bool> = ra
                .iter()
                .filter_map(|(s, x)| rb.get(s).map(|y| x < y))
                .collect();
            if !shared.is_empty() {
                let frac = shared.iter().filter(|w| **w).count() as f64 / shared.len() as f64;
                wins.insert((a.label().to_string(), b.label().to_string()), frac);
            }
        }
    }
    Summary {
        filters,
        wins,
        range_rmse,
    }
}

/// Plain-text table of the mean pose RMSEs, one row per filter.
pub fn format_table(title: &str, summary: &Summary) -> String {
    let mut s = format!("{title}\n");
    s.push_str(&format!(
        "{:<8} | {:>10} | {:>10} | {:>10} | {:>4}\n",
        "Filter", "R (cm)", "theta (rad)", "alpha (rad)", "runs"
    ));
    s.push_str(&format!("{}\n", "-".repeat(52)));
    for f in &summary.filters {
        s.push_str(&format!(
            "{:<8} | {:>10.4} | {:>10.4} | {:>10.4} | {:>4}\n",
            f.filter.display_name(),
            f.mean[0],
            f.mean[1],
            f.mean[2],
            f.replicates - f.failed
        ));
    }
    s
}
