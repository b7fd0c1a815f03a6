//! Per-step trajectory records and their CSV form.

use std::io::{Read, Write};

use nalgebra::DVector;

use crate::dynamics::POSE_DIM;
use crate::error::{HomingError, Result};
use crate::filters::FilterKind;
use crate::measurement::VisibilityMask;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub time: f64,
    /// `[R, θ, α, β..]` of the plant, then the true value of every estimated
    /// parameter (A-EKF only).
    pub truth: DVector<f64>,
    /// Filter estimate `x̂(k|k)`, same layout as `truth`.
    pub estimate: DVector<f64>,
    pub p_diag: DVector<f64>,
    pub mask: VisibilityMask,
    pub measurement: Vec<f64>,
    pub innovation: DVector<f64>,
    pub omega: f64,
    pub kappa: Option<DVector<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Termination {
    /// First step with true range under the home radius.
    pub truth_step: Option<u64>,
    /// First step with estimated range under the home radius.
    pub estimate_step: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub scenario: String,
    pub filter: FilterKind,
    pub seed: u64,
    pub q: usize,
    pub records: Vec<StepRecord>,
    pub termination: Termination,
    /// Diagnostic when the replicate was aborted.
    pub failure: Option<String>,
}

impl TrajectoryLog {
    /// `{scenario}_{filter}_{seed}.csv`
    pub fn file_name(&self) -> String {
        format!("{}_{}_{}.csv", self.scenario, self.filter.label(), self.seed)
    }

    /// Names of the compared state components, e.g. `R`, `theta`, `beta3`,
    /// `beta_star1`.
    pub fn component_names(&self) -> Vec<String> {
        component_names(self.q, &self.filter)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let names = self.component_names();
        let n_est = self.records.first().map_or(0, |r| r.p_diag.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string(), "time_s".to_string()];
        header.extend(names.iter().map(|n| format!("true_{n}")));
        header.extend(names.iter().map(|n| format!("est_{n}")));
        header.extend(names.iter().take(n_est).map(|n| format!("pdiag_{n}")));
        header.extend(["mask".to_string(), "omega_rad_s".to_string(), "innovation_norm".to_string()]);
        let has_kappa = self.records.first().is_some_and(|r| r.kappa.is_some());
        if has_kappa {
            header.extend(names.iter().take(POSE_DIM + self.q).map(|n| format!("kappa_{n}")));
        }
        w.write_record(&header).map_err(io_err)?;
        for r in &self.records {
            let mut row = vec![r.step.to_string(), r.time.to_string()];
            row.extend(r.truth.iter().map(f64::to_string));
            row.extend(r.estimate.iter().map(f64::to_string));
            row.extend(r.p_diag.iter().map(f64::to_string));
            row.push(r.mask.bitmap(self.q));
            row.push(r.omega.to_string());
            row.push(r.innovation.norm().to_string());
            if let Some(k) = &r.kappa {
                row.extend(k.iter().map(f64::to_string));
            }
            w.write_record(&row).map_err(io_err)?;
        }
        w.flush().map_err(|e| io_err(e.into()))?;
        Ok(())
    }
}

pub fn component_names(q: usize, filter: &FilterKind) -> Vec<String> {
    let mut names = vec!["R".to_string(), "theta".to_string(), "alpha".to_string()];
    names.extend((1..=q).map(|i| format!("beta{i}")));
    if let FilterKind::Aekf { estimated } = filter {
        names.extend(estimated.iter().map(|i| format!("beta_star{}", i + 1)));
    }
    names
}

fn io_err(e: csv::Error) -> HomingError {
    HomingError::InvalidScenario(format!("csv: {e}"))
}

/// Truth/estimate column pairs read back from a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTrajectory {
    pub names: Vec<String>,
    /// Per record, per component.
    pub truth: Vec<Vec<f64>>,
    pub estimate: Vec<Vec<f64>>,
}

/// Reads every `true_X`/`est_X` column pair of a trajectory CSV.
pub fn read_csv_trajectory<R: Read>(input: R) -> Result<CsvTrajectory> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(io_err)?.clone();
    let mut pairs = Vec::new();
    for (ti, h) in header.iter().enumerate() {
        if let Some(name) = h.strip_prefix("true_") {
            let est = format!("est_{name}");
            if let Some(ei) = header.iter().position(|c| c == est) {
                pairs.push((name.to_string(), ti, ei));
            }
        }
    }
    if pairs.is_empty() {
        return Err(HomingError::InvalidScenario(
            "csv has no true_*/est_* column pairs".into(),
        ));
    }
    let mut truth = Vec::new();
    let mut estimate = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(io_err)?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| HomingError::InvalidScenario(format!("bad number in column {i}")))
        };
        truth.push(pairs.iter().map(|p| parse(p.1)).collect::<Result<Vec<_>>>()?);
        estimate.push(pairs.iter().map(|p| parse(p.2)).collect::<Result<Vec<_>>>()?);
    }
    Ok(CsvTrajectory {
        names: pairs.into_iter().map(|p| p.0).collect(),
        truth,
        estimate,
    })
}
