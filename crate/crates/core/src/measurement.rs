//! Bearing measurements, visibility masks and the multi-rate row selection.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::angle;
use crate::dynamics::{AugmentedState, POSE_DIM};
use crate::error::{HomingError, Result};

/// Landmarks visible at one step, as zero-based indices in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VisibilityMask {
    visible: Vec<usize>,
}

impl VisibilityMask {
    /// Validates and stores `visible` (zero-based) for `q` landmarks.
    pub fn new(visible: Vec<usize>, q: usize) -> Result<Self> {
        let mut seen = vec![false; q];
        for &i in &visible {
            if i >= q {
                return Err(HomingError::Dimension(format!(
                    "landmark index {} out of range for q = {q}",
                    i + 1
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(HomingError::Dimension(format!(
                    "landmark index {} repeated in mask",
                    i + 1
                )));
            }
        }
        Ok(Self { visible })
    }

    pub fn all(q: usize) -> Self {
        Self {
            visible: (0..q).collect(),
        }
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn indices(&self) -> &[usize] {
        &self.visible
    }

    pub fn len(&self) -> usize {
        self.visible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visible.is_empty()
    }

    /// `'1'`/`'0'` per landmark, landmark 1 first.
    pub fn bitmap(&self, q: usize) -> String {
        let mut bits = vec!['0'; q];
        for &i in &self.visible {
            bits[i] = '1';
        }
        bits.into_iter().collect()
    }

    pub fn from_bitmap(bits: &str) -> Result<Self> {
        let q = bits.chars().count();
        let visible = bits
            .chars()
            .enumerate()
            .filter_map(|(i, c)| match c {
                '1' => Some(Ok(i)),
                '0' => None,
                other => Some(Err(HomingError::Dimension(format!(
                    "bad mask character {other:?}"
                )))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(visible, q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    /// Bearings of the visible landmarks, in mask order.
    pub values: Vec<f64>,
    pub mask: VisibilityMask,
    pub time_index: u64,
}

impl Measurement {
    pub fn new(values: Vec<f64>, mask: VisibilityMask, time_index: u64) -> Result<Self> {
        if values.len() != mask.len() {
            return Err(HomingError::Dimension(format!(
                "{} values for a mask of {} landmarks",
                values.len(),
                mask.len()
            )));
        }
        Ok(Self {
            values: values.into_iter().map(angle::wrap).collect(),
            mask,
            time_index,
        })
    }

    pub fn empty(time_index: u64) -> Self {
        Self {
            values: Vec::new(),
            mask: VisibilityMask::none(),
            time_index,
        }
    }
}

/// `H = [0_{q×3} I_q]`.
pub fn full_h(q: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(q, POSE_DIM + q);
    for i in 0..q {
        h[(i, POSE_DIM + i)] = 1.0;
    }
    h
}

/// Rows of `h` and the principal submatrix of `r_full` selected by `mask`.
pub fn select_rows(
    h: &DMatrix<f64>,
    mask: &VisibilityMask,
    r_full: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let idx = mask.indices();
    let h_p = h.select_rows(idx);
    let r_p = r_full.select_rows(idx).select_columns(idx);
    (h_p, r_p)
}

/// True bearings in `mask` plus independent Gaussian noise.
///
/// `noise_std` holds one standard deviation per landmark (length q).
pub fn synthesize_measurement<R: Rng + ?Sized>(
    truth: &AugmentedState,
    mask: &VisibilityMask,
    noise_std: &[f64],
    time_index: u64,
    rng: &mut R,
) -> Measurement {
    let values = mask
        .indices()
        .iter()
        .map(|&i| {
            let w: f64 = StandardNormal.sample(rng);
            angle::wrap(truth.bearings[i] + noise_std[i] * w)
        })
        .collect();
    Measurement {
        values,
        mask: mask.clone(),
        time_index,
    }
}

/// How landmarks come in and out of view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum VisibilityPolicy {
    AllVisible,
    /// Uniform subset of uniformly drawn size in `[p_min, p_max]` every step.
    RandomSubset { p_min: usize, p_max: usize, seed: u64 },
    /// Landmark visible iff its bearing magnitude is within `half_angle_rad`.
    SectorFov { half_angle_rad: f64 },
    /// Nothing visible inside the inclusive step intervals, everything otherwise.
    Blackout { intervals: Vec<[u64; 2]> },
}

impl VisibilityPolicy {
    pub fn validate(&self, q: usize) -> Result<()> {
        match self {
            Self::RandomSubset { p_min, p_max, .. } => {
                if p_min > p_max {
                    return Err(HomingError::InvalidPolicy(format!(
                        "p_min = {p_min} exceeds p_max = {p_max}"
                    )));
                }
                if *p_max > q {
                    return Err(HomingError::InvalidPolicy(format!(
                        "p_max = {p_max} exceeds the landmark count {q}"
                    )));
                }
            }
            Self::SectorFov { half_angle_rad } if !(*half_angle_rad >= 0.0) => {
                return Err(HomingError::InvalidPolicy(format!(
                    "half angle must be non-negative, got {half_angle_rad}"
                )));
            }
            Self::Blackout { intervals } => {
                if let Some([a, b]) = intervals.iter().find(|[a, b]| a > b) {
                    return Err(HomingError::InvalidPolicy(format!(
                        "blackout interval [{a}, {b}] is reversed"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

fn step_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Visibility mask at step `k`. `bearings` are the current true bearings,
/// consulted only by the field-of-view policy.
pub fn schedule_visibility(k: u64, policy: &VisibilityPolicy, bearings: &[f64]) -> Result<VisibilityMask> {
    let q = bearings.len();
    policy.validate(q)?;
    Ok(match policy {
        VisibilityPolicy::AllVisible => VisibilityMask::all(q),
        VisibilityPolicy::RandomSubset { p_min, p_max, seed } => {
            let mut rng = step_rng(*seed, k);
            let p = rng.random_range(*p_min..=*p_max);
            let mut visible = index::sample(&mut rng, q, p).into_vec();
            visible.sort_unstable();
            VisibilityMask { visible }
        }
        VisibilityPolicy::SectorFov { half_angle_rad } => VisibilityMask {
            visible: (0..q)
                .filter(|&i| angle::wrap(bearings[i]).abs() <= *half_angle_rad)
                .collect(),
        },
        VisibilityPolicy::Blackout { intervals } => {
            if intervals.iter().any(|[a, b]| (*a..=*b).contains(&k)) {
                VisibilityMask::none()
            } else {
                VisibilityMask::all(q)
            }
        }
    })
}

/// Stacks `values` of a measurement into a vector.
pub fn measurement_vector(meas: &Measurement) -> DVector<f64> {
    DVector::from_column_slice(&meas.values)
}
