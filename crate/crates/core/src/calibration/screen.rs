//! Detection of piezometers that do not follow the reservoir.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenThresholds {
    /// Minimum Pearson correlation of level changes with reservoir changes.
    pub min_correlation: f64,
    /// Minimum level variance, m².
    pub min_variance: f64,
    pub min_samples: usize,
}

impl Default for ScreenThresholds {
    fn default() -> Self {
        Self {
            min_correlation: 0.3,
            min_variance: 1e-4,
            min_samples: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ScreenStatus {
    Healthy { correlation: f64, variance: f64 },
    Defective { correlation: Option<f64>, variance: f64, reason: String },
    Indeterminate { reason: String },
}

impl ScreenStatus {
    pub fn is_healthy(&self) -> bool {
        matches!(self, Self::Healthy { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Healthy { .. } => "healthy",
            Self::Defective { .. } => "defective",
            Self::Indeterminate { .. } => "indeterminate",
        }
    }
}

pub type Series = BTreeMap<NaiveDate, f64>;

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Classifies one instrument against the reservoir record on shared dates.
pub fn screen_instrument(series: &Series, reservoir: &Series, t: &ScreenThresholds) -> ScreenStatus {
    let (levels, res): (Vec<f64>, Vec<f64>) = series
        .iter()
        .filter_map(|(d, &v)| reservoir.get(d).map(|&r| (v, r)))
        .unzip();
    if levels.len() < t.min_samples.max(2) {
        return ScreenStatus::Indeterminate {
            reason: format!(
                "{} paired samples, at least {} needed",
                levels.len(),
                t.min_samples
            ),
        };
    }
    let var = variance(&levels);
    let diff = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>();
    let dl = diff(&levels);
    let dr = diff(&res);
    if variance(&dr) == 0.0 {
        return ScreenStatus::Indeterminate {
            reason: "reservoir level does not change over the record".into(),
        };
    }
    let corr = pearson(&dl, &dr);
    if var < t.min_variance {
        return ScreenStatus::Defective {
            correlation: corr,
            variance: var,
            reason: format!("level variance {var:.3e} m² below {:.1e}", t.min_variance),
        };
    }
    match corr {
        Some(c) if c >= t.min_correlation => ScreenStatus::Healthy {
            correlation: c,
            variance: var,
        },
        c => ScreenStatus::Defective {
            correlation: c,
            variance: var,
            reason: format!(
                "level changes do not follow the reservoir (correlation {})",
                c.map_or("undefined".into(), |c| format!("{c:.3}"))
            ),
        },
    }
}

pub fn screen_piezometers(
    series: &BTreeMap<String, Series>,
    reservoir: &Series,
    t: &ScreenThresholds,
) -> BTreeMap<String, ScreenStatus> {
    series
        .iter()
        .map(|(name, s)| (name.clone(), screen_instrument(s, reservoir, t)))
        .collect()
}
