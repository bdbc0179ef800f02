//! Homophily × feature-strength quadrants.
//!
//! A class is "high homophily" when its per-class homophily is strictly above
//! the homophily threshold, and has "strong features" when the feature-only
//! baseline's F1 is strictly above the F1 threshold. Values equal to a
//! threshold fall on the low side.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{ExperimentResult, FeatureMode, ModelKind, DEFAULT_MASKING_RATES};

pub const DEFAULT_HOMOPHILY_THRESHOLD: f64 = 0.70;
pub const DEFAULT_F1_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quadrant {
    #[serde(rename = "LowH-StrongF")]
    LowHStrongF,
    #[serde(rename = "HighH-StrongF")]
    HighHStrongF,
    #[serde(rename = "LowH-WeakF")]
    LowHWeakF,
    #[serde(rename = "HighH-WeakF")]
    HighHWeakF,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [
        Quadrant::LowHStrongF,
        Quadrant::HighHStrongF,
        Quadrant::LowHWeakF,
        Quadrant::HighHWeakF,
    ];

    pub fn classify(homophily: f64, baseline_f1: f64, t: &Thresholds) -> Quadrant {
        match (homophily > t.homophily, baseline_f1 > t.f1) {
            (false, true) => Quadrant::LowHStrongF,
            (true, true) => Quadrant::HighHStrongF,
            (false, false) => Quadrant::LowHWeakF,
            (true, false) => Quadrant::HighHWeakF,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::LowHStrongF => "LowH-StrongF",
            Quadrant::HighHStrongF => "HighH-StrongF",
            Quadrant::LowHWeakF => "LowH-WeakF",
            Quadrant::HighHWeakF => "HighH-WeakF",
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub homophily: f64,
    pub f1: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            homophily: DEFAULT_HOMOPHILY_THRESHOLD,
            f1: DEFAULT_F1_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassQuadrant {
    pub class: usize,
    pub homophily: f64,
    pub lr_f1: f64,
    pub delta_f1: f64,
    pub quadrant: Quadrant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantAssignment {
    pub thresholds: Thresholds,
    pub classes: Vec<ClassQuadrant>,
    /// Classes left out because their homophily is undefined.
    pub excluded: Vec<usize>,
}

impl QuadrantAssignment {
    pub fn quadrant_of(&self, class: usize) -> Option<Quadrant> {
        self.classes
            .iter()
            .find(|c| c.class == class)
            .map(|c| c.quadrant)
    }

    pub fn members(&self, q: Quadrant) -> Vec<usize> {
        self.classes
            .iter()
            .filter(|c| c.quadrant == q)
            .map(|c| c.class)
            .collect()
    }
}

pub fn assign_quadrants(
    homophily: &[Option<f64>],
    lr_f1: &[f64],
    delta: &[f64],
    thresholds: Thresholds,
) -> Result<QuadrantAssignment> {
    if lr_f1.len() != homophily.len() || delta.len() != homophily.len() {
        return Err(Error::dims(
            "assign_quadrants",
            format!("{} entries per vector", homophily.len()),
            format!("{} LR F1 and {} ΔF1 entries", lr_f1.len(), delta.len()),
        ));
    }
    let mut classes = Vec::new();
    let mut excluded = Vec::new();
    for (class, h) in homophily.iter().enumerate() {
        match h {
            Some(h) => classes.push(ClassQuadrant {
                class,
                homophily: *h,
                lr_f1: lr_f1[class],
                delta_f1: delta[class],
                quadrant: Quadrant::classify(*h, lr_f1[class], &thresholds),
            }),
            None => excluded.push(class),
        }
    }
    Ok(QuadrantAssignment {
        thresholds,
        classes,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantSummary {
    pub quadrant: Quadrant,
    pub classes: Vec<usize>,
    /// Unweighted mean ΔF1 of member classes; `None` for an empty quadrant.
    pub mean_delta_f1: Option<f64>,
}

/// One entry per quadrant, in [`Quadrant::ALL`] order.
pub fn quadrant_summary(assignment: &QuadrantAssignment) -> Vec<QuadrantSummary> {
    Quadrant::ALL
        .iter()
        .map(|&q| {
            let members: Vec<&ClassQuadrant> = assignment
                .classes
                .iter()
                .filter(|c| c.quadrant == q)
                .collect();
            QuadrantSummary {
                quadrant: q,
                classes: members.iter().map(|c| c.class).collect(),
                mean_delta_f1: (!members.is_empty()).then(|| {
                    members.iter().map(|c| c.delta_f1).sum::<f64>() / members.len() as f64
                }),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAverages {
    pub lr_f1: Vec<f64>,
    pub delta_f1: Vec<f64>,
}

/// Per-class LR F1 and GCN−LR ΔF1 with original features, averaged over the
/// masking rates 0, 0.5 and 0.9 (each rate first averaged over seeds).
pub fn averaged_class_metrics(results: &ExperimentResult) -> Result<ClassAverages> {
    let c = results.num_classes;
    let mut lr = vec![0.0; c];
    let mut delta = vec![0.0; c];
    let k = DEFAULT_MASKING_RATES.len() as f64;
    for &m in &DEFAULT_MASKING_RATES {
        let row = |model: ModelKind| {
            results
                .summary_row(model, m, FeatureMode::Original)
                .ok_or_else(|| {
                    Error::MissingCell(format!("{model} at masking {m} with original features"))
                })
        };
        let gcn = row(ModelKind::Gcn)?;
        let base = row(ModelKind::Lr)?;
        for i in 0..c {
            lr[i] += base.mean_per_class_f1[i] / k;
            delta[i] += (gcn.mean_per_class_f1[i] - base.mean_per_class_f1[i]) / k;
        }
    }
    Ok(ClassAverages {
        lr_f1: lr,
        delta_f1: delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_goes_low() {
        let t = Thresholds::default();
        assert_eq!(Quadrant::classify(0.70, 0.9, &t), Quadrant::LowHStrongF);
        assert_eq!(
            Quadrant::classify(0.7000001, 0.85, &t),
            Quadrant::HighHWeakF
        );
        assert_eq!(Quadrant::classify(0.509, 0.882, &t), Quadrant::LowHStrongF);
        assert_eq!(Quadrant::classify(0.915, 0.888, &t), Quadrant::HighHStrongF);
    }

    #[test]
    fn undefined_homophily_is_excluded() {
        let a = assign_quadrants(
            &[Some(0.9), None],
            &[0.5, 0.9],
            &[0.1, 0.2],
            Thresholds::default(),
        )
        .unwrap();
        assert_eq!(a.excluded, vec![1]);
        assert_eq!(a.classes.len(), 1);
        assert!(
            assign_quadrants(&[Some(0.9)], &[0.5, 0.9], &[0.1], Thresholds::default()).is_err()
        );
    }

    #[test]
    fn single_class_summary() {
        let a = assign_quadrants(&[Some(0.9)], &[0.5], &[0.25], Thresholds::default()).unwrap();
        let s = quadrant_summary(&a);
        let hw = s
            .iter()
            .find(|q| q.quadrant == Quadrant::HighHWeakF)
            .unwrap();
        assert_eq!(hw.mean_delta_f1, Some(0.25));
        assert_eq!(s.iter().filter(|q| q.mean_delta_f1.is_none()).count(), 3);
    }

    #[test]
    fn serialized_names() {
        assert_eq!(
            serde_json::to_string(&Quadrant::LowHStrongF).unwrap(),
            "\"LowH-StrongF\""
        );
    }
}
