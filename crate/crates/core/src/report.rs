//! Verdicts for the sample-based assumption checks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::stats::MeanEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "D1.i")]
    D1i,
    #[serde(rename = "D1.ii")]
    D1ii,
    #[serde(rename = "D1.iii")]
    D1iii,
    #[serde(rename = "D2.i")]
    D2i,
    #[serde(rename = "D2.ii")]
    D2ii,
    #[serde(rename = "D2.iii")]
    D2iii,
    #[serde(rename = "D3.i")]
    D3i,
    #[serde(rename = "D3.ii")]
    D3ii,
    O1,
    O2,
    #[serde(rename = "O3.i")]
    O3i,
    #[serde(rename = "O3.ii")]
    O3ii,
    #[serde(rename = "O3'.i")]
    O3Primei,
    #[serde(rename = "O3'.ii")]
    O3Primeii,
    P1,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::D1i => "D1.i",
            Condition::D1ii => "D1.ii",
            Condition::D1iii => "D1.iii",
            Condition::D2i => "D2.i",
            Condition::D2ii => "D2.ii",
            Condition::D2iii => "D2.iii",
            Condition::D3i => "D3.i",
            Condition::D3ii => "D3.ii",
            Condition::O1 => "O1",
            Condition::O2 => "O2",
            Condition::O3i => "O3.i",
            Condition::O3ii => "O3.ii",
            Condition::O3Primei => "O3'.i",
            Condition::O3Primeii => "O3'.ii",
            Condition::P1 => "P1",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    /// Exact pointwise property verified on every sample.
    Holds,
    Fails,
    /// Integrability claim: only a sample moment can be reported.
    Empirical { estimate: MeanEstimate },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Entry { sample: usize, row: usize, col: usize, value: f64 },
    Singular { sample: usize, rcond: f64, determinant: f64 },
    /// Time inside `[0, 1]` after the sample's base point.
    FieldEntry { sample: usize, time: f64, row: usize, col: usize, value: f64 },
    NonPositive { sample: usize, quantity: String, value: f64 },
    Note { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub name: String,
    pub estimate: MeanEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub condition: Condition,
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    /// Extra sample moments (per-index quantities, sufficient conditions).
    pub moments: Vec<Moment>,
    pub samples: usize,
}

impl AssumptionReport {
    pub fn holds(condition: Condition, samples: usize) -> Self {
        AssumptionReport { condition, verdict: Verdict::Holds, witnesses: Vec::new(), moments: Vec::new(), samples }
    }

    /// A failing report always carries at least one witness.
    pub fn fails(condition: Condition, samples: usize, mut witnesses: Vec<Witness>) -> Self {
        if witnesses.is_empty() {
            witnesses.push(Witness::Note { message: "no witness recorded".into() });
        }
        AssumptionReport { condition, verdict: Verdict::Fails, witnesses, moments: Vec::new(), samples }
    }

    pub fn empirical(condition: Condition, samples: usize, estimate: MeanEstimate) -> Self {
        AssumptionReport {
            condition,
            verdict: Verdict::Empirical { estimate },
            witnesses: Vec::new(),
            moments: Vec::new(),
            samples,
        }
    }

    pub fn with_moments(mut self, moments: Vec<Moment>) -> Self {
        self.moments = moments;
        self
    }

    pub fn with_witness(mut self, w: Witness) -> Self {
        self.witnesses.push(w);
        self
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fails
    }

    /// Not failed, and any reported moment is finite.
    pub fn passed(&self) -> bool {
        match &self.verdict {
            Verdict::Holds => true,
            Verdict::Fails => false,
            Verdict::Empirical { estimate } => estimate.mean.is_finite(),
        }
    }
}

pub fn find(reports: &[AssumptionReport], c: Condition) -> Option<&AssumptionReport> {
    reports.iter().find(|r| r.condition == c)
}
