//! Generalization-error machinery: zero-one loss, empirical risk / FNR /
//! TPR on labeled datasets, population risk on finite model specs, and
//! Hoeffding-based gap bounds and sample sizes.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probability::{check_unit_interval, deserialize_flexible};

/// One labeled, predicted sample. Positive = sign present / detected.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub truth: bool,
    pub predicted: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub samples: Vec<Sample>,
}

impl LabeledDataset {
    /// Parse `id,truth,predicted` CSV with a header row. Labels accept
    /// 0/1/true/false.
    pub fn from_csv<R: Read>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| Error::Parse(format!("dataset csv: {e}")))?;
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "id,truth,predicted" => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected header `id,truth,predicted`, got {other:?}"
                )))
            }
        }
        let mut samples = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let (id, truth, predicted) = match (fields.next(), fields.next(), fields.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => return Err(Error::Parse(format!("line {}: expected 3 fields", lineno + 2))),
            };
            samples.push(Sample {
                id: id.trim().to_string(),
                truth: parse_label(truth, lineno + 2)?,
                predicted: parse_label(predicted, lineno + 2)?,
            });
        }
        Ok(LabeledDataset { samples })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("dataset json: {e}")))
    }
}

fn parse_label(s: &str, lineno: usize) -> Result<bool> {
    match s.trim() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(Error::Parse(format!("line {lineno}: invalid label `{other}`"))),
    }
}

/// A fully enumerated finite classification problem: input masses, ground
/// truth, and the model under assessment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteModelSpec {
    /// input id -> probability mass
    pub masses: BTreeMap<String, f64>,
    /// input id -> correct label
    pub truth: BTreeMap<String, bool>,
    /// input id -> model response
    pub model: BTreeMap<String, bool>,
}

impl DiscreteModelSpec {
    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.masses.values().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::UnnormalizedMasses(total));
        }
        for (id, m) in &self.masses {
            check_unit_interval("input mass", *m)?;
            if !self.truth.contains_key(id) || !self.model.contains_key(id) {
                return Err(Error::Domain(format!("input `{id}` missing truth or model label")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskKind {
    EmpiricalRisk,
    Fnr,
    Tpr,
    PopulationRisk,
}

/// A measured or derived rate with its provenance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RiskEstimate {
    #[serde(deserialize_with = "deserialize_flexible")]
    pub value: f64,
    pub kind: RiskKind,
    pub dataset_size: usize,
}

/// Zero-one loss: 1 iff the prediction differs from the truth.
pub fn zero_one_loss(predicted: bool, truth: bool) -> u8 {
    u8::from(predicted != truth)
}

/// Mean zero-one loss over the dataset. On a positives-only dataset this is
/// the false negative rate.
pub fn empirical_risk(d: &LabeledDataset) -> Result<RiskEstimate> {
    if d.samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let losses: usize = d
        .samples
        .iter()
        .map(|s| zero_one_loss(s.predicted, s.truth) as usize)
        .sum();
    Ok(RiskEstimate {
        value: losses as f64 / d.samples.len() as f64,
        kind: RiskKind::EmpiricalRisk,
        dataset_size: d.samples.len(),
    })
}

/// False negative rate over the truth-positive samples.
pub fn false_negative_rate(d: &LabeledDataset) -> Result<RiskEstimate> {
    let positives: Vec<&Sample> = d.samples.iter().filter(|s| s.truth).collect();
    if positives.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let fn_count = positives.iter().filter(|s| !s.predicted).count();
    Ok(RiskEstimate {
        value: fn_count as f64 / positives.len() as f64,
        kind: RiskKind::Fnr,
        dataset_size: positives.len(),
    })
}

/// True positive rate (recall): the complement of the FNR.
pub fn true_positive_rate(d: &LabeledDataset) -> Result<RiskEstimate> {
    let fnr = false_negative_rate(d)?;
    Ok(RiskEstimate {
        value: 1.0 - fnr.value,
        kind: RiskKind::Tpr,
        dataset_size: fnr.dataset_size,
    })
}

/// Population risk as indicator-weighted input mass:
/// `sum_x 1_f(x) Pr_X(x)`.
pub fn population_risk(spec: &DiscreteModelSpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec
        .masses
        .iter()
        .filter(|(id, _)| spec.model[*id] != spec.truth[*id])
        .map(|(_, m)| m)
        .sum())
}

/// Population risk as the expected zero-one loss over the joint
/// input-output distribution, marginalizing over the output labels. An
/// algebraically independent route to the same quantity as
/// [`population_risk`].
pub fn population_risk_expected_loss(spec: &DiscreteModelSpec) -> Result<f64> {
    spec.validate()?;
    let mut risk = 0.0;
    for (id, mass) in &spec.masses {
        for y in [false, true] {
            // deterministic ground truth concentrates the conditional mass
            let joint = if y == spec.truth[id] { *mass } else { 0.0 };
            risk += f64::from(zero_one_loss(spec.model[id], y)) * joint;
        }
    }
    Ok(risk)
}

/// Hoeffding/union-bound probability that the generalization gap exceeds
/// `epsilon` on `eta` samples: `2 exp(-2 eta epsilon^2)`, capped at 1.
pub fn hoeffding_delta(eta: usize, epsilon: f64) -> Result<f64> {
    if eta == 0 {
        return Err(Error::Domain("eta must be >= 1".into()));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Domain(format!("epsilon = {epsilon} outside (0,1]")));
    }
    Ok((2.0 * (-2.0 * eta as f64 * epsilon * epsilon).exp()).min(1.0))
}

/// Minimum sample count for tolerance `epsilon` at bound `delta`:
/// `ceil(ln(2/delta) / (2 epsilon^2))`.
pub fn required_sample_size(epsilon: f64, delta: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Domain(format!("epsilon = {epsilon} outside (0,1]")));
    }
    if !(delta > 0.0 && delta <= 2.0) {
        return Err(Error::Domain(format!("delta = {delta} outside (0,2]")));
    }
    let eta = ((2.0 / delta).ln() / (2.0 * epsilon * epsilon)).ceil();
    Ok(eta.max(0.0) as usize)
}

/// Gap tolerance from a safety margin: `s_m * (p_crit - p_req)`.
pub fn tolerance_from_margin(s_m: f64, p_crit: f64, p_req: f64) -> Result<f64> {
    check_unit_interval("safety margin", s_m)?;
    if p_crit < p_req {
        return Err(Error::InfeasibleMargin { p_crit, p_req });
    }
    Ok(s_m * (p_crit - p_req))
}

/// Derived gap-bound parameters, stored together so the Hoeffding relation
/// holds among them.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GapBound {
    pub epsilon: f64,
    pub delta: f64,
    pub eta: usize,
    pub safety_margin: f64,
}

impl GapBound {
    pub fn derive(safety_margin: f64, p_crit: f64, p_req: f64, delta: f64) -> Result<Self> {
        let epsilon = tolerance_from_margin(safety_margin, p_crit, p_req)?;
        let eta = required_sample_size(epsilon, delta)?;
        Ok(GapBound { epsilon, delta, eta, safety_margin })
    }
}
