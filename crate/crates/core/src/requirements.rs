//! Traceable requirement derivation, rendering and compliance checking.
//!
//! A [`Scenario`] bundles the top-level QSO, exposure profile, fault tree,
//! detection kinematics and operating-point policy. [`derive_requirements`]
//! walks the full pipeline and emits ten requirement records whose trace
//! chains all terminate at the top QSO.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::detection::{
    admissible_frontier, critical_miss_probability, detection_vector_size, prob_reject,
    tolerable_miss_ratio, ConfirmationModel, KinematicProfile,
};
use crate::error::{Error, Result};
use crate::generalization::GapBound;
use crate::probability::{deserialize_flexible, round_3sig};
use crate::safety_model::{
    normalize_qso, ExposureProfile, FaultTree, Node, Qso, QsoUnit, SeverityClass,
};

/// Where the detection-vector size comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VectorSizeSource {
    Explicit { n: usize },
    Kinematics(KinematicProfile),
}

/// How the operating point (x_min, p_miss) is chosen.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum OperatingPointPolicy {
    Explicit {
        x_min: usize,
        #[serde(deserialize_with = "deserialize_flexible")]
        p_miss: f64,
    },
    MarginBased {
        #[serde(deserialize_with = "deserialize_flexible")]
        target_p_miss: f64,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GapParams {
    #[serde(deserialize_with = "deserialize_flexible")]
    pub safety_margin: f64,
    #[serde(deserialize_with = "deserialize_flexible")]
    pub delta: f64,
}

/// Complete derivation input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub top_qso: Qso,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<SeverityClass>,
    pub exposure: ExposureProfile,
    pub fault_tree: FaultTree,
    /// Basic event carrying the MLC budget; defaults to the single
    /// ml-insufficiency event in the tree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mlc_event: Option<String>,
    pub vector_size: VectorSizeSource,
    pub operating_point: OperatingPointPolicy,
    pub gap_params: GapParams,
}

impl Scenario {
    pub fn from_json(s: &str) -> Result<Self> {
        let scenario: Scenario =
            serde_json::from_str(s).map_err(|e| Error::Parse(format!("scenario: {e}")))?;
        scenario.fault_tree.validate()?;
        scenario.exposure.validate()?;
        Ok(scenario)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "<=")]
    LessEq,
    #[serde(rename = ">=")]
    GreaterEq,
}

impl Comparator {
    pub fn holds(&self, measured: f64, target: f64) -> bool {
        match self {
            Comparator::Less => measured < target,
            Comparator::LessEq => measured <= target,
            Comparator::GreaterEq => measured >= target,
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Comparator::Less => "<",
            Comparator::LessEq => "<=",
            Comparator::GreaterEq => ">=",
        }
    }
}

/// A derived, traceable requirement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RequirementRecord {
    pub id: String,
    pub metric: String,
    pub comparator: Comparator,
    /// Full-precision target; comparisons use this value.
    pub target: f64,
    /// Target rounded to 3 significant digits for reporting.
    pub target_display: String,
    pub statement: String,
    pub traces_to: Vec<String>,
    pub provenance: String,
}

/// The derived requirement set plus the intermediate quantities the
/// derivation produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RequirementSet {
    pub schema_version: u32,
    pub scenario: String,
    pub q_tr: f64,
    pub q_tr_unit: QsoUnit,
    pub n: usize,
    pub x_min: usize,
    pub y_min: usize,
    pub p_miss: f64,
    pub p_hit: f64,
    pub critical_p_miss: f64,
    pub tolerable_miss_ratio: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub eta: usize,
    pub requirements: Vec<RequirementRecord>,
}

impl RequirementSet {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("requirement set: {e}")))
    }

    pub fn get(&self, id: &str) -> Option<&RequirementRecord> {
        self.requirements.iter().find(|r| r.id == id)
    }
}

fn display(v: f64) -> String {
    let r = round_3sig(v);
    if r == 1.0 && v < 1.0 {
        // complement targets like 0.9998 must not collapse to 1
        format!("{v}")
    } else if r != 0.0 && r.abs() < 1e-3 {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

/// Derive the full traceable requirement set from a scenario.
pub fn derive_requirements(scenario: &Scenario) -> Result<RequirementSet> {
    scenario.fault_tree.validate()?;
    scenario.exposure.validate()?;

    // 1. locate the MLC budget and normalize it to per-encounter
    let event_id = match &scenario.mlc_event {
        Some(id) => id.clone(),
        None => scenario
            .fault_tree
            .ml_event()
            .ok_or_else(|| {
                Error::Domain("scenario names no mlc_event and the tree has no unique ml-insufficiency event".into())
            })?
            .to_string(),
    };
    let budget = match scenario.fault_tree.nodes.get(&event_id) {
        Some(Node::BasicEvent { budget: Some(b), .. }) => *b,
        Some(Node::BasicEvent { budget: None, .. }) => {
            return Err(Error::Domain(format!("basic event `{event_id}` carries no budget")))
        }
        _ => return Err(Error::MissingNode(event_id)),
    };
    let q_tr = normalize_qso(budget, &scenario.exposure, QsoUnit::PerEncounter)?;

    // 2. detection-vector size
    let n = match &scenario.vector_size {
        VectorSizeSource::Explicit { n } => *n,
        VectorSizeSource::Kinematics(k) => detection_vector_size(k)?.1,
    };
    if n == 0 {
        return Err(Error::InfeasibleScenario("detection window admits zero frames".into()));
    }

    let degenerate = q_tr.value >= 1.0;

    // 3. frontier and operating point
    let frontier = if degenerate { Vec::new() } else { admissible_frontier(n, q_tr.value)? };
    let (x_min, p_miss) = match scenario.operating_point {
        OperatingPointPolicy::Explicit { x_min, p_miss } => (x_min, p_miss),
        OperatingPointPolicy::MarginBased { target_p_miss } => {
            if degenerate {
                (1, target_p_miss)
            } else {
                // smallest x_min with headroom above the requested target
                let point = frontier
                    .iter()
                    .find(|f| f.critical_p_miss > target_p_miss)
                    .ok_or_else(|| {
                        Error::InfeasibleScenario(format!(
                            "no confirmation threshold admits p_miss = {target_p_miss} under QSO {:e} (binding constraint: x_min = 1 allows at most {:e})",
                            q_tr.value,
                            frontier.first().map(|f| f.critical_p_miss).unwrap_or(0.0)
                        ))
                    })?;
                (point.x_min, target_p_miss)
            }
        }
    };
    let model = ConfirmationModel::new(n, x_min, 1.0 - p_miss)?;
    let y_min = model.y_min;

    // 4. critical miss probability at the chosen threshold, and re-check
    //    that the operating point actually meets the QSO
    let critical = if degenerate {
        1.0
    } else {
        critical_miss_probability(n, y_min, q_tr.value)?
    };
    let achieved = prob_reject(&model)?;
    if !degenerate && achieved > q_tr.value {
        return Err(Error::InfeasibleScenario(format!(
            "operating point (x_min = {x_min}, p_miss = {p_miss}) yields P(T=0) = {achieved:e} > q_tr = {:e} (binding constraint: p_miss must not exceed {critical:e})",
            q_tr.value
        )));
    }

    // 5. remaining metric targets
    let m_t = tolerable_miss_ratio(n, p_miss)?;
    // The generalization-error target is the reported (3-significant-digit)
    // critical miss probability; the gap tolerance is derived from that
    // reported target, matching how the requirement is stated.
    let gen_target = round_3sig(critical);
    let gap = GapBound::derive(
        scenario.gap_params.safety_margin,
        gen_target,
        p_miss,
        scenario.gap_params.delta,
    )?;

    let top_trace = format!("QSO:{}", scenario.fault_tree.root);
    let event_trace = format!("EVENT:{event_id}");

    let requirements = vec![
        RequirementRecord {
            id: "REQ-MLC-SAFETY".into(),
            metric: "prob_no_confirm".into(),
            comparator: Comparator::Less,
            target: q_tr.value,
            target_display: display(q_tr.value),
            statement: format!(
                "The average probability of non-detection per encounter shall be less than {}.",
                display(q_tr.value)
            ),
            traces_to: vec![event_trace.clone(), top_trace.clone()],
            provenance: "Req. 1".into(),
        },
        RequirementRecord {
            id: "REQ-MLC-FUNC".into(),
            metric: "prob_confirm".into(),
            comparator: Comparator::GreaterEq,
            target: 1.0 - q_tr.value,
            target_display: display(1.0 - q_tr.value),
            statement: format!(
                "The probability of detecting a sign shall be at least {}.",
                1.0 - q_tr.value
            ),
            traces_to: vec!["REQ-MLC-SAFETY".into()],
            provenance: "Req. 2".into(),
        },
        RequirementRecord {
            id: "REQ-MLC-CONFIRM".into(),
            metric: "confirmation_threshold".into(),
            comparator: Comparator::LessEq,
            target: x_min as f64,
            target_display: format!("{x_min}"),
            statement: format!(
                "Post-processing shall confirm a detection whenever at least {x_min} of {n} responses are hits."
            ),
            traces_to: vec!["REQ-MLC-SAFETY".into()],
            provenance: "Req. 3".into(),
        },
        RequirementRecord {
            id: "REQ-MLC-REJECT".into(),
            metric: "rejection_threshold".into(),
            comparator: Comparator::GreaterEq,
            target: y_min as f64,
            target_display: format!("{y_min}"),
            statement: format!(
                "Post-processing shall reject confirmation whenever at least {y_min} of {n} responses are misses."
            ),
            traces_to: vec!["REQ-MLC-SAFETY".into()],
            provenance: "Req. 4".into(),
        },
        RequirementRecord {
            id: "REQ-MLSD-SAFETY".into(),
            metric: "p_miss".into(),
            comparator: Comparator::LessEq,
            target: p_miss,
            target_display: display(p_miss),
            statement: format!(
                "The detector shall have a per-image miss probability of at most {p_miss}."
            ),
            traces_to: vec!["REQ-MLC-REJECT".into(), "REQ-MLC-SAFETY".into()],
            provenance: "Req. 5".into(),
        },
        RequirementRecord {
            id: "REQ-MLSD-FUNC".into(),
            metric: "p_hit".into(),
            comparator: Comparator::GreaterEq,
            target: 1.0 - p_miss,
            target_display: display(1.0 - p_miss),
            statement: format!(
                "The detector shall have a per-image hit probability of at least {}.",
                1.0 - p_miss
            ),
            traces_to: vec!["REQ-MLSD-SAFETY".into()],
            provenance: "Req. 6".into(),
        },
        RequirementRecord {
            id: "REQ-MLSD-MISS-RATIO".into(),
            metric: "tolerable_miss_ratio".into(),
            comparator: Comparator::LessEq,
            // compared at full precision; displayed at 3 significant digits
            target: m_t,
            target_display: display(m_t),
            statement: format!(
                "The tolerable miss ratio shall not exceed {} (full precision {m_t}).",
                display(m_t)
            ),
            traces_to: vec!["REQ-MLSD-SAFETY".into()],
            provenance: "Req. 7".into(),
        },
        RequirementRecord {
            id: "REQ-MLSD-GENERALIZATION".into(),
            metric: "generalization_error".into(),
            comparator: Comparator::LessEq,
            target: gen_target,
            target_display: display(gen_target),
            statement: format!(
                "The detector shall have a generalization error of at most {gen_target}."
            ),
            traces_to: vec!["REQ-MLC-SAFETY".into()],
            provenance: "Req. 8".into(),
        },
        RequirementRecord {
            id: "REQ-MLSD-FNR".into(),
            metric: "fnr".into(),
            comparator: Comparator::LessEq,
            target: p_miss,
            target_display: display(p_miss),
            statement: format!(
                "The detector shall have a false negative rate in test of at most {p_miss}."
            ),
            traces_to: vec!["REQ-MLSD-GENERALIZATION".into()],
            provenance: "Req. 9".into(),
        },
        RequirementRecord {
            id: "REQ-MLSD-TPR".into(),
            metric: "tpr".into(),
            comparator: Comparator::GreaterEq,
            target: 1.0 - p_miss,
            target_display: display(1.0 - p_miss),
            statement: format!(
                "The detector shall have a recall in test of at least {}.",
                1.0 - p_miss
            ),
            traces_to: vec!["REQ-MLSD-GENERALIZATION".into()],
            provenance: "Req. 10".into(),
        },
    ];

    Ok(RequirementSet {
        schema_version: 1,
        scenario: scenario.name.clone(),
        q_tr: q_tr.value,
        q_tr_unit: q_tr.unit,
        n,
        x_min,
        y_min,
        p_miss,
        p_hit: 1.0 - p_miss,
        critical_p_miss: critical,
        tolerable_miss_ratio: m_t,
        epsilon: gap.epsilon,
        delta: gap.delta,
        eta: gap.eta,
        requirements,
    })
}

/// Measured evidence for one metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Measurement {
    #[serde(deserialize_with = "deserialize_flexible")]
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_id: Option<String>,
}

/// Evidence keyed by metric name.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MeasuredMetrics {
    pub metrics: BTreeMap<String, Measurement>,
}

impl MeasuredMetrics {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("measured metrics: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    InsufficientEvidence,
    NotEvaluated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplianceEntry {
    pub requirement: String,
    pub metric: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured: Option<f64>,
    /// target - measured
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub scenario: String,
    pub eta: usize,
    pub entries: Vec<ComplianceEntry>,
}

impl ComplianceReport {
    pub fn all_pass(&self) -> bool {
        self.entries
            .iter()
            .all(|e| matches!(e.verdict, Verdict::Pass | Verdict::NotEvaluated))
    }
}

/// Point comparison of measured metrics against the requirement set.
/// Dataset-backed measurements below the derived sample size `eta` yield
/// `insufficient-evidence` regardless of the measured value.
pub fn check_compliance(reqs: &RequirementSet, measured: &MeasuredMetrics) -> Result<ComplianceReport> {
    let mut entries = Vec::with_capacity(reqs.requirements.len());
    for req in &reqs.requirements {
        let entry = match measured.metrics.get(&req.metric) {
            None => ComplianceEntry {
                requirement: req.id.clone(),
                metric: req.metric.clone(),
                verdict: Verdict::NotEvaluated,
                measured: None,
                margin: None,
                note: None,
            },
            Some(m) => {
                if !m.value.is_finite() {
                    return Err(Error::Domain(format!(
                        "measured value for `{}` is not finite",
                        req.metric
                    )));
                }
                let adequate = m.dataset_size.map_or(true, |size| size >= reqs.eta);
                let verdict = if !adequate {
                    Verdict::InsufficientEvidence
                } else if req.comparator.holds(m.value, req.target) {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                };
                ComplianceEntry {
                    requirement: req.id.clone(),
                    metric: req.metric.clone(),
                    verdict,
                    measured: Some(m.value),
                    margin: Some(req.target - m.value),
                    note: (!adequate).then(|| {
                        format!(
                            "dataset size {} below required eta = {}",
                            m.dataset_size.unwrap(),
                            reqs.eta
                        )
                    }),
                }
            }
        };
        entries.push(entry);
    }
    Ok(ComplianceReport { scenario: reqs.scenario.clone(), eta: reqs.eta, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Json,
    Markdown,
}

/// Deterministic rendering: JSON round-trips losslessly, Markdown carries a
/// trace table. Records keep their derivation order (stable ids).
pub fn render(reqs: &RequirementSet, format: RenderFormat) -> Result<String> {
    match format {
        RenderFormat::Json => serde_json::to_string_pretty(reqs)
            .map_err(|e| Error::Parse(format!("render: {e}"))),
        RenderFormat::Markdown => {
            let mut out = String::new();
            let _ = writeln!(out, "# Derived safety-related performance requirements");
            let _ = writeln!(out);
            let _ = writeln!(out, "Scenario: `{}`", reqs.scenario);
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "Operating point: n = {}, x_min = {}, y_min = {}, p_miss = {}, p_hit = {}",
                reqs.n, reqs.x_min, reqs.y_min, reqs.p_miss, reqs.p_hit
            );
            let _ = writeln!(
                out,
                "Gap bound: epsilon = {}, delta = {}, eta = {}",
                reqs.epsilon, reqs.delta, reqs.eta
            );
            let _ = writeln!(out);
            let _ = writeln!(out, "| id | metric | target | trace |");
            let _ = writeln!(out, "|----|--------|--------|-------|");
            for r in &reqs.requirements {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} {} | {} |",
                    r.id,
                    r.metric,
                    r.comparator.symbol(),
                    r.target_display,
                    r.traces_to.join(", ")
                );
            }
            let _ = writeln!(out);
            for r in &reqs.requirements {
                let _ = writeln!(out, "**{}** ({}): {}", r.id, r.provenance, r.statement);
                let _ = writeln!(out);
            }
            Ok(out)
        }
    }
}

/// Every record's trace chain must terminate at the top QSO.
pub fn trace_closure_holds(reqs: &RequirementSet) -> bool {
    fn reaches_qso(reqs: &RequirementSet, id: &str, depth: usize) -> bool {
        if depth > reqs.requirements.len() + 2 {
            return false;
        }
        if id.starts_with("QSO:") {
            return true;
        }
        if id.starts_with("EVENT:") {
            return false; // an event link alone does not close the chain
        }
        match reqs.get(id) {
            Some(r) => r.traces_to.iter().any(|t| reaches_qso(reqs, t, depth + 1)),
            None => false,
        }
    }
    reqs.requirements
        .iter()
        .all(|r| !r.traces_to.is_empty() && r.traces_to.iter().any(|t| reaches_qso(reqs, t, 0)))
}
