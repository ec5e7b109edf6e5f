//! Failure conditions, fault trees and quantitative safety objectives.
//!
//! Fault-tree evaluation assumes mutually independent basic events: OR gates
//! compute `1 - prod(1 - p_i)`, AND gates `prod(p_i)`, and k-of-n gates the
//! exact count distribution over their children.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probability::{check_unit_interval, deserialize_flexible, deserialize_flexible_opt};

/// Exposure unit a QSO is expressed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QsoUnit {
    #[serde(rename = "per-flight-hour")]
    PerFlightHour,
    #[serde(rename = "per-flight")]
    PerFlight,
    #[serde(rename = "per-encounter")]
    PerEncounter,
}

impl std::fmt::Display for QsoUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            QsoUnit::PerFlightHour => "per-flight-hour",
            QsoUnit::PerFlight => "per-flight",
            QsoUnit::PerEncounter => "per-encounter",
        };
        f.write_str(s)
    }
}

/// A probability target with an explicit exposure unit. No unitless QSO
/// exists anywhere in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Qso {
    #[serde(deserialize_with = "deserialize_flexible")]
    pub value: f64,
    pub unit: QsoUnit,
}

impl Qso {
    pub fn new(value: f64, unit: QsoUnit) -> Result<Self> {
        check_unit_interval("qso", value)?;
        Ok(Qso { value, unit })
    }
}

/// Flight-profile figures used to convert between exposure units.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExposureProfile {
    #[serde(deserialize_with = "deserialize_flexible")]
    pub avg_flight_hours: f64,
    #[serde(deserialize_with = "deserialize_flexible")]
    pub encounters_per_flight: f64,
}

impl ExposureProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.avg_flight_hours > 0.0 && self.avg_flight_hours.is_finite()) {
            return Err(Error::Domain(format!(
                "avg_flight_hours must be > 0, got {}",
                self.avg_flight_hours
            )));
        }
        if !(self.encounters_per_flight > 0.0 && self.encounters_per_flight.is_finite()) {
            return Err(Error::Domain(format!(
                "encounters_per_flight must be > 0, got {}",
                self.encounters_per_flight
            )));
        }
        Ok(())
    }
}

/// Failure-condition severity classes and their customary default QSOs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SeverityClass {
    Minor,
    Major,
    Hazardous,
    Catastrophic,
}

impl SeverityClass {
    pub fn default_qso(&self) -> Qso {
        let value = match self {
            SeverityClass::Minor => 1e-3,
            SeverityClass::Major => 1e-5,
            SeverityClass::Hazardous => 1e-7,
            SeverityClass::Catastrophic => 1e-9,
        };
        Qso { value, unit: QsoUnit::PerFlightHour }
    }
}

/// Basic-event category: conventional hardware random failure, or the
/// ML-insufficiency events this pipeline exists for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventCategory {
    #[serde(rename = "hardware-random")]
    HardwareRandom,
    #[serde(rename = "ml-insufficiency")]
    MlInsufficiency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateKind {
    And,
    Or,
    KOfN,
}

/// A fault-tree node: either a gate over children or a basic event.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Gate {
        gate: GateKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
        children: Vec<String>,
    },
    BasicEvent {
        #[serde(
            default,
            deserialize_with = "deserialize_flexible_opt",
            skip_serializing_if = "Option::is_none"
        )]
        probability: Option<f64>,
        category: EventCategory,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        budget: Option<Qso>,
    },
}

/// Gates over basic events carrying probability budgets. Nodes are keyed by
/// id; the JSON schema mirrors this struct directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaultTree {
    pub root: String,
    pub nodes: BTreeMap<String, Node>,
}

impl FaultTree {
    pub fn from_json(s: &str) -> Result<Self> {
        let tree: FaultTree =
            serde_json::from_str(s).map_err(|e| Error::Parse(format!("fault tree: {e}")))?;
        tree.validate()?;
        Ok(tree)
    }

    /// Structural validation: all ids resolve, no node has two parents, the
    /// tree is acyclic, k-of-n gates have 1 <= k <= |children|, and stored
    /// probabilities are in [0, 1].
    pub fn validate(&self) -> Result<()> {
        if !self.nodes.contains_key(&self.root) {
            return Err(Error::MissingNode(self.root.clone()));
        }
        let mut parent_seen: HashSet<&str> = HashSet::new();
        for (id, node) in &self.nodes {
            match node {
                Node::Gate { gate, k, children } => {
                    if children.is_empty() {
                        return Err(Error::Domain(format!("gate `{id}` has no children")));
                    }
                    if *gate == GateKind::KOfN {
                        let k = k.ok_or_else(|| {
                            Error::Domain(format!("gate `{id}` is k-of-n but has no k"))
                        })?;
                        if k < 1 || k > children.len() {
                            return Err(Error::KOutOfRange {
                                node: id.clone(),
                                k,
                                children: children.len(),
                            });
                        }
                    }
                    for child in children {
                        if !self.nodes.contains_key(child) {
                            return Err(Error::MissingNode(child.clone()));
                        }
                        if !parent_seen.insert(child.as_str()) {
                            return Err(Error::MultipleParents { node: child.clone() });
                        }
                    }
                }
                Node::BasicEvent { probability, .. } => {
                    if let Some(p) = probability {
                        check_unit_interval("basic event probability", *p)?;
                    }
                }
            }
        }
        // Single-parent plus full reachability from the root rules out any
        // cycle except one through the root itself.
        let mut visited = HashSet::new();
        let mut stack = vec![self.root.as_str()];
        while let Some(id) = stack.pop() {
            if !visited.insert(id) {
                return Err(Error::CyclicTree(id.to_string()));
            }
            if let Node::Gate { children, .. } = &self.nodes[id] {
                for c in children {
                    stack.push(c);
                }
            }
        }
        Ok(())
    }

    /// Ids of all basic events, in key order.
    pub fn basic_events(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|(_, n)| matches!(n, Node::BasicEvent { .. }))
            .map(|(id, _)| id.as_str())
            .collect()
    }

    /// The single ML-insufficiency basic event, if exactly one exists.
    pub fn ml_event(&self) -> Option<&str> {
        let mut found = None;
        for (id, n) in &self.nodes {
            if let Node::BasicEvent { category: EventCategory::MlInsufficiency, .. } = n {
                if found.is_some() {
                    return None;
                }
                found = Some(id.as_str());
            }
        }
        found
    }
}

/// Top-event probability under basic-event independence.
///
/// `overrides` supplies or replaces basic-event probabilities by id.
pub fn evaluate_fault_tree(
    tree: &FaultTree,
    overrides: Option<&HashMap<String, f64>>,
) -> Result<f64> {
    tree.validate()?;
    if let Some(map) = overrides {
        for (id, p) in map {
            check_unit_interval("override probability", *p)?;
            if !tree.nodes.contains_key(id) {
                return Err(Error::MissingNode(id.clone()));
            }
        }
    }
    eval_node(tree, &tree.root, overrides)
}

fn eval_node(
    tree: &FaultTree,
    id: &str,
    overrides: Option<&HashMap<String, f64>>,
) -> Result<f64> {
    match &tree.nodes[id] {
        Node::BasicEvent { probability, .. } => overrides
            .and_then(|m| m.get(id).copied())
            .or(*probability)
            .ok_or_else(|| Error::MissingProbability(id.to_string())),
        Node::Gate { gate, k, children } => {
            let probs: Vec<f64> = children
                .iter()
                .map(|c| eval_node(tree, c, overrides))
                .collect::<Result<_>>()?;
            Ok(match gate {
                GateKind::And => probs.iter().product(),
                GateKind::Or => 1.0 - probs.iter().map(|p| 1.0 - p).product::<f64>(),
                GateKind::KOfN => {
                    let k = k.expect("validated");
                    if probs.windows(2).all(|w| w[0] == w[1]) {
                        // identical children: plain binomial tail
                        crate::detection::binomial_tail_geq(probs.len(), k, probs[0])?
                    } else {
                        at_least_k(&probs, k)
                    }
                }
            })
        }
    }
}

/// P(at least k of the independent events occur): exact count-distribution
/// convolution (Poisson binomial).
fn at_least_k(probs: &[f64], k: usize) -> f64 {
    let mut dist = vec![0.0; probs.len() + 1];
    dist[0] = 1.0;
    for (i, p) in probs.iter().enumerate() {
        for j in (0..=i + 1).rev() {
            let stay = dist[j] * (1.0 - p);
            let up = if j > 0 { dist[j - 1] * p } else { 0.0 };
            dist[j] = stay + up;
        }
    }
    dist[k..].iter().sum::<f64>().clamp(0.0, 1.0)
}

/// Convert a QSO between exposure units using the profile. The converted
/// value is clamped to [0, 1].
pub fn normalize_qso(q: Qso, profile: &ExposureProfile, target: QsoUnit) -> Result<Qso> {
    profile.validate()?;
    let per_flight = match q.unit {
        QsoUnit::PerFlightHour => q.value * profile.avg_flight_hours,
        QsoUnit::PerFlight => q.value,
        QsoUnit::PerEncounter => q.value * profile.encounters_per_flight,
    };
    let value = match target {
        QsoUnit::PerFlightHour => per_flight / profile.avg_flight_hours,
        QsoUnit::PerFlight => per_flight,
        QsoUnit::PerEncounter => per_flight / profile.encounters_per_flight,
    };
    Ok(Qso { value: value.clamp(0.0, 1.0), unit: target })
}

/// Allocate the top QSO down to basic events.
///
/// OR gates split their budget across children proportionally to the summed
/// weights of the basic events beneath each child (a first-order sum
/// approximation); AND and k-of-n (k >= 2) gates pass the full budget to
/// every child. The result is then re-validated exactly with
/// [`evaluate_fault_tree`].
pub fn allocate_budgets(
    tree: &FaultTree,
    top_qso: Qso,
    weights: &HashMap<String, f64>,
) -> Result<BTreeMap<String, Qso>> {
    tree.validate()?;
    for id in tree.basic_events() {
        match weights.get(id) {
            None => {
                return Err(Error::Domain(format!("no weight for basic event `{id}`")));
            }
            Some(w) if *w < 0.0 || !w.is_finite() => {
                return Err(Error::Domain(format!("negative weight for `{id}`")));
            }
            Some(w) if *w == 0.0 => {
                return Err(Error::InfeasibleAllocation {
                    node: id.to_string(),
                    reason: "zero weight would demand a zero failure budget".into(),
                });
            }
            _ => {}
        }
    }

    let mut budgets = BTreeMap::new();
    assign(tree, &tree.root, top_qso.value, weights, &mut budgets)?;

    let probs: HashMap<String, f64> = budgets.iter().map(|(k, v)| (k.clone(), *v)).collect();
    let top = evaluate_fault_tree(tree, Some(&probs))?;
    if top > top_qso.value {
        return Err(Error::InfeasibleAllocation {
            node: tree.root.clone(),
            reason: format!(
                "allocated budgets evaluate to {top:e}, exceeding the top QSO {:e}",
                top_qso.value
            ),
        });
    }
    Ok(budgets
        .into_iter()
        .map(|(id, v)| (id, Qso { value: v, unit: top_qso.unit }))
        .collect())
}

fn subtree_weight(tree: &FaultTree, id: &str, weights: &HashMap<String, f64>) -> f64 {
    match &tree.nodes[id] {
        Node::BasicEvent { .. } => weights[id],
        Node::Gate { children, .. } => {
            children.iter().map(|c| subtree_weight(tree, c, weights)).sum()
        }
    }
}

fn assign(
    tree: &FaultTree,
    id: &str,
    budget: f64,
    weights: &HashMap<String, f64>,
    out: &mut BTreeMap<String, f64>,
) -> Result<()> {
    match &tree.nodes[id] {
        Node::BasicEvent { .. } => {
            out.insert(id.to_string(), budget.clamp(0.0, 1.0));
            Ok(())
        }
        Node::Gate { gate, k, children } => {
            let split = match gate {
                GateKind::Or => true,
                GateKind::KOfN => k == &Some(1),
                GateKind::And => false,
            };
            if split {
                let total: f64 =
                    children.iter().map(|c| subtree_weight(tree, c, weights)).sum();
                for child in children {
                    let share = subtree_weight(tree, child, weights) / total;
                    assign(tree, child, budget * share, weights, out)?;
                }
            } else {
                for child in children {
                    assign(tree, child, budget, weights, out)?;
                }
            }
            Ok(())
        }
    }
}
