use serde::{Deserialize, Serialize};

use super::pinned_set::PinnedSet;

/// A number produced by an oracle together with its a-posteriori error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactValue {
    pub value: f64,
    pub error_estimate: f64,
}

impl ExactValue {
    pub fn exact(value: f64) -> Self {
        ExactValue {
            value,
            error_estimate: 0.0,
        }
    }
}

/// Flat JSON record emitted for every oracle number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub method: String,
    pub params: serde_json::Value,
    pub value: f64,
    pub error_estimate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PinnedSetProbability {
    pub set: PinnedSet,
    pub probability: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    #[serde(flatten)]
    pub value: ExactValue,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExactResult {
    pub method: String,
    pub params: serde_json::Value,
    pub partition: ExactValue,
    pub log_partition: f64,
    pub moments: Vec<NamedValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned_law: Option<Vec<PinnedSetProbability>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub avoidance: Vec<NamedValue>,
}

impl ExactResult {
    pub fn moment(&self, name: &str) -> Option<ExactValue> {
        self.moments
            .iter()
            .find(|m| m.name == name)
            .map(|m| m.value)
    }

    /// Moment by position in the requested observable list.
    pub fn moment_at(&self, k: usize) -> ExactValue {
        self.moments[k].value
    }

    pub fn avoidance_at(&self, k: usize) -> ExactValue {
        self.avoidance[k].value
    }

    /// Probability of pinned set `a` under the enumerated law.
    pub fn law_of(&self, a: &PinnedSet) -> Option<f64> {
        self.pinned_law
            .as_ref()?
            .iter()
            .find(|p| &p.set == a)
            .map(|p| p.probability)
    }

    pub fn records(&self) -> Vec<OracleRecord> {
        let mut out = vec![OracleRecord {
            method: self.method.clone(),
            params: with_quantity(&self.params, "Z"),
            value: self.partition.value,
            error_estimate: self.partition.error_estimate,
        }];
        for m in self.moments.iter().chain(&self.avoidance) {
            out.push(OracleRecord {
                method: self.method.clone(),
                params: with_quantity(&self.params, &m.name),
                value: m.value.value,
                error_estimate: m.value.error_estimate,
            });
        }
        out
    }
}

fn with_quantity(params: &serde_json::Value, name: &str) -> serde_json::Value {
    let mut p = params.clone();
    if let serde_json::Value::Object(map) = &mut p {
        map.insert("quantity".into(), name.into());
        p
    } else {
        serde_json::json!({ "quantity": name, "params": p })
    }
}
