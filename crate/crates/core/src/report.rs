use serde::{Deserialize, Serialize};

/// One certification check: a signed margin (positive means the sufficient
/// condition holds) plus any warnings raised while computing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationEntry {
    pub check: String,
    pub margin: f64,
    pub certified: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub entries: Vec<CertificationEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_bound_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steady_state_bound: Option<f64>,
}

impl CertificationReport {
    pub fn push(&mut self, entry: CertificationEntry) {
        self.entries.push(entry);
    }

    pub fn all_certified(&self) -> bool {
        self.entries.iter().all(|e| e.certified)
    }
}
