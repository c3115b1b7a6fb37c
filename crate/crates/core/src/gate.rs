//! Tag/antenna joint arithmetic.
//!
//! A card is modelled as `k` tags, each wired to the antenna through `n`
//! joints. The communication value is the double sum of `R_i * A_ij` over
//! every tag indicator `R_i` and joint state `A_ij`; the card can talk only
//! when that sum is non-zero. Opening every joint drives it to zero no matter
//! which tags are present.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunicationGate {
    /// One indicator per tag (1 = tag present).
    pub tag_present: Vec<u8>,
    /// Row `i` holds the joint states for tag `i`.
    pub joints: Vec<Vec<u8>>,
}

impl CommunicationGate {
    /// A single tag behind a single clip joint.
    pub fn single(joint_closed: bool) -> Self {
        Self {
            tag_present: vec![1],
            joints: vec![vec![u8::from(joint_closed)]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.joints.len() == self.tag_present.len(), || {
            format!(
                "gate has {} tag indicators but {} joint rows",
                self.tag_present.len(),
                self.joints.len()
            )
        })?;
        ensure(self.tag_present.iter().all(|&r| r <= 1), || {
            "tag indicators must be 0 or 1".to_string()
        })?;
        let width = self.joints.first().map_or(0, Vec::len);
        for (i, row) in self.joints.iter().enumerate() {
            ensure(row.len() == width, || {
                format!("joint row {i} has {} entries, expected {width}", row.len())
            })?;
            ensure(row.iter().all(|&a| a <= 1), || {
                format!("joint row {i} contains a non-binary entry")
            })?;
        }
        Ok(())
    }
}

/// Evaluates `sum_i sum_j R_i * A_ij`.
pub fn communication_process(gate: &CommunicationGate) -> Result<u64> {
    gate.validate()?;
    Ok(gate
        .tag_present
        .iter()
        .zip(&gate.joints)
        .map(|(&r, row)| row.iter().map(|&a| u64::from(r) * u64::from(a)).sum::<u64>())
        .sum())
}
