use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::joint::{ExactJoint, SampledJoint};

/// JSON form of an exact joint: positive-probability atoms only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactJointDoc {
    pub labels: Vec<String>,
    pub dims: Vec<usize>,
    pub atoms: Vec<Vec<u64>>,
    pub probabilities: Vec<f64>,
}

pub fn exact_to_json(joint: &ExactJoint, h: &Hierarchy) -> String {
    let (atoms, probabilities) = joint.support().unzip();
    let doc = ExactJointDoc {
        labels: h.bottom_labels().to_vec(),
        dims: joint.dims().to_vec(),
        atoms,
        probabilities,
    };
    serde_json::to_string_pretty(&doc).expect("joint serializes")
}

pub fn exact_from_json(s: &str) -> Result<ExactJoint> {
    let doc: ExactJointDoc = serde_json::from_str(s)
        .map_err(|e| Error::InvalidArgument(format!("bad joint JSON: {e}")))?;
    if doc.atoms.len() != doc.probabilities.len() {
        return Err(Error::DimensionError {
            expected: doc.atoms.len(),
            got: doc.probabilities.len(),
        });
    }
    let cells: usize = doc.dims.iter().product();
    let mut joint = ExactJoint::new(doc.dims, vec![0.0; cells]);
    for (b, p) in doc.atoms.iter().zip(doc.probabilities) {
        let idx = joint
            .index_of(b)
            .ok_or_else(|| Error::InvalidArgument(format!("atom {b:?} outside the grid")))?;
        joint.probabilities_mut()[idx] = p;
    }
    Ok(joint)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Sample matrix as CSV: header of bottom labels, one draw per row.
pub fn samples_to_csv(joint: &SampledJoint, h: &Hierarchy) -> String {
    let mut out = h
        .bottom_labels()
        .iter()
        .map(|l| csv_field(l))
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    for row in joint.rows() {
        let line = row.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        out.push_str(&line);
        out.push('\n');
    }
    out
}
