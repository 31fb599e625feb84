//! JSON Lines reports: a config line, one line per check, and a trailing summary.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Informational; never fails a run.
    Diagnostic,
}

/// Identifiers every record may cite, with a one-line description of the checked statement.
pub const REFERENCES: &[(&str, &str)] = &[
    ("tree.structure", "truncated tree, weights, paths and weight products"),
    ("shift.left-inverse", "L S = I, L = (S*S)^-1 S*, kernel of L equals kernel of S*"),
    ("shift.adjoint", "adjoint pairing <Sf, g> = <f, S*g> and diagonal S*S"),
    ("shift.kernel-projection", "P_E = I - S L"),
    ("shift.separated-basis", "orthonormal kernel basis, one generation per vector"),
    ("shift.balance", "generation-constant vertex norms"),
    ("model.coefficients", "coefficients P_E L^n f of the analytic model"),
    ("model.roundtrip", "synthesis inverts the coefficient map on the truncation"),
    ("model.kernel", "reproducing kernel P_E (I - zL)^-1 (I - conj(lam) L*)^-1 on E"),
    ("model.eigenvectors", "kernel vectors are eigenvectors of the adjoint shift"),
    ("model.radius", "growth of ||L^n|| and the disc of analyticity"),
    ("multiplier.convolution", "Cauchy-type convolution of symbols: unit, associativity, commutativity"),
    ("multiplier.commutant", "operators commuting with S act by their symbols"),
    ("multiplier.powers", "S^n has symbol chi_n I"),
    ("multiplier.product", "M_phi M_psi = M_(phi * psi)"),
    ("multiplier.scalar", "tree-side scalar multipliers equal model-side diagonal symbols"),
    ("multiplier.adjoint", "adjoint of a scalar multiplier"),
    ("multiplier.membership", "growth of compressed multiplier norms"),
    ("t2.kernel", "two-ray tree: kernel basis e00, alpha e11 - e21"),
    ("t2.projected-powers", "two-ray tree: closed form of P_E L^n f"),
    ("t2.single-term", "two-ray tree: a constant symbol is a multiplier only if it is scalar"),
    ("t2.two-term", "two-ray tree: bounded two-term symbols"),
    ("t2.witness", "two-ray tree: divergence witness supported on one ray"),
    ("harmonics.rotation", "rotations f_w(u) = w^|u| f(u) and their coefficients"),
    ("harmonics.circle", "circle averages of rotated multipliers"),
    ("harmonics.fejer", "Fejer smoothing of multipliers"),
    ("balanced.inner-product", "inner products of shifted single-generation vectors"),
    ("balanced.wold", "layer decomposition f = sum S^n f_n"),
    ("balanced.ratios", "ratio bounds for ||S^n e'_i|| / ||S^n e'_j||"),
    ("balanced.hinf", "weighted Toeplitz norms of convolution"),
    ("balanced.entrywise", "entrywise description of multipliers of balanced shifts"),
    ("run.error", "a check could not be evaluated"),
];

pub fn is_known_reference(id: &str) -> bool {
    REFERENCES.iter().any(|(r, _)| *r == id)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub name: String,
    pub reference: String,
    pub status: Status,
    pub residual: Option<f64>,
    pub exactness_depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<serde_json::Value>,
}

impl Record {
    fn new(name: &str, reference: &'static str, status: Status) -> Self {
        debug_assert!(is_known_reference(reference), "unknown reference {reference}");
        Record {
            name: name.to_string(),
            reference: reference.to_string(),
            status,
            residual: None,
            exactness_depth: None,
            witness: None,
            data: None,
        }
    }

    /// Pass iff `residual <= tol`; a failure records the tolerance as witness.
    pub fn tolerance(name: &str, reference: &'static str, residual: f64, tol: f64, depth: usize) -> Self {
        let ok = residual <= tol;
        let mut r = Record::new(name, reference, if ok { Status::Pass } else { Status::Fail });
        r.residual = Some(finite(residual));
        r.exactness_depth = Some(depth);
        if !ok {
            r.witness = Some(format!("residual {residual:e} exceeds tolerance {tol:e}"));
        }
        r
    }

    /// Pass/fail from a boolean with an optional witness on failure.
    pub fn outcome(name: &str, reference: &'static str, ok: bool, witness: impl FnOnce() -> String) -> Self {
        let mut r = Record::new(name, reference, if ok { Status::Pass } else { Status::Fail });
        if !ok {
            r.witness = Some(witness());
        }
        r
    }

    pub fn diagnostic(name: &str, reference: &'static str) -> Self {
        Record::new(name, reference, Status::Diagnostic)
    }

    /// A check that raised an error.
    pub fn error(name: &str, err: &crate::Error) -> Self {
        let mut r = Record::new(name, "run.error", Status::Fail);
        r.witness = Some(err.to_string());
        r
    }

    pub fn with_residual(mut self, residual: f64) -> Self {
        self.residual = Some(finite(residual));
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.exactness_depth = Some(depth);
        self
    }

    pub fn with_data(mut self, data: serde_json::Value) -> Self {
        self.data = Some(data);
        self
    }

    pub fn with_witness(mut self, witness: String) -> Self {
        self.witness = Some(witness);
        self
    }
}

/// JSON has no infinities; they are reported as the largest finite double.
fn finite(x: f64) -> f64 {
    if x.is_nan() {
        f64::MAX
    } else {
        x.clamp(-f64::MAX, f64::MAX)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub diagnostic: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: serde_json::Value,
    pub records: Vec<Record>,
}

impl Report {
    pub fn summary(&self) -> Summary {
        let mut s = Summary::default();
        for r in &self.records {
            match r.status {
                Status::Pass => s.pass += 1,
                Status::Fail => s.fail += 1,
                Status::Diagnostic => s.diagnostic += 1,
            }
        }
        s.total = self.records.len();
        s
    }

    pub fn succeeded(&self) -> bool {
        self.summary().fail == 0
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, &serde_json::json!({ "config": self.config }))?;
        writeln!(out)?;
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            writeln!(out)?;
        }
        serde_json::to_writer(&mut out, &serde_json::json!({ "summary": self.summary() }))?;
        writeln!(out)?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_records() {
        let ok = Record::tolerance("x", "shift.adjoint", 1e-13, 1e-12, 4);
        assert_eq!(ok.status, Status::Pass);
        assert!(ok.witness.is_none());
        let bad = Record::tolerance("x", "shift.adjoint", f64::INFINITY, 1e-12, 4);
        assert_eq!(bad.status, Status::Fail);
        assert_eq!(bad.residual, Some(f64::MAX));
        assert!(bad.witness.is_some());
    }

    #[test]
    fn jsonl_layout() {
        let report = Report {
            config: serde_json::json!({"seed": 1}),
            records: vec![
                Record::diagnostic("d", "model.radius"),
                Record::outcome("o", "shift.balance", false, || "w".into()),
            ],
        };
        let text = report.to_jsonl().unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("{\"config\""));
        assert!(lines[3].contains("\"fail\":1"));
        assert!(!report.succeeded());
    }
}
