//! Expected utility of observing a variable.

use alloc::string::String;

use thiserror::Error;

use crate::qdag::{Evidence, QDag, QDagError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VoiError {
    #[error("{0} is not a query variable")]
    NotQueryVariable(String),
    #[error("{0} is not an evidence variable")]
    NotEvidenceVariable(String),
    #[error("{0} is already observed")]
    AlreadyObserved(String),
    #[error("{variable} has {values} values but {utilities} utilities were given")]
    UtilityLength {
        variable: String,
        values: usize,
        utilities: usize,
    },
    #[error("evidence has zero probability")]
    ZeroProbability,
}

/// `Σ_b Pr(V = b | e) · U(b)`, with utilities listed in the order of the
/// query entries for `V`.
pub fn value_of_information(
    dag: &QDag,
    evidence: &Evidence,
    variable: &str,
    utilities: &[f64],
) -> Result<f64, VoiError> {
    let output = dag.evaluate(evidence);
    if output.distribution(variable).is_empty() {
        return Err(VoiError::NotQueryVariable(variable.into()));
    }
    let var = dag
        .evidence_var(variable)
        .ok_or_else(|| VoiError::NotEvidenceVariable(variable.into()))?;
    if evidence.get(var).is_some() {
        return Err(VoiError::AlreadyObserved(variable.into()));
    }
    let posterior = output.conditional(variable).map_err(|e| match e {
        QDagError::NotQueryVariable(v) => VoiError::NotQueryVariable(v),
        _ => VoiError::ZeroProbability,
    })?;
    if posterior.len() != utilities.len() {
        return Err(VoiError::UtilityLength {
            variable: variable.into(),
            values: posterior.len(),
            utilities: utilities.len(),
        });
    }
    Ok(posterior
        .iter()
        .zip(utilities)
        .map(|((_, p), u)| p * u)
        .sum())
}
