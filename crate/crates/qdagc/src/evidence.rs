//! `V=value` settings, from the command line or an evidence file.
//!
//! An evidence file holds one setting per line; blank lines and lines
//! starting with `#` are ignored. `V=?` sets `V` to unknown. Variables not
//! mentioned stay unknown.

use qdag_core::{Evidence, QDag, QDagError};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvidenceError {
    #[error("line {line}: expected `V=value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("expected `V=value`, found {0:?}")]
    Setting(String),
    #[error("{0}")]
    Unknown(#[from] QDagError),
}

/// Splits `V=value` into its two parts.
pub fn parse_setting(text: &str) -> Option<(&str, &str)> {
    let (var, value) = text.split_once('=')?;
    let (var, value) = (var.trim(), value.trim());
    (!var.is_empty() && !value.is_empty()).then_some((var, value))
}

pub fn parse_evidence_file(text: &str) -> Result<Vec<(String, String)>, EvidenceError> {
    let mut settings = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (var, value) = parse_setting(line).ok_or_else(|| EvidenceError::Syntax {
            line: i + 1,
            text: raw.into(),
        })?;
        settings.push((var.to_string(), value.to_string()));
    }
    Ok(settings)
}

/// Applies settings in order on top of all-unknown evidence.
pub fn build_evidence<'a>(
    dag: &QDag,
    settings: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Result<Evidence, EvidenceError> {
    let mut e = Evidence::unknown(dag);
    for (var, value) in settings {
        e.assign(dag, var, value)?;
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings() {
        assert_eq!(parse_setting("C=ON"), Some(("C", "ON")));
        assert_eq!(parse_setting("C=?"), Some(("C", "?")));
        assert_eq!(parse_setting("C"), None);
        assert_eq!(parse_setting("=ON"), None);
        assert_eq!(parse_setting("C="), None);
    }

    #[test]
    fn files() {
        let text = "# observed\nC=ON\n\n  B = ?\n";
        assert_eq!(
            parse_evidence_file(text).unwrap(),
            [
                ("C".to_string(), "ON".to_string()),
                ("B".to_string(), "?".to_string())
            ]
        );
        assert_eq!(
            parse_evidence_file("C=ON\noops\n"),
            Err(EvidenceError::Syntax {
                line: 2,
                text: "oops".into()
            })
        );
    }

    #[test]
    fn unknown_names_are_errors() {
        let mut dag = QDag::new();
        dag.register_evidence_var("C", ["ON", "OFF"]).unwrap();
        assert!(build_evidence(&dag, [("C", "ON")]).is_ok());
        assert!(build_evidence(&dag, [("C", "MAYBE")]).is_err());
        assert!(build_evidence(&dag, [("D", "ON")]).is_err());
    }
}
