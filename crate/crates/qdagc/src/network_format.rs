//! JSON network documents.
//!
//! ```json
//! {
//!   "variables": [{"name": "A", "values": ["ON", "OFF"]}, ...],
//!   "cpts": [{"child": "B", "parents": ["A"], "table": [0.25, 0.75, 0.8, 0.2]}, ...]
//! }
//! ```
//!
//! `table` is row-major over the parents' instantiations (last parent
//! fastest), each row listing the child's values in declaration order.

use qdag_core::{BeliefNetwork, NetworkBuilder, NetworkError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    variables: Vec<VariableDoc>,
    cpts: Vec<CptDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableDoc {
    name: String,
    values: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CptDoc {
    child: String,
    #[serde(default)]
    parents: Vec<String>,
    table: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum NetworkFormatError {
    #[error("syntax error: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("invalid network: {0}")]
    Invalid(#[from] NetworkError),
}

pub fn parse_network(text: &str) -> Result<BeliefNetwork, NetworkFormatError> {
    let doc: Document = serde_json::from_str(text)?;
    let mut b = NetworkBuilder::new();
    for v in doc.variables {
        b.variable(v.name, v.values);
    }
    for c in doc.cpts {
        b.cpt(c.child, c.parents, c.table);
    }
    Ok(b.build()?)
}

pub fn render_network(net: &BeliefNetwork) -> String {
    let doc = Document {
        variables: net
            .variables()
            .iter()
            .map(|v| VariableDoc {
                name: v.name.clone(),
                values: v.values.clone(),
            })
            .collect(),
        cpts: net
            .cpts()
            .iter()
            .map(|c| CptDoc {
                child: net.name(c.child).to_string(),
                parents: c.parents.iter().map(|p| net.name(*p).to_string()).collect(),
                table: c.table.clone(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("plain data serializes");
    text.push('\n');
    text
}
