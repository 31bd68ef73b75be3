//! The "QDAG 1" text format.
//!
//! ```text
//! QDAG 1
//! evars <count>
//! evar <name> <k> <value>...
//! nodes <count>
//! N <decimal> | E <evar-index> <value-index> | M <arity> <id>... | A <arity> <id>...
//! queries <count>
//! Q <variable> <value> <node-id>
//! ```
//!
//! Node ids are line positions within the `nodes` section, starting at 0.
//! Numbers use the shortest decimal that reads back to the same double.

use std::collections::HashSet;
use std::fmt::Write as _;

use qdag_core::qdag::{EvidenceVar, QueryNode};
use qdag_core::{EvarId, Node, NodeId, QDag, QDagError};
use thiserror::Error;

pub const HEADER: &str = "QDAG 1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("line {line}: unsupported format {found:?}, expected {HEADER:?}")]
    Version { line: usize, found: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: forward reference: node {node} uses node {operand}")]
    ForwardReference {
        line: usize,
        node: usize,
        operand: usize,
    },
    #[error("line {line}: unexpected end of input, expected {expected}")]
    Truncated { line: usize, expected: &'static str },
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: QDagError },
    #[error("{0:?} cannot be written as a single token")]
    BadName(String),
}

impl FormatError {
    pub fn line(&self) -> Option<usize> {
        match self {
            FormatError::Version { line, .. }
            | FormatError::Malformed { line, .. }
            | FormatError::ForwardReference { line, .. }
            | FormatError::Truncated { line, .. }
            | FormatError::Invalid { line, .. } => Some(*line),
            FormatError::BadName(_) => None,
        }
    }
}

fn token(name: &str) -> Result<&str, FormatError> {
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        Err(FormatError::BadName(name.into()))
    } else {
        Ok(name)
    }
}

pub fn serialize(dag: &QDag) -> Result<String, FormatError> {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "evars {}", dag.evidence_vars().len()).unwrap();
    for var in dag.evidence_vars() {
        write!(out, "evar {} {}", token(&var.name)?, var.values.len()).unwrap();
        for v in &var.values {
            write!(out, " {}", token(v)?).unwrap();
        }
        out.push('\n');
    }
    writeln!(out, "nodes {}", dag.len()).unwrap();
    for node in dag.nodes() {
        match node {
            Node::Num(p) => writeln!(out, "N {p}").unwrap(),
            Node::Esn { var, value } => writeln!(out, "E {} {}", var.0, value).unwrap(),
            Node::Mul(ops) | Node::Add(ops) => {
                let tag = if matches!(node, Node::Mul(_)) {
                    'M'
                } else {
                    'A'
                };
                write!(out, "{tag} {}", ops.len()).unwrap();
                for o in ops {
                    write!(out, " {o}").unwrap();
                }
                out.push('\n');
            }
        }
    }
    writeln!(out, "queries {}", dag.queries().len()).unwrap();
    for q in dag.queries() {
        writeln!(
            out,
            "Q {} {} {}",
            token(&q.variable)?,
            token(&q.value)?,
            q.node
        )
        .unwrap();
    }
    Ok(out)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, expected: &'static str) -> Result<(usize, Vec<&'a str>), FormatError> {
        match self.inner.next() {
            Some((i, text)) => {
                self.last = i + 1;
                Ok((i + 1, text.split_whitespace().collect()))
            }
            None => Err(FormatError::Truncated {
                line: self.last + 1,
                expected,
            }),
        }
    }
}

fn malformed(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Malformed {
        line,
        message: message.into(),
    }
}

fn number<T: std::str::FromStr>(line: usize, text: &str, what: &str) -> Result<T, FormatError> {
    text.parse()
        .map_err(|_| malformed(line, format!("expected {what}, found {text:?}")))
}

fn section(lines: &mut Lines<'_>, keyword: &'static str) -> Result<usize, FormatError> {
    let (line, fields) = lines.next(keyword)?;
    match fields.as_slice() {
        [k, n] if *k == keyword => number(line, n, "a count"),
        _ => Err(malformed(line, format!("expected `{keyword} <count>`"))),
    }
}

pub fn deserialize(text: &str) -> Result<QDag, FormatError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (line, fields) = lines.next("header")?;
    if fields.join(" ") != HEADER {
        return Err(FormatError::Version {
            line,
            found: fields.join(" "),
        });
    }

    let count = section(&mut lines, "evars")?;
    let mut evars = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, fields) = lines.next("evar")?;
        let ["evar", name, k, values @ ..] = fields.as_slice() else {
            return Err(malformed(line, "expected `evar <name> <k> <value>...`"));
        };
        let k: usize = number(line, k, "a value count")?;
        if values.len() != k {
            return Err(malformed(
                line,
                format!("declared {k} values, found {}", values.len()),
            ));
        }
        evars.push(EvidenceVar {
            name: name.to_string(),
            values: values.iter().map(|v| v.to_string()).collect(),
        });
    }

    let count = section(&mut lines, "nodes")?;
    let mut nodes = Vec::with_capacity(count);
    let mut esns = HashSet::new();
    for id in 0..count {
        let (line, fields) = lines.next("node")?;
        let node = match fields.as_slice() {
            ["N", p] => {
                let p: f64 = number(line, p, "a number")?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(FormatError::Invalid {
                        line,
                        source: QDagError::ProbabilityOutOfRange(p),
                    });
                }
                Node::Num(p)
            }
            ["E", var, value] => {
                let var: usize = number(line, var, "an evidence variable index")?;
                let value: usize = number(line, value, "a value index")?;
                let evar = evars
                    .get(var)
                    .ok_or_else(|| malformed(line, format!("no evidence variable {var}")))?;
                if value >= evar.values.len() {
                    return Err(malformed(
                        line,
                        format!("{} has no value {value}", evar.name),
                    ));
                }
                if !esns.insert((var, value)) {
                    return Err(FormatError::Invalid {
                        line,
                        source: QDagError::DuplicateEsn {
                            variable: evar.name.clone(),
                            value: evar.values[value].clone(),
                        },
                    });
                }
                Node::Esn {
                    var: EvarId(var),
                    value,
                }
            }
            [tag @ ("M" | "A"), arity, ops @ ..] => {
                let arity: usize = number(line, arity, "an arity")?;
                if arity == 0 {
                    return Err(malformed(line, "operation with no operands"));
                }
                if ops.len() != arity {
                    return Err(malformed(
                        line,
                        format!("declared arity {arity}, found {} operands", ops.len()),
                    ));
                }
                let mut operands = Vec::with_capacity(arity);
                for o in ops {
                    let o: usize = number(line, o, "a node id")?;
                    if o >= id {
                        return Err(FormatError::ForwardReference {
                            line,
                            node: id,
                            operand: o,
                        });
                    }
                    operands.push(NodeId(o));
                }
                if *tag == "M" {
                    Node::Mul(operands)
                } else {
                    Node::Add(operands)
                }
            }
            _ => return Err(malformed(line, "expected a node line (N, E, M or A)")),
        };
        nodes.push(node);
    }

    let count = section(&mut lines, "queries")?;
    let mut queries = Vec::with_capacity(count);
    let mut seen = HashSet::new();
    for _ in 0..count {
        let (line, fields) = lines.next("query")?;
        let ["Q", variable, value, node] = fields.as_slice() else {
            return Err(malformed(line, "expected `Q <variable> <value> <node-id>`"));
        };
        let node: usize = number(line, node, "a node id")?;
        if node >= nodes.len() {
            return Err(malformed(line, format!("node {node} does not exist")));
        }
        if !seen.insert((variable.to_string(), value.to_string())) {
            return Err(FormatError::Invalid {
                line,
                source: QDagError::DuplicateQuery {
                    variable: variable.to_string(),
                    value: value.to_string(),
                },
            });
        }
        queries.push(QueryNode {
            variable: variable.to_string(),
            value: value.to_string(),
            node: NodeId(node),
        });
    }
    if let Some((i, extra)) = lines.inner.find(|(_, l)| !l.trim().is_empty()) {
        return Err(malformed(i + 1, format!("unexpected content {extra:?}")));
    }

    let line = lines.last;
    QDag::from_parts(evars, nodes, queries).map_err(|source| FormatError::Invalid { line, source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use qdag_core::compiler::compile_named;
    use qdag_core::testing::fork;

    #[test]
    fn fork_round_trip() {
        let dag = compile_named(&fork(), &["B"], &["C"]).unwrap();
        let text = serialize(&dag).unwrap();
        assert!(text.starts_with("QDAG 1\nevars 1\nevar C 2 ON OFF\n"));
        assert_eq!(text.lines().filter(|l| l.starts_with("N ")).count(), 9);
        assert_eq!(text.lines().filter(|l| l.starts_with("E ")).count(), 2);
        assert_eq!(text.lines().filter(|l| l.starts_with("Q ")).count(), 2);
        assert_eq!(deserialize(&text).unwrap(), dag);
    }

    #[test]
    fn numbers_round_trip_exactly() {
        let mut dag = QDag::new();
        for p in [0.1 + 0.2, 1.0 / 3.0, 5e-324, 1.0, 0.0, 0.075] {
            dag.make_num(p).unwrap();
        }
        let back = deserialize(&serialize(&dag).unwrap()).unwrap();
        for (a, b) in dag.nodes().iter().zip(back.nodes()) {
            assert_eq!(a.as_num().unwrap().to_bits(), b.as_num().unwrap().to_bits());
        }
    }

    #[test]
    fn empty_query_dag() {
        let text = serialize(&QDag::new()).unwrap();
        assert_eq!(text, "QDAG 1\nevars 0\nnodes 0\nqueries 0\n");
        assert_eq!(deserialize(&text).unwrap(), QDag::new());
    }

    #[test]
    fn forward_reference() {
        let text = "QDAG 1\nevars 0\nnodes 4\nN 0.5\nN 0.25\nM 2 0 1\nA 2 0 7\nqueries 0\n";
        assert_eq!(
            deserialize(text),
            Err(FormatError::ForwardReference {
                line: 7,
                node: 3,
                operand: 7
            })
        );
    }

    #[test]
    fn version_mismatch() {
        let err = deserialize("QDAG 2\nevars 0\nnodes 0\nqueries 0\n").unwrap_err();
        assert!(matches!(err, FormatError::Version { line: 1, .. }), "{err}");
    }

    #[test]
    fn truncation() {
        let err = deserialize("QDAG 1\nevars 0\nnodes 3\nN 0.5\n").unwrap_err();
        assert_eq!(
            err,
            FormatError::Truncated {
                line: 5,
                expected: "node"
            }
        );
        assert!(deserialize("").is_err());
    }

    #[test]
    fn malformed_lines_report_their_line() {
        let cases = [
            ("QDAG 1\nevars 1\nevar E 3 a b\nnodes 0\nqueries 0\n", 3),
            ("QDAG 1\nevars 0\nnodes 1\nN 1.5\nqueries 0\n", 4),
            ("QDAG 1\nevars 0\nnodes 1\nX 1\nqueries 0\n", 4),
            (
                "QDAG 1\nevars 1\nevar E 2 a b\nnodes 2\nE 0 1\nE 0 1\nqueries 0\n",
                6,
            ),
            ("QDAG 1\nevars 0\nnodes 1\nM 0\nqueries 0\n", 4),
            ("QDAG 1\nevars 0\nnodes 1\nN 0.5\nqueries 1\nQ X x 3\n", 6),
            ("QDAG 1\nevars 0\nnodes 0\nqueries 0\nextra\n", 5),
        ];
        for (text, line) in cases {
            assert_eq!(deserialize(text).unwrap_err().line(), Some(line), "{text}");
        }
    }

    #[test]
    fn names_with_spaces_cannot_be_written() {
        let mut dag = QDag::new();
        dag.register_evidence_var("two words", ["a"]).unwrap();
        assert!(matches!(serialize(&dag), Err(FormatError::BadName(_))));
    }
}
