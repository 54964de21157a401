//! Whitespace-separated text formats with 1-based ids and `#` comments.
//!
//! * secretary: one value per line
//! * bipartite: `n m`, then one `l r w` line per edge
//! * graph: vertex count, then one `u v w` line per edge

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BipartiteInstance, GraphEdge, GraphInstance, SecretaryInstance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Secretary,
    Bipartite,
    Graph,
}

impl FromStr for InstanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "secretary" => Ok(InstanceKind::Secretary),
            "bipartite" => Ok(InstanceKind::Bipartite),
            "graph" | "graphic" => Ok(InstanceKind::Graph),
            other => Err(Error::InvalidParameter(format!("unknown instance kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyInstance {
    Secretary(SecretaryInstance),
    Bipartite(BipartiteInstance),
    Graph(GraphInstance),
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Iterator for Lines<'a> {
    type Item = (usize, Vec<&'a str>);

    fn next(&mut self) -> Option<Self::Item> {
        for (idx, line) in self.inner.by_ref() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Some((idx + 1, trimmed.split_whitespace().collect()));
        }
        None
    }
}

fn field<T: FromStr>(tokens: &[&str], pos: usize, line: usize, what: &str) -> Result<T> {
    let token = tokens.get(pos).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} {token:?}"),
    })
}

fn expect_arity(tokens: &[&str], arity: usize, line: usize) -> Result<()> {
    if tokens.len() != arity {
        return Err(Error::Parse {
            line,
            message: format!("expected {arity} fields, found {}", tokens.len()),
        });
    }
    Ok(())
}

fn one_based(id: usize, bound: usize, line: usize, what: &str) -> Result<usize> {
    if id == 0 || id > bound {
        return Err(Error::Parse {
            line,
            message: format!("{what} id {id} outside 1..={bound}"),
        });
    }
    Ok(id - 1)
}

fn weight(tokens: &[&str], pos: usize, line: usize) -> Result<f64> {
    let w: f64 = field(tokens, pos, line, "weight")?;
    if !w.is_finite() || w < 0.0 {
        return Err(Error::Validation(format!("line {line}: weight {w} must be nonnegative")));
    }
    Ok(w)
}

pub fn parse_instance(text: &str, kind: InstanceKind) -> Result<AnyInstance> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    match kind {
        InstanceKind::Secretary => {
            let mut values = Vec::new();
            for (line, tokens) in lines {
                expect_arity(&tokens, 1, line)?;
                values.push(weight(&tokens, 0, line)?);
            }
            Ok(AnyInstance::Secretary(SecretaryInstance::new(values)?))
        }
        InstanceKind::Bipartite => {
            let (line, header) = lines.next().ok_or(Error::Parse {
                line: 1,
                message: "missing `n m` header".into(),
            })?;
            expect_arity(&header, 2, line)?;
            let n: usize = field(&header, 0, line, "left count")?;
            let m: usize = field(&header, 1, line, "right count")?;
            let mut edges = Vec::new();
            for (line, tokens) in lines {
                expect_arity(&tokens, 3, line)?;
                let l = one_based(field(&tokens, 0, line, "left id")?, n, line, "left")?;
                let r = one_based(field(&tokens, 1, line, "right id")?, m, line, "right")?;
                edges.push((l, r, weight(&tokens, 2, line)?));
            }
            Ok(AnyInstance::Bipartite(BipartiteInstance::new(n, m, &edges)?))
        }
        InstanceKind::Graph => {
            let (line, header) = lines.next().ok_or(Error::Parse {
                line: 1,
                message: "missing vertex count".into(),
            })?;
            expect_arity(&header, 1, line)?;
            let n: usize = field(&header, 0, line, "vertex count")?;
            let mut edges = Vec::new();
            for (line, tokens) in lines {
                expect_arity(&tokens, 3, line)?;
                let u = one_based(field(&tokens, 0, line, "vertex")?, n, line, "vertex")?;
                let v = one_based(field(&tokens, 1, line, "vertex")?, n, line, "vertex")?;
                if u == v {
                    return Err(Error::Validation(format!("line {line}: self-loop at vertex {}", u + 1)));
                }
                edges.push(GraphEdge {
                    u,
                    v,
                    weight: weight(&tokens, 2, line)?,
                });
            }
            Ok(AnyInstance::Graph(GraphInstance::new(n, edges)?))
        }
    }
}

/// Serializes an instance; dummy nodes of an augmented bipartite instance
/// are written as ordinary right nodes.
pub fn write_instance(instance: &AnyInstance) -> String {
    let mut out = String::new();
    match instance {
        AnyInstance::Secretary(inst) => {
            for v in inst.values() {
                let _ = writeln!(out, "{v}");
            }
        }
        AnyInstance::Bipartite(inst) => {
            let _ = writeln!(out, "{} {}", inst.left_count(), inst.right_count());
            for (l, r, w) in inst.edges() {
                let _ = writeln!(out, "{} {} {w}", l + 1, r + 1);
            }
        }
        AnyInstance::Graph(graph) => {
            let _ = writeln!(out, "{}", graph.vertex_count());
            for e in graph.edges() {
                let _ = writeln!(out, "{} {} {}", e.u + 1, e.v + 1, e.weight);
            }
        }
    }
    out
}
