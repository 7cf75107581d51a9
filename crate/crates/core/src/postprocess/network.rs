//! Attribute co-occurrence network of a final library.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::FinalLibrary;
use crate::learners::sign_of;

pub const NETWORK_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkNode {
    pub index: usize,
    pub name: String,
    /// Final learners that use this attribute.
    pub frequency: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEdge {
    pub source: usize,
    pub target: usize,
    /// Final learners that use both endpoints.
    pub weight: usize,
    /// Mean of sign(w_source) * sign(w_target) over contributing learners
    /// that carry coefficient signs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_sign: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeNetwork {
    pub nodes: Vec<NetworkNode>,
    pub edges: Vec<NetworkEdge>,
}

#[derive(Serialize, Deserialize)]
struct NetworkDocument {
    format_version: u32,
    #[serde(flatten)]
    network: AttributeNetwork,
}

#[derive(Debug, thiserror::Error)]
pub enum NetworkReadError {
    #[error("network json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported network format version {0}")]
    Version(u32),
}

#[derive(Default)]
struct EdgeAccumulator {
    weight: usize,
    sign_sum: i64,
    signed: usize,
}

/// Nodes ordered by attribute index, edges lexicographically by endpoints.
pub fn build_network(final_library: &FinalLibrary, attribute_names: &[String]) -> AttributeNetwork {
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    let mut pairs: BTreeMap<(usize, usize), EdgeAccumulator> = BTreeMap::new();
    for learner in &final_library.learners {
        let attrs = learner.attributes.indices();
        for &a in attrs {
            *freq.entry(a).or_default() += 1;
        }
        for i in 0..attrs.len() {
            for j in i + 1..attrs.len() {
                let acc = pairs.entry((attrs[i], attrs[j])).or_default();
                acc.weight += 1;
                if let Some(signs) = &learner.signs {
                    acc.sign_sum += i64::from(signs[i]) * i64::from(signs[j]);
                    acc.signed += 1;
                }
            }
        }
    }
    let nodes = freq
        .into_iter()
        .map(|(index, frequency)| NetworkNode {
            index,
            name: attribute_names
                .get(index)
                .cloned()
                .unwrap_or_else(|| format!("x{index}")),
            frequency,
        })
        .collect();
    let edges = pairs
        .into_iter()
        .map(|((source, target), acc)| NetworkEdge {
            source,
            target,
            weight: acc.weight,
            mean_sign: (acc.signed > 0).then(|| acc.sign_sum as f64 / acc.signed as f64),
        })
        .collect();
    AttributeNetwork { nodes, edges }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

impl AttributeNetwork {
    /// Undirected Graphviz graph.
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "// swag attribute network, format {NETWORK_FORMAT_VERSION}"
        )
        .unwrap();
        writeln!(out, "graph swag {{").unwrap();
        for node in &self.nodes {
            writeln!(
                out,
                "  a{} [label=\"{}\", freq={}];",
                node.index,
                dot_escape(&node.name),
                node.frequency
            )
            .unwrap();
        }
        for edge in &self.edges {
            write!(
                out,
                "  a{} -- a{} [weight={}",
                edge.source, edge.target, edge.weight
            )
            .unwrap();
            if let Some(sign) = edge.mean_sign {
                write!(out, ", sign={sign}").unwrap();
            }
            writeln!(out, "];").unwrap();
        }
        writeln!(out, "}}").unwrap();
        out
    }

    pub fn to_json(&self) -> String {
        let doc = NetworkDocument {
            format_version: NETWORK_FORMAT_VERSION,
            network: self.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NetworkReadError> {
        let doc: NetworkDocument = serde_json::from_str(text)?;
        if doc.format_version != NETWORK_FORMAT_VERSION {
            return Err(NetworkReadError::Version(doc.format_version));
        }
        Ok(doc.network)
    }

    /// Edge sign readout rounded to {-1, 0, +1}.
    pub fn edge_sign(edge: &NetworkEdge) -> Option<i8> {
        edge.mean_sign.map(sign_of)
    }
}
