//! The hierarchical indicator weight tree.
//!
//! A tree is a single root with weighted child nodes. Branches carry more
//! nodes; leaves carry an anchor pair that fixes how raw indicator values
//! map onto the 0–100 scale. Within every sibling group the weights must
//! sum to 1, so the product of weights along a root-to-leaf path is that
//! leaf's effective share of the composite.
//!
//! Trees are parsed from a JSON document (see [`parse_tree`]), validated
//! as a whole, and never mutated afterwards, so they can be shared freely
//! across threads.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sibling weight sums may deviate from 1 by at most this much.
///
/// Loose enough that weights written as short decimals ("0.2", "0.15")
/// never trip it, tight enough to catch genuine authoring mistakes.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

/// The fixed maximum of the normalized score scale.
pub const SCALE: f64 = 100.0;

/// Fixed low/high reference values for one leaf indicator, in the
/// indicator's native units. `low` must be strictly below `high`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorPair {
    pub low: f64,
    pub high: f64,
}

impl AnchorPair {
    pub fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    pub fn is_valid(&self) -> bool {
        self.low.is_finite() && self.high.is_finite() && self.low < self.high
    }
}

/// Whether larger raw values are better (the default) or worse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    HigherBetter,
    LowerBetter,
}

/// Payload of a node: either children or leaf scoring parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeBody {
    Branch { children: Vec<IndicatorNode> },
    Leaf { anchors: AnchorPair, direction: Direction },
}

/// One node of the indicator tree.
///
/// `weight` is the node's share within its sibling group, in (0, 1].
/// The root always has weight 1.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorNode {
    pub id: String,
    pub name: String,
    pub weight: f64,
    pub body: NodeBody,
}

impl IndicatorNode {
    pub fn branch(
        id: impl Into<String>,
        name: impl Into<String>,
        weight: f64,
        children: Vec<IndicatorNode>,
    ) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            weight,
            body: NodeBody::Branch { children },
        }
    }

    pub fn leaf(
        id: impl Into<String>,
        name: impl Into<String>,
        weight: f64,
        anchors: AnchorPair,
        direction: Direction,
    ) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            weight,
            body: NodeBody::Leaf { anchors, direction },
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.body, NodeBody::Leaf { .. })
    }

    /// The node's children, empty for leaves.
    pub fn children(&self) -> &[IndicatorNode] {
        match &self.body {
            NodeBody::Branch { children } => children,
            NodeBody::Leaf { .. } => &[],
        }
    }
}

/// A validated-or-not indicator tree. [`validate_tree`] decides which;
/// [`parse_tree`] only ever hands out valid ones.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorTree {
    pub root: IndicatorNode,
    /// Maximum of the normalized score scale; fixed at 100.
    pub scale: f64,
}

impl IndicatorTree {
    pub fn new(root: IndicatorNode) -> Self {
        Self { root, scale: SCALE }
    }

    /// Top-level dimensions (the root's direct children).
    pub fn dimensions(&self) -> &[IndicatorNode] {
        self.root.children()
    }

    /// Looks a node up by id anywhere in the tree.
    pub fn node(&self, id: &str) -> Option<&IndicatorNode> {
        fn find<'a>(node: &'a IndicatorNode, id: &str) -> Option<&'a IndicatorNode> {
            if node.id == id {
                return Some(node);
            }
            node.children().iter().find_map(|c| find(c, id))
        }
        find(&self.root, id)
    }

    /// All nodes in depth-first document order, root first.
    pub fn nodes(&self) -> Vec<&IndicatorNode> {
        fn collect<'a>(node: &'a IndicatorNode, out: &mut Vec<&'a IndicatorNode>) {
            out.push(node);
            for child in node.children() {
                collect(child, out);
            }
        }
        let mut out = Vec::new();
        collect(&self.root, &mut out);
        out
    }

    /// id -> node map over the whole tree.
    pub(crate) fn node_index(&self) -> HashMap<&str, &IndicatorNode> {
        self.nodes().into_iter().map(|n| (n.id.as_str(), n)).collect()
    }
}

/// One invariant violation, located by the slash-joined id path of the
/// offending node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Every invariant violation found in a tree. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "no violations");
        }
        write!(f, "{} violation(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "; {v}")?;
        }
        Ok(())
    }
}

/// Why a configuration document could not be turned into a valid tree.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("semantic error at {path}: {message}")]
    Semantic { path: String, message: String },
    #[error("invalid tree: {0}")]
    Invalid(ValidationReport),
}

// ---------------------------------------------------------------------------
// Configuration document (de)serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RawDocument {
    index: RawIndex,
}

#[derive(Serialize, Deserialize)]
struct RawIndex {
    id: String,
    name: String,
    scale: f64,
    dimensions: Vec<RawNode>,
}

#[derive(Serialize, Deserialize)]
struct RawNode {
    id: String,
    name: String,
    weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    children: Option<Vec<RawNode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anchors: Option<AnchorPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    direction: Option<Direction>,
}

fn convert_node(raw: RawNode, parent_path: &str) -> Result<IndicatorNode, ParseError> {
    let label = if raw.id.is_empty() { "?" } else { raw.id.as_str() };
    let path = format!("{parent_path}/{label}");
    let body = match (raw.children, raw.anchors) {
        (Some(_), Some(_)) => {
            return Err(ParseError::Semantic {
                path,
                message: "node declares both children and anchors".into(),
            });
        }
        (None, None) => {
            return Err(ParseError::Semantic {
                path,
                message: "node declares neither children nor anchors".into(),
            });
        }
        (Some(children), None) => {
            if raw.direction.is_some() {
                return Err(ParseError::Semantic {
                    path,
                    message: "direction is only meaningful on a leaf".into(),
                });
            }
            let children = children
                .into_iter()
                .map(|c| convert_node(c, &path))
                .collect::<Result<Vec<_>, _>>()?;
            NodeBody::Branch { children }
        }
        (None, Some(anchors)) => NodeBody::Leaf {
            anchors,
            direction: raw.direction.unwrap_or_default(),
        },
    };
    Ok(IndicatorNode {
        id: raw.id,
        name: raw.name,
        weight: raw.weight,
        body,
    })
}

fn node_to_raw(node: &IndicatorNode) -> RawNode {
    match &node.body {
        NodeBody::Branch { children } => RawNode {
            id: node.id.clone(),
            name: node.name.clone(),
            weight: node.weight,
            children: Some(children.iter().map(node_to_raw).collect()),
            anchors: None,
            direction: None,
        },
        NodeBody::Leaf { anchors, direction } => RawNode {
            id: node.id.clone(),
            name: node.name.clone(),
            weight: node.weight,
            children: None,
            anchors: Some(*anchors),
            direction: Some(*direction),
        },
    }
}

/// Parses a configuration document without enforcing tree invariants.
///
/// Shape problems (malformed JSON, missing fields, a node with both
/// children and anchors) are reported here; everything else is left to
/// [`validate_tree`].
pub fn parse_document(text: &str) -> Result<IndicatorTree, ParseError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawDocument = serde_path_to_error::deserialize(de).map_err(|err| {
        let inner = err.inner();
        if inner.is_data() {
            ParseError::Semantic {
                path: err.path().to_string(),
                message: inner.to_string(),
            }
        } else {
            ParseError::Syntax(inner.to_string())
        }
    })?;

    let root_label = if raw.index.id.is_empty() { "?" } else { raw.index.id.as_str() };
    let root_path = root_label.to_string();
    let children = raw
        .index
        .dimensions
        .into_iter()
        .map(|d| convert_node(d, &root_path))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(IndicatorTree {
        root: IndicatorNode {
            id: raw.index.id,
            name: raw.index.name,
            weight: 1.0,
            body: NodeBody::Branch { children },
        },
        scale: raw.index.scale,
    })
}

/// Parses a configuration document and rejects it unless the resulting
/// tree passes [`validate_tree`] with zero violations.
pub fn parse_tree(text: &str) -> Result<IndicatorTree, ParseError> {
    let tree = parse_document(text)?;
    let report = validate_tree(&tree);
    if report.is_valid() {
        Ok(tree)
    } else {
        Err(ParseError::Invalid(report))
    }
}

/// Renders a tree back into its configuration document form.
///
/// `parse_tree(&to_document(&t))` reproduces `t` structurally.
pub fn to_document(tree: &IndicatorTree) -> String {
    let raw = RawDocument {
        index: RawIndex {
            id: tree.root.id.clone(),
            name: tree.root.name.clone(),
            scale: tree.scale,
            dimensions: tree.root.children().iter().map(node_to_raw).collect(),
        },
    };
    let mut text = serde_json::to_string_pretty(&raw).expect("tree serialization cannot fail");
    text.push('\n');
    text
}

fn is_token(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Checks every tree invariant and reports each violation with the path
/// of the offending node. Violations are data, not failures: an invalid
/// tree yields a populated report, never an error.
pub fn validate_tree(tree: &IndicatorTree) -> ValidationReport {
    let mut violations = Vec::new();
    let root_path = display_label(&tree.root).to_string();

    if tree.scale != SCALE {
        violations.push(Violation {
            path: root_path.clone(),
            message: format!("scale must be 100, found {}", tree.scale),
        });
    }
    if tree.root.weight != 1.0 {
        violations.push(Violation {
            path: root_path.clone(),
            message: format!("root weight must be 1, found {}", tree.root.weight),
        });
    }

    let mut seen: HashMap<&str, String> = HashMap::new();
    check_node(&tree.root, &root_path, true, &mut seen, &mut violations);
    ValidationReport { violations }
}

fn display_label(node: &IndicatorNode) -> &str {
    if node.id.is_empty() {
        "?"
    } else {
        &node.id
    }
}

fn check_node<'a>(
    node: &'a IndicatorNode,
    path: &str,
    is_root: bool,
    seen: &mut HashMap<&'a str, String>,
    violations: &mut Vec<Violation>,
) {
    if !is_token(&node.id) {
        violations.push(Violation {
            path: path.to_string(),
            message: format!(
                "invalid id {:?}: ids must be nonempty tokens of [A-Za-z0-9_.-]",
                node.id
            ),
        });
    } else if let Some(first) = seen.get(node.id.as_str()) {
        violations.push(Violation {
            path: path.to_string(),
            message: format!("duplicate id '{}' (first seen at {first})", node.id),
        });
    } else {
        seen.insert(&node.id, path.to_string());
    }

    if !node.weight.is_finite() || node.weight <= 0.0 || node.weight > 1.0 {
        // Not applied to the root: its weight is checked separately.
        if !is_root {
            violations.push(Violation {
                path: path.to_string(),
                message: format!("weight must be in (0, 1], found {}", node.weight),
            });
        }
    }

    match &node.body {
        NodeBody::Leaf { anchors, .. } => {
            if !anchors.low.is_finite() || !anchors.high.is_finite() {
                violations.push(Violation {
                    path: path.to_string(),
                    message: format!(
                        "non-finite anchor (low {}, high {})",
                        anchors.low, anchors.high
                    ),
                });
            } else if anchors.low == anchors.high {
                violations.push(Violation {
                    path: path.to_string(),
                    message: format!("degenerate anchors (low == high == {})", anchors.low),
                });
            } else if anchors.low > anchors.high {
                violations.push(Violation {
                    path: path.to_string(),
                    message: format!(
                        "anchors inverted (low {} > high {})",
                        anchors.low, anchors.high
                    ),
                });
            }
        }
        NodeBody::Branch { children } => {
            if children.is_empty() {
                violations.push(Violation {
                    path: path.to_string(),
                    message: "branch has no children".into(),
                });
            } else {
                let sum: f64 = children.iter().map(|c| c.weight).sum();
                if !sum.is_finite() || (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                    violations.push(Violation {
                        path: path.to_string(),
                        message: format!(
                            "sibling weights under '{}' sum to {sum}, expected 1 within {WEIGHT_SUM_TOLERANCE}",
                            display_label(node)
                        ),
                    });
                }
            }
            for child in children {
                let child_path = format!("{path}/{}", display_label(child));
                check_node(child, &child_path, false, seen, violations);
            }
        }
    }
}

/// Leaf ids paired with their effective weights (product of weights on
/// the root-to-leaf path), in depth-first document order.
///
/// For a valid tree the effective weights sum to 1 within
/// [`WEIGHT_SUM_TOLERANCE`]; callers must not feed invalid trees.
pub fn flatten_leaves(tree: &IndicatorTree) -> Vec<(&str, f64)> {
    debug_assert!(validate_tree(tree).is_valid(), "flatten_leaves needs a valid tree");
    fn walk<'a>(node: &'a IndicatorNode, acc: f64, out: &mut Vec<(&'a str, f64)>) {
        match &node.body {
            NodeBody::Leaf { .. } => out.push((&node.id, acc)),
            NodeBody::Branch { children } => {
                for child in children {
                    walk(child, acc * child.weight, out);
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(&tree.root, 1.0, &mut out);
    out
}
