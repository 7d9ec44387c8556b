//! Anchor normalization and bottom-up weighted aggregation.
//!
//! Raw observation values are mapped onto the 0–100 scale against each
//! leaf's fixed anchors, then rolled up the tree as weighted means. Every
//! scored node records its score, its contribution (own weight times
//! score), and its coverage (the weight share of leaves beneath it that
//! actually had data).
//!
//! All arithmetic stays at full double precision; rounding to the one
//! decimal shown in tables happens only at presentation time.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{AnchorPair, Direction, IndicatorNode, IndicatorTree, NodeBody};

/// A scored unit: a country, a region, a company.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub name: String,
    pub group: Option<String>,
}

impl Entity {
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            name: id.clone(),
            id,
            group: None,
        }
    }

    pub fn named(id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            group: None,
        }
    }
}

/// One measurement: an entity's value for one indicator, in the
/// indicator's native units (or already on the 0–100 scale when scoring
/// in pre-normalized mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub entity_id: String,
    pub indicator_id: String,
    pub value: f64,
    pub period: Option<String>,
}

impl Observation {
    pub fn new(
        entity_id: impl Into<String>,
        indicator_id: impl Into<String>,
        value: f64,
    ) -> Self {
        Self {
            entity_id: entity_id.into(),
            indicator_id: indicator_id.into(),
            value,
            period: None,
        }
    }
}

/// What to do when a leaf has no observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Error out naming the first indicator without data.
    Fail,
    /// Renormalize the weights of the siblings that do have data.
    #[default]
    Reweight,
    /// Score absent indicators as zero.
    ZeroFill,
}

impl fmt::Display for MissingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MissingPolicy::Fail => "fail",
            MissingPolicy::Reweight => "reweight",
            MissingPolicy::ZeroFill => "zero_fill",
        })
    }
}

/// How observation values are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// Native-unit values attached to leaves; normalized against anchors.
    RawValues,
    /// Values already on the 0–100 scale, attachable to any node id.
    /// A pre-normalized value on a branch short-circuits that subtree.
    PreNormalized,
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputMode::RawValues => "raw_values",
            InputMode::PreNormalized => "pre_normalized",
        })
    }
}

/// Score, contribution and data coverage of one tree node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeScore {
    pub node_id: String,
    /// Normalized score in [0, 100].
    pub score: f64,
    /// Node weight × score.
    pub contribution: f64,
    /// Weight share of leaves beneath this node that had data, in [0, 1].
    pub coverage: f64,
}

/// Full scoring result for one entity: every node with data, plus the
/// composite (the root's score).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub entity_id: String,
    /// Root id of the tree the card was scored against.
    pub tree_id: String,
    pub node_scores: BTreeMap<String, NodeScore>,
    pub composite: f64,
    pub policy_used: MissingPolicy,
}

impl ScoreCard {
    pub fn node_score(&self, id: &str) -> Option<&NodeScore> {
        self.node_scores.get(id)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("value {0} is not finite")]
    NonFiniteValue(f64),
    #[error("unknown indicator id '{0}'")]
    UnknownIndicator(String),
    #[error("indicator '{0}' is not a leaf and cannot carry raw values")]
    NotALeaf(String),
    #[error("pre-normalized score {value} for '{id}' is outside [0, 100]")]
    ScoreOutOfRange { id: String, value: f64 },
    #[error("missing indicator '{0}'")]
    MissingIndicator(String),
    #[error("no data beneath node '{0}'")]
    NoData(String),
    #[error("entity id must be a nonempty token, found {0:?}")]
    InvalidEntityId(String),
}

/// Maps a raw value onto the 0–100 scale against fixed anchors.
///
/// Higher-better: `100 · clamp((value − low) / (high − low), 0, 1)`.
/// Lower-better mirrors it as 100 minus that. Values beyond the anchors
/// are clamped, not rejected: anchors are reference points that real
/// data may exceed.
pub fn normalize_value(
    value: f64,
    anchors: &AnchorPair,
    direction: Direction,
) -> Result<f64, ScoreError> {
    debug_assert!(anchors.is_valid(), "normalize_value needs valid anchors");
    if !value.is_finite() {
        return Err(ScoreError::NonFiniteValue(value));
    }
    let fraction = ((value - anchors.low) / (anchors.high - anchors.low)).clamp(0.0, 1.0);
    Ok(match direction {
        Direction::HigherBetter => 100.0 * fraction,
        Direction::LowerBetter => 100.0 - 100.0 * fraction,
    })
}

/// Combines child scores into one node score under a missing-data policy.
///
/// `child_scores` pairs each child's weight with its score, `None` for
/// children without data; children are assumed fully covered. Fail errors
/// on the first absent child; reweight averages the present children with
/// their weights renormalized; zero-fill scores absent children as 0.
pub fn aggregate_node(
    node: &IndicatorNode,
    child_scores: &[(f64, Option<f64>)],
    policy: MissingPolicy,
) -> Result<NodeScore, ScoreError> {
    let children: Vec<(f64, Option<(f64, f64)>)> = child_scores
        .iter()
        .map(|(w, s)| (*w, s.map(|s| (s, 1.0))))
        .collect();

    if policy == MissingPolicy::Fail {
        if let Some(absent) = children.iter().position(|(_, s)| s.is_none()) {
            let child_id = node
                .children()
                .get(absent)
                .map(|c| c.id.clone())
                .unwrap_or_else(|| format!("{}#{absent}", node.id));
            return Err(ScoreError::MissingIndicator(child_id));
        }
    }

    match combine_children(&children, policy) {
        Some((score, coverage)) => Ok(NodeScore {
            node_id: node.id.clone(),
            score,
            contribution: node.weight * score,
            coverage,
        }),
        None => Err(ScoreError::NoData(node.id.clone())),
    }
}

/// Weighted mean of the present children. Returns `None` when nothing
/// beneath the node has data (only reachable under reweight).
fn combine_children(
    children: &[(f64, Option<(f64, f64)>)],
    policy: MissingPolicy,
) -> Option<(f64, f64)> {
    let mut numerator = 0.0;
    let mut weight_all = 0.0;
    let mut weight_present = 0.0;
    let mut coverage = 0.0;
    for (weight, result) in children {
        weight_all += weight;
        if let Some((score, child_coverage)) = result {
            numerator += weight * score;
            weight_present += weight;
            coverage += weight * child_coverage;
        }
    }
    if weight_present == 0.0 {
        if policy == MissingPolicy::ZeroFill && weight_all > 0.0 {
            return Some((0.0, 0.0));
        }
        return None;
    }
    let denominator = match policy {
        MissingPolicy::Reweight => weight_present,
        MissingPolicy::Fail | MissingPolicy::ZeroFill => weight_all,
    };
    Some((numerator / denominator, coverage.min(1.0)))
}

/// Validated (indicator id -> value) lookup for one entity, reusable
/// across repeated scoring passes of the same data.
pub(crate) struct PreparedEntity {
    pub entity_id: String,
    values: HashMap<String, f64>,
}

pub(crate) fn prepare_entity(
    tree: &IndicatorTree,
    entity_id: &str,
    observations: &[Observation],
    mode: InputMode,
) -> Result<PreparedEntity, ScoreError> {
    if entity_id.is_empty() {
        return Err(ScoreError::InvalidEntityId(entity_id.to_string()));
    }
    let index = tree.node_index();
    let mut values = HashMap::new();
    for obs in observations.iter().filter(|o| o.entity_id == entity_id) {
        let node = index
            .get(obs.indicator_id.as_str())
            .ok_or_else(|| ScoreError::UnknownIndicator(obs.indicator_id.clone()))?;
        if !obs.value.is_finite() {
            return Err(ScoreError::NonFiniteValue(obs.value));
        }
        match mode {
            InputMode::RawValues => {
                if !node.is_leaf() {
                    return Err(ScoreError::NotALeaf(obs.indicator_id.clone()));
                }
            }
            InputMode::PreNormalized => {
                if !(0.0..=100.0).contains(&obs.value) {
                    return Err(ScoreError::ScoreOutOfRange {
                        id: obs.indicator_id.clone(),
                        value: obs.value,
                    });
                }
            }
        }
        // Duplicate (entity, indicator) pairs: last one wins. Ingestion
        // is where duplicates are flagged or rejected.
        values.insert(obs.indicator_id.clone(), obs.value);
    }
    Ok(PreparedEntity {
        entity_id: entity_id.to_string(),
        values,
    })
}

fn eval_node(
    node: &IndicatorNode,
    prepared: &PreparedEntity,
    mode: InputMode,
    policy: MissingPolicy,
    out: &mut BTreeMap<String, NodeScore>,
) -> Result<Option<(f64, f64)>, ScoreError> {
    let mut record = |score: f64, coverage: f64, out: &mut BTreeMap<String, NodeScore>| {
        out.insert(
            node.id.clone(),
            NodeScore {
                node_id: node.id.clone(),
                score,
                contribution: node.weight * score,
                coverage,
            },
        );
        Some((score, coverage))
    };

    if mode == InputMode::PreNormalized {
        if let Some(&value) = prepared.values.get(&node.id) {
            return Ok(record(value, 1.0, out));
        }
    }

    match &node.body {
        NodeBody::Leaf { anchors, direction } => {
            let raw = match mode {
                InputMode::RawValues => prepared.values.get(&node.id).copied(),
                InputMode::PreNormalized => None, // handled above
            };
            match raw {
                Some(value) => {
                    let score = normalize_value(value, anchors, *direction)?;
                    Ok(record(score, 1.0, out))
                }
                None => match policy {
                    MissingPolicy::Fail => Err(ScoreError::MissingIndicator(node.id.clone())),
                    MissingPolicy::Reweight => Ok(None),
                    MissingPolicy::ZeroFill => Ok(record(0.0, 0.0, out)),
                },
            }
        }
        NodeBody::Branch { children } => {
            let mut results = Vec::with_capacity(children.len());
            for child in children {
                results.push((child.weight, eval_node(child, prepared, mode, policy, out)?));
            }
            match combine_children(&results, policy) {
                Some((score, coverage)) => Ok(record(score, coverage, out)),
                None => Ok(None),
            }
        }
    }
}

pub(crate) fn score_prepared(
    tree: &IndicatorTree,
    prepared: &PreparedEntity,
    policy: MissingPolicy,
    mode: InputMode,
) -> Result<ScoreCard, ScoreError> {
    let mut node_scores = BTreeMap::new();
    let root = eval_node(&tree.root, prepared, mode, policy, &mut node_scores)?;
    let Some((composite, _)) = root else {
        return Err(ScoreError::NoData(tree.root.id.clone()));
    };
    Ok(ScoreCard {
        entity_id: prepared.entity_id.clone(),
        tree_id: tree.root.id.clone(),
        node_scores,
        composite,
        policy_used: policy,
    })
}

/// Scores one entity against the tree. Observations belonging to other
/// entities are ignored; duplicate observations for the same indicator
/// resolve last-wins.
pub fn score_entity(
    tree: &IndicatorTree,
    entity_id: &str,
    observations: &[Observation],
    policy: MissingPolicy,
    mode: InputMode,
) -> Result<ScoreCard, ScoreError> {
    let prepared = prepare_entity(tree, entity_id, observations, mode)?;
    score_prepared(tree, &prepared, policy, mode)
}

/// Scores every entity appearing in the observations, in first-appearance
/// order.
pub fn score_all(
    tree: &IndicatorTree,
    observations: &[Observation],
    policy: MissingPolicy,
    mode: InputMode,
) -> Result<Vec<ScoreCard>, ScoreError> {
    let mut order: Vec<&str> = Vec::new();
    for obs in observations {
        if !order.contains(&obs.entity_id.as_str()) {
            order.push(&obs.entity_id);
        }
    }
    order
        .into_iter()
        .map(|entity_id| score_entity(tree, entity_id, observations, policy, mode))
        .collect()
}

/// Per-dimension contributions (weight × score) of a card, in tree order,
/// covering every top-level dimension the card has data for. At full
/// coverage these sum to the composite.
pub fn dimension_contributions(card: &ScoreCard, tree: &IndicatorTree) -> Vec<(String, f64)> {
    tree.dimensions()
        .iter()
        .filter_map(|dim| {
            card.node_scores
                .get(&dim.id)
                .map(|ns| (dim.id.clone(), ns.contribution))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{parse_tree, IndicatorNode, IndicatorTree};

    fn anchors(low: f64, high: f64) -> AnchorPair {
        AnchorPair::new(low, high)
    }

    fn canonical_tree() -> IndicatorTree {
        parse_tree(
            &std::fs::read_to_string(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../fixtures/ai_index_tree.json"
            ))
            .unwrap(),
        )
        .unwrap()
    }

    // Tab. 1 column order: TP, RD, AIS, IE, ET, PG, SI.
    const EAST_SCORES: [(f64, f64); 7] = [
        (0.15, 71.7),
        (0.20, 27.5),
        (0.10, 31.7),
        (0.20, 35.5),
        (0.15, 31.7),
        (0.10, 38.5),
        (0.10, 48.8),
    ];

    #[test]
    fn normalize_midpoint() {
        let s = normalize_value(50.0, &anchors(0.0, 100.0), Direction::HigherBetter).unwrap();
        assert_eq!(s, 50.0);
    }

    #[test]
    fn normalize_share_type_indicator() {
        let s = normalize_value(0.697, &anchors(0.0, 1.0), Direction::HigherBetter).unwrap();
        assert!((s - 69.7).abs() < 1e-9, "got {s}");
    }

    #[test]
    fn normalize_clamps_above_high_anchor() {
        let s = normalize_value(120.0, &anchors(0.0, 100.0), Direction::HigherBetter).unwrap();
        assert_eq!(s, 100.0);
    }

    #[test]
    fn normalize_clamps_below_low_anchor() {
        let s = normalize_value(-5.0, &anchors(0.0, 100.0), Direction::HigherBetter).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn normalize_lower_better_mirrors() {
        let s = normalize_value(30.0, &anchors(0.0, 100.0), Direction::LowerBetter).unwrap();
        assert!((s - 70.0).abs() < 1e-12, "got {s}");
    }

    #[test]
    fn normalize_rejects_non_finite() {
        let err = normalize_value(f64::NAN, &anchors(0.0, 1.0), Direction::HigherBetter);
        assert!(matches!(err, Err(ScoreError::NonFiniteValue(_))));
    }

    #[test]
    fn aggregate_reproduces_east_china_composite() {
        let node = IndicatorNode::branch("east_test", "East", 1.0, vec![]);
        let children: Vec<(f64, Option<f64>)> =
            EAST_SCORES.iter().map(|&(w, s)| (w, Some(s))).collect();
        let ns = aggregate_node(&node, &children, MissingPolicy::Reweight).unwrap();
        assert!((ns.score - 40.01).abs() < 1e-9, "got {}", ns.score);
        assert!((ns.score - 40.0).abs() <= 0.05);
        assert!((ns.coverage - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_of_equal_scores_is_that_score_under_any_policy() {
        let node = IndicatorNode::branch("n", "N", 1.0, vec![]);
        let children = vec![(0.2, Some(37.5)), (0.5, Some(37.5)), (0.3, Some(37.5))];
        for policy in [
            MissingPolicy::Fail,
            MissingPolicy::Reweight,
            MissingPolicy::ZeroFill,
        ] {
            let ns = aggregate_node(&node, &children, policy).unwrap();
            assert!((ns.score - 37.5).abs() < 1e-12, "{policy}: {}", ns.score);
        }
    }

    #[test]
    fn aggregate_reweights_to_the_single_present_child() {
        let node = IndicatorNode::branch("n", "N", 1.0, vec![]);
        let children = vec![(0.5, Some(60.0)), (0.5, None)];
        let ns = aggregate_node(&node, &children, MissingPolicy::Reweight).unwrap();
        assert_eq!(ns.score, 60.0);
        assert!((ns.coverage - 0.5).abs() < 1e-12);
    }

    #[test]
    fn aggregate_zero_fill_scores_absent_children_as_zero() {
        let node = IndicatorNode::branch("n", "N", 1.0, vec![]);
        let children = vec![(0.5, Some(60.0)), (0.5, None)];
        let ns = aggregate_node(&node, &children, MissingPolicy::ZeroFill).unwrap();
        assert!((ns.score - 30.0).abs() < 1e-12);
        assert!((ns.coverage - 0.5).abs() < 1e-12);
    }

    #[test]
    fn aggregate_fail_names_the_absent_child() {
        let node = IndicatorNode::branch(
            "n",
            "N",
            1.0,
            vec![
                IndicatorNode::leaf("a", "A", 0.5, anchors(0.0, 1.0), Direction::HigherBetter),
                IndicatorNode::leaf("b", "B", 0.5, anchors(0.0, 1.0), Direction::HigherBetter),
            ],
        );
        let children = vec![(0.5, Some(60.0)), (0.5, None)];
        let err = aggregate_node(&node, &children, MissingPolicy::Fail).unwrap_err();
        assert_eq!(err, ScoreError::MissingIndicator("b".into()));
    }

    #[test]
    fn aggregate_reweight_with_nothing_present_reports_no_data() {
        let node = IndicatorNode::branch("n", "N", 1.0, vec![]);
        let children = vec![(0.5, None), (0.5, None)];
        let err = aggregate_node(&node, &children, MissingPolicy::Reweight).unwrap_err();
        assert_eq!(err, ScoreError::NoData("n".into()));
    }

    fn pre_normalized_obs(entity: &str, scores: [f64; 7]) -> Vec<Observation> {
        const DIMS: [&str; 7] = [
            "technical_performance",
            "research_development",
            "ai_for_science",
            "industry_economy",
            "education_talent",
            "policy_governance",
            "social_impact",
        ];
        DIMS.iter()
            .zip(scores)
            .map(|(dim, s)| Observation::new(entity, *dim, s))
            .collect()
    }

    #[test]
    fn score_entity_reproduces_northeast_china() {
        let tree = canonical_tree();
        // Tab. 1 column order: TP, RD, AIS, IE, ET, PG, SI.
        let obs = pre_normalized_obs("northeast_china", [37.6, 3.9, 2.9, 2.2, 2.3, 6.8, 7.3]);
        let card = score_entity(
            &tree,
            "northeast_china",
            &obs,
            MissingPolicy::Fail,
            InputMode::PreNormalized,
        )
        .unwrap();
        assert!((card.composite - 8.905).abs() < 1e-9, "got {}", card.composite);
        assert!((card.composite - 8.9).abs() <= 0.05);
    }

    #[test]
    fn score_entity_reproduces_us_composite_from_derived_scores() {
        // Independent oracle: the published per-dimension contributions
        // sum directly to the composite; the engine must agree after
        // dividing them back out into scores and re-aggregating.
        const US_CONTRIBUTIONS: [(f64, f64); 7] = [
            (0.15, 12.9), // technical performance
            (0.20, 11.3), // research & development
            (0.10, 7.15), // ai for science
            (0.20, 14.8), // industry & economy
            (0.15, 9.03), // education & talent
            (0.10, 8.9),  // policy & governance
            (0.10, 4.1),  // social impact
        ];
        let oracle: f64 = US_CONTRIBUTIONS.iter().map(|(_, c)| c).sum();
        assert!((oracle - 68.18).abs() < 1e-9);

        let scores: Vec<f64> = US_CONTRIBUTIONS.iter().map(|(w, c)| c / w).collect();
        let tree = canonical_tree();
        let obs = pre_normalized_obs(
            "us",
            [
                scores[0], scores[1], scores[2], scores[3], scores[4], scores[5], scores[6],
            ],
        );
        let card = score_entity(&tree, "us", &obs, MissingPolicy::Fail, InputMode::PreNormalized)
            .unwrap();
        assert!((card.composite - oracle).abs() < 1e-9, "got {}", card.composite);
        assert!((card.composite - 68.18).abs() < 1e-9);
    }

    #[test]
    fn score_entity_with_no_data_under_fail_names_a_missing_indicator() {
        let tree = canonical_tree();
        let err =
            score_entity(&tree, "ghost", &[], MissingPolicy::Fail, InputMode::PreNormalized)
                .unwrap_err();
        assert!(matches!(err, ScoreError::MissingIndicator(_)), "got {err:?}");
    }

    #[test]
    fn score_entity_with_no_data_under_reweight_reports_no_data() {
        let tree = canonical_tree();
        let err = score_entity(
            &tree,
            "ghost",
            &[],
            MissingPolicy::Reweight,
            InputMode::PreNormalized,
        )
        .unwrap_err();
        assert_eq!(err, ScoreError::NoData("ai_index".into()));
    }

    #[test]
    fn unknown_indicator_is_rejected() {
        let tree = canonical_tree();
        let obs = vec![Observation::new("x", "made_up", 1.0)];
        let err = score_entity(&tree, "x", &obs, MissingPolicy::Reweight, InputMode::RawValues)
            .unwrap_err();
        assert_eq!(err, ScoreError::UnknownIndicator("made_up".into()));
    }

    #[test]
    fn raw_value_on_a_branch_is_rejected() {
        let tree = canonical_tree();
        let obs = vec![Observation::new("x", "ai_index", 1.0)];
        let err = score_entity(&tree, "x", &obs, MissingPolicy::Reweight, InputMode::RawValues)
            .unwrap_err();
        assert_eq!(err, ScoreError::NotALeaf("ai_index".into()));
    }

    #[test]
    fn pre_normalized_value_outside_scale_is_rejected() {
        let tree = canonical_tree();
        let obs = vec![Observation::new("x", "social_impact", 100.5)];
        let err = score_entity(
            &tree,
            "x",
            &obs,
            MissingPolicy::Reweight,
            InputMode::PreNormalized,
        )
        .unwrap_err();
        assert!(matches!(err, ScoreError::ScoreOutOfRange { .. }));
    }

    #[test]
    fn pre_normalized_value_may_target_the_root() {
        let tree = canonical_tree();
        let obs = vec![Observation::new("x", "ai_index", 55.5)];
        let card = score_entity(
            &tree,
            "x",
            &obs,
            MissingPolicy::Reweight,
            InputMode::PreNormalized,
        )
        .unwrap();
        assert_eq!(card.composite, 55.5);
        assert_eq!(card.node_scores.len(), 1);
    }

    #[test]
    fn duplicate_observations_resolve_last_wins() {
        let tree = canonical_tree();
        let mut obs = pre_normalized_obs("x", [10.0; 7]);
        obs.push(Observation::new("x", "social_impact", 90.0));
        let card =
            score_entity(&tree, "x", &obs, MissingPolicy::Fail, InputMode::PreNormalized).unwrap();
        assert_eq!(card.node_score("social_impact").unwrap().score, 90.0);
    }

    #[test]
    fn reweight_renormalizes_over_present_dimensions() {
        let tree = canonical_tree();
        // Social impact (weight 0.10) has no data; the other six carry 60.
        let obs: Vec<Observation> = pre_normalized_obs("x", [60.0; 7])
            .into_iter()
            .filter(|o| o.indicator_id != "social_impact")
            .collect();
        let card = score_entity(
            &tree,
            "x",
            &obs,
            MissingPolicy::Reweight,
            InputMode::PreNormalized,
        )
        .unwrap();
        assert!((card.composite - 60.0).abs() < 1e-9);
        let root = card.node_score("ai_index").unwrap();
        assert!((root.coverage - 0.9).abs() < 1e-9, "got {}", root.coverage);
    }

    #[test]
    fn raw_values_normalize_against_leaf_anchors() {
        let doc = r#"{
            "index": {
                "id": "idx", "name": "Idx", "scale": 100,
                "dimensions": [
                    {"id": "pats", "name": "Patent share", "weight": 0.5,
                     "anchors": {"low": 0, "high": 1}},
                    {"id": "lag", "name": "Latency", "weight": 0.5,
                     "anchors": {"low": 0, "high": 100}, "direction": "lower_better"}
                ]
            }
        }"#;
        let tree = parse_tree(doc).unwrap();
        let obs = vec![
            Observation::new("x", "pats", 0.697),
            Observation::new("x", "lag", 30.0),
        ];
        let card =
            score_entity(&tree, "x", &obs, MissingPolicy::Fail, InputMode::RawValues).unwrap();
        assert!((card.node_score("pats").unwrap().score - 69.7).abs() < 1e-9);
        assert!((card.node_score("lag").unwrap().score - 70.0).abs() < 1e-9);
        assert!((card.composite - 69.85).abs() < 1e-9);
    }

    #[test]
    fn contributions_match_published_china_values() {
        let tree = canonical_tree();
        const CHINA_CONTRIBUTIONS: [(&str, f64, f64); 7] = [
            ("research_development", 0.20, 10.3),
            ("industry_economy", 0.20, 11.2),
            ("technical_performance", 0.15, 9.98),
            ("education_talent", 0.15, 8.72),
            ("ai_for_science", 0.10, 6.91),
            ("policy_governance", 0.10, 5.3),
            ("social_impact", 0.10, 7.0),
        ];
        let obs: Vec<Observation> = CHINA_CONTRIBUTIONS
            .iter()
            .map(|(dim, w, c)| Observation::new("china", *dim, c / w))
            .collect();
        let card =
            score_entity(&tree, "china", &obs, MissingPolicy::Fail, InputMode::PreNormalized)
                .unwrap();
        let contributions = dimension_contributions(&card, &tree);
        assert_eq!(contributions.len(), 7);
        for ((dim, _, expected), (got_dim, got)) in
            CHINA_CONTRIBUTIONS.iter().zip(&contributions)
        {
            assert_eq!(dim, got_dim);
            assert!((got - expected).abs() < 1e-9, "{dim}: {got} vs {expected}");
        }
        let total: f64 = contributions.iter().map(|(_, c)| c).sum();
        assert!((total - 59.41).abs() < 1e-9, "got {total}");
        assert!((total - card.composite).abs() < 1e-9);
    }

    #[test]
    fn all_zero_scores_give_zero_contributions_and_composite() {
        let tree = canonical_tree();
        let obs = pre_normalized_obs("zero", [0.0; 7]);
        let card =
            score_entity(&tree, "zero", &obs, MissingPolicy::Fail, InputMode::PreNormalized)
                .unwrap();
        assert_eq!(card.composite, 0.0);
        for (_, c) in dimension_contributions(&card, &tree) {
            assert_eq!(c, 0.0);
        }
    }

    #[test]
    fn us_contribution_example_technical_performance() {
        let tree = canonical_tree();
        let obs = vec![Observation::new("us", "technical_performance", 86.0)];
        let card = score_entity(
            &tree,
            "us",
            &obs,
            MissingPolicy::Reweight,
            InputMode::PreNormalized,
        )
        .unwrap();
        let ns = card.node_score("technical_performance").unwrap();
        assert!((ns.contribution - 12.9).abs() < 1e-9, "got {}", ns.contribution);
    }

    #[test]
    fn score_all_groups_by_first_appearance() {
        let tree = canonical_tree();
        let mut obs = pre_normalized_obs("b", [10.0; 7]);
        obs.extend(pre_normalized_obs("a", [20.0; 7]));
        let cards =
            score_all(&tree, &obs, MissingPolicy::Fail, InputMode::PreNormalized).unwrap();
        assert_eq!(cards.len(), 2);
        assert_eq!(cards[0].entity_id, "b");
        assert_eq!(cards[1].entity_id, "a");
    }
}
