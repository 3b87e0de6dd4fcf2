//! The entity graph: units, nodes, groups, relationships, and the scenario
//! layers that assign their parameters.
//!
//! Entities are declared implicitly by appearing in dataset rows. Parameter
//! assignments live in named scenario layers; nothing here decides which
//! layers apply — stacking them into an effective view is the scenario
//! module's job.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::value::ParameterValue;
use crate::CoreError;

/// Entity classes a dataset row can address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ClassTag {
    Model,
    TemporalBlock,
    Unit,
    Node,
    Group,
    UnitFromNode,
    UnitToNode,
    UnitNodeNode,
    UserConstraint,
}

impl ClassTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassTag::Model => "model",
            ClassTag::TemporalBlock => "temporal_block",
            ClassTag::Unit => "unit",
            ClassTag::Node => "node",
            ClassTag::Group => "group",
            ClassTag::UnitFromNode => "unit__from_node",
            ClassTag::UnitToNode => "unit__to_node",
            ClassTag::UnitNodeNode => "unit__node__node",
            ClassTag::UserConstraint => "user_constraint",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CoreError> {
        Ok(match s {
            "model" => ClassTag::Model,
            "temporal_block" => ClassTag::TemporalBlock,
            "unit" => ClassTag::Unit,
            "node" => ClassTag::Node,
            "group" => ClassTag::Group,
            "unit__from_node" => ClassTag::UnitFromNode,
            "unit__to_node" => ClassTag::UnitToNode,
            "unit__node__node" => ClassTag::UnitNodeNode,
            "user_constraint" => ClassTag::UserConstraint,
            other => return Err(CoreError::Parse(format!("unknown entity class {other:?}"))),
        })
    }
}

impl fmt::Display for ClassTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a relationship ties a unit to the node graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RelKind {
    /// `unit__from_node`: the unit withdraws from the node.
    FromNode,
    /// `unit__to_node`: the unit injects into the node.
    ToNode,
    /// `unit__node__node`: couples an input node to an output node of the
    /// same unit (conversion ratios).
    InOut,
}

/// A unit-to-node(s) relationship. `node2` is present exactly for
/// [`RelKind::InOut`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Relationship {
    pub kind: RelKind,
    pub unit: String,
    pub node1: String,
    pub node2: Option<String>,
}

impl Relationship {
    pub fn class(&self) -> ClassTag {
        match self.kind {
            RelKind::FromNode => ClassTag::UnitFromNode,
            RelKind::ToNode => ClassTag::UnitToNode,
            RelKind::InOut => ClassTag::UnitNodeNode,
        }
    }

    /// The pipe-joined entity string used in dataset rows, e.g.
    /// `H2_syn|H2O_in|H2`.
    pub fn entity(&self) -> String {
        match &self.node2 {
            Some(n2) => format!("{}|{}|{}", self.unit, self.node1, n2),
            None => format!("{}|{}", self.unit, self.node1),
        }
    }

    /// Parses a relationship entity string for the given class.
    pub fn parse(class: ClassTag, entity: &str) -> Result<Self, CoreError> {
        let parts: Vec<&str> = entity.split('|').collect();
        let kind = match class {
            ClassTag::UnitFromNode => RelKind::FromNode,
            ClassTag::UnitToNode => RelKind::ToNode,
            ClassTag::UnitNodeNode => RelKind::InOut,
            other => {
                return Err(CoreError::Parse(format!(
                    "class {other} does not declare relationships"
                )))
            }
        };
        let expected = if kind == RelKind::InOut { 3 } else { 2 };
        if parts.len() != expected || parts.iter().any(|p| p.is_empty()) {
            return Err(CoreError::Parse(format!(
                "relationship entity {entity:?} must have {expected} pipe-separated names for class {}",
                class.as_str()
            )));
        }
        Ok(Relationship {
            kind,
            unit: parts[0].to_string(),
            node1: parts[1].to_string(),
            node2: parts.get(2).map(|s| s.to_string()),
        })
    }
}

/// Key of one parameter assignment within a layer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParamKey {
    pub class: ClassTag,
    pub entity: String,
    pub param: String,
}

impl ParamKey {
    pub fn new(class: ClassTag, entity: impl Into<String>, param: impl Into<String>) -> Self {
        ParamKey { class, entity: entity.into(), param: param.into() }
    }
}

/// One scenario layer: parameter assignments that together describe a
/// coherent slice of the model (base topology, an investment option, a price
/// level, ...).
pub type Layer = BTreeMap<ParamKey, ParameterValue>;

/// The full model description: entity declarations plus all scenario layers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntityGraph {
    pub models: BTreeSet<String>,
    pub temporal_blocks: BTreeSet<String>,
    pub units: BTreeSet<String>,
    pub nodes: BTreeSet<String>,
    /// Group name to member node names. A group is also declared as a node
    /// (it can carry a balance-sense row), but never balances itself —
    /// endpoints touching it expand to its members.
    pub groups: BTreeMap<String, BTreeSet<String>>,
    pub relationships: BTreeSet<Relationship>,
    /// User constraint name to the units its coefficient rows reference.
    pub user_constraints: BTreeMap<String, BTreeSet<String>>,
    pub layers: BTreeMap<String, Layer>,
}

impl EntityGraph {
    /// Registers the entity named by a dataset row, creating relationships,
    /// group memberships, and user-constraint memberships as side effects.
    pub fn declare(&mut self, class: ClassTag, entity: &str) -> Result<(), CoreError> {
        match class {
            ClassTag::Model => {
                self.models.insert(entity.to_string());
            }
            ClassTag::TemporalBlock => {
                self.temporal_blocks.insert(entity.to_string());
            }
            ClassTag::Unit => {
                self.units.insert(entity.to_string());
            }
            ClassTag::Node => {
                self.nodes.insert(entity.to_string());
            }
            ClassTag::Group => {
                let (group, member) = split_pair(entity).ok_or_else(|| {
                    CoreError::Parse(format!(
                        "group entity {entity:?} must be group|member"
                    ))
                })?;
                self.nodes.insert(group.to_string());
                self.groups
                    .entry(group.to_string())
                    .or_default()
                    .insert(member.to_string());
            }
            ClassTag::UnitFromNode | ClassTag::UnitToNode | ClassTag::UnitNodeNode => {
                let rel = Relationship::parse(class, entity)?;
                self.relationships.insert(rel);
            }
            ClassTag::UserConstraint => {
                match split_pair(entity) {
                    Some((name, unit)) => {
                        self.user_constraints
                            .entry(name.to_string())
                            .or_default()
                            .insert(unit.to_string());
                    }
                    None => {
                        self.user_constraints.entry(entity.to_string()).or_default();
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether `name` is a declared group.
    pub fn is_group(&self, name: &str) -> bool {
        self.groups.contains_key(name)
    }

    /// The plain nodes an endpoint stands for: a group expands to its
    /// members, anything else to itself.
    pub fn expand_endpoint<'a>(&'a self, name: &'a str) -> Vec<&'a str> {
        match self.groups.get(name) {
            Some(members) => members.iter().map(|s| s.as_str()).collect(),
            None => vec![name],
        }
    }

    /// All relationships of one unit, in deterministic order.
    pub fn unit_relationships<'a>(&'a self, unit: &str) -> Vec<&'a Relationship> {
        self.relationships.iter().filter(|r| r.unit == unit).collect()
    }
}

fn split_pair(entity: &str) -> Option<(&str, &str)> {
    let mut it = entity.split('|');
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => Some((a, b)),
        _ => None,
    }
}
