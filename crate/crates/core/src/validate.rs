//! Structural and value diagnostics for a loaded dataset.
//!
//! Validation is stack-independent: it checks declarations and every layer's
//! values, not one composed scenario. Errors mean the dataset cannot be
//! trusted (dangling references, out-of-range values); warnings flag likely
//! modeling mistakes (storages nobody can charge, revenue units no source
//! can supply); infos note harmless oddities such as isolated nodes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::graph::{ClassTag, EntityGraph, RelKind};
use crate::time::parse_duration;
use crate::value::ParameterValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub entity: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.severity, self.entity, self.message)
    }
}

/// Runs all checks and returns diagnostics sorted by severity, then entity.
pub fn validate_graph(graph: &EntityGraph) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    references(graph, &mut out);
    values(graph, &mut out);
    storage_paths(graph, &mut out);
    reachability(graph, &mut out);
    isolated_nodes(graph, &mut out);
    out.sort_by(|a, b| {
        (a.severity, &a.entity, &a.message).cmp(&(b.severity, &b.entity, &b.message))
    });
    out.dedup();
    out
}

fn push(out: &mut Vec<Diagnostic>, severity: Severity, entity: &str, message: String) {
    out.push(Diagnostic { severity, entity: entity.to_string(), message });
}

/// Every name a relationship, group, or user constraint mentions must be
/// declared somewhere in the dataset.
fn references(graph: &EntityGraph, out: &mut Vec<Diagnostic>) {
    for rel in &graph.relationships {
        if !graph.units.contains(&rel.unit) {
            push(
                out,
                Severity::Error,
                &rel.entity(),
                format!("references unit {} which no row declares", rel.unit),
            );
        }
        for node in std::iter::once(&rel.node1).chain(rel.node2.iter()) {
            if !graph.nodes.contains(node) {
                push(
                    out,
                    Severity::Error,
                    &rel.entity(),
                    format!("references node {node} which no row declares"),
                );
            }
        }
    }
    for (group, members) in &graph.groups {
        for member in members {
            if !graph.nodes.contains(member) {
                push(
                    out,
                    Severity::Error,
                    group,
                    format!("member {member} is not a declared node"),
                );
            } else if graph.is_group(member) {
                push(
                    out,
                    Severity::Error,
                    group,
                    format!("member {member} is itself a group; groups cannot nest"),
                );
            }
        }
        if members.is_empty() {
            push(out, Severity::Warning, group, "group has no members".into());
        }
    }
    for (name, members) in &graph.user_constraints {
        for member in members {
            if !graph.units.contains(member) {
                push(
                    out,
                    Severity::Error,
                    name,
                    format!("coefficient references unit {member} which no row declares"),
                );
            }
        }
    }
}

/// Range and format checks on parameter values, across all layers.
fn values(graph: &EntityGraph, out: &mut Vec<Diagnostic>) {
    for (layer_name, layer) in &graph.layers {
        for (key, value) in layer {
            let ctx = |msg: String| format!("{msg} (layer {layer_name})");
            let non_negative = ["number_of_units", "candidate_units", "candidate_storages",
                "number_of_storages", "node_state_cap", "unit_capacity"];
            if non_negative.contains(&key.param.as_str()) {
                match value.as_number() {
                    Some(v) if v >= 0.0 => {}
                    Some(v) => push(
                        out,
                        Severity::Error,
                        &key.entity,
                        ctx(format!("{} must be non-negative, got {v}", key.param)),
                    ),
                    None => {
                        if !matches!(value, ParameterValue::Series(_)) {
                            push(
                                out,
                                Severity::Error,
                                &key.entity,
                                ctx(format!("{} must be numeric", key.param)),
                            )
                        }
                    }
                }
            }
            match key.param.as_str() {
                "frac_state_loss" => match value.as_number() {
                    Some(v) if (0.0..1.0).contains(&v) => {}
                    _ => push(
                        out,
                        Severity::Error,
                        &key.entity,
                        ctx("frac_state_loss must lie in [0, 1)".into()),
                    ),
                },
                "minimum_operating_point" => match value.as_number() {
                    Some(v) if (0.0..=1.0).contains(&v) => {}
                    _ => push(
                        out,
                        Severity::Error,
                        &key.entity,
                        ctx("minimum_operating_point must lie in [0, 1]".into()),
                    ),
                },
                "nodal_balance_sense" | "constraint_sense" => {
                    if !matches!(value.as_text(), Some("==" | "<=" | ">=")) {
                        push(
                            out,
                            Severity::Error,
                            &key.entity,
                            ctx(format!("{} must be ==, <=, or >=", key.param)),
                        );
                    }
                }
                "unit_investment_variable_type"
                | "storage_investment_variable_type"
                | "online_variable_type" => {
                    if !matches!(value.as_text(), Some("continuous" | "integer")) {
                        push(
                            out,
                            Severity::Error,
                            &key.entity,
                            ctx(format!("{} must be continuous or integer", key.param)),
                        );
                    }
                }
                "min_down_time" => {
                    let ok = value.as_text().is_some_and(|t| parse_duration(t).is_ok());
                    if !ok {
                        push(
                            out,
                            Severity::Error,
                            &key.entity,
                            ctx("min_down_time must be a duration such as 2h".into()),
                        );
                    }
                }
                _ => {}
            }
        }
    }
}

/// Does any layer assign `param` on `(class, entity)`?
fn any_layer(graph: &EntityGraph, class: ClassTag, entity: &str, param: &str) -> Option<ParameterValue> {
    graph
        .layers
        .values()
        .filter_map(|l| l.get(&crate::graph::ParamKey::new(class, entity, param)))
        .next_back()
        .cloned()
}

fn has_state(graph: &EntityGraph, node: &str) -> bool {
    any_layer(graph, ClassTag::Node, node, "has_state")
        .and_then(|v| v.as_flag())
        .unwrap_or(false)
}

/// Storage nodes need a way in and a way out, and state parameters only make
/// sense on storage nodes.
fn storage_paths(graph: &EntityGraph, out: &mut Vec<Diagnostic>) {
    for node in &graph.nodes {
        let stateful = has_state(graph, node);
        if stateful {
            let charged = graph.relationships.iter().any(|r| match r.kind {
                RelKind::ToNode => &r.node1 == node,
                RelKind::InOut => r.node2.as_deref() == Some(node),
                RelKind::FromNode => false,
            });
            let discharged = graph
                .relationships
                .iter()
                .any(|r| matches!(r.kind, RelKind::FromNode | RelKind::InOut) && &r.node1 == node);
            if !charged {
                push(out, Severity::Warning, node, "storage node has no charging flow".into());
            }
            if !discharged {
                push(out, Severity::Warning, node, "storage node has no discharging flow".into());
            }
        } else {
            for param in ["fix_node_state", "cyclic_condition", "node_state_cap", "frac_state_loss"] {
                if any_layer(graph, ClassTag::Node, node, param).is_some() {
                    push(
                        out,
                        Severity::Warning,
                        node,
                        format!("{param} is set but no layer marks the node has_state"),
                    );
                }
            }
        }
    }
}

/// Flood-fill supply reachability. Sources are nodes some layer marks `<=`
/// and units with no input relationships (their output is forced or free). A
/// unit fires when every input endpoint is reachable; a group is reachable
/// when any member is. Units that earn revenue but can never be supplied are
/// flagged.
fn reachability(graph: &EntityGraph, out: &mut Vec<Diagnostic>) {
    let mut reachable_nodes: BTreeSet<&str> = graph
        .nodes
        .iter()
        .filter(|n| {
            any_layer(graph, ClassTag::Node, n, "nodal_balance_sense")
                .and_then(|v| v.as_text().map(|s| s == "<="))
                .unwrap_or(false)
        })
        .map(|s| s.as_str())
        .collect();

    // Input endpoints per unit (group names kept as-is; resolved on the fly).
    let mut inputs: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for unit in &graph.units {
        inputs.insert(unit.as_str(), BTreeSet::new());
    }
    for rel in &graph.relationships {
        match rel.kind {
            RelKind::FromNode => {
                inputs.entry(rel.unit.as_str()).or_default().insert(rel.node1.as_str());
            }
            RelKind::InOut => {
                // Orientation needs the ratio parameter; treat node1 as an
                // input unless only an out-out ratio is declared for it.
                let out_only = any_layer(graph, rel.class(), &rel.entity(), "fix_ratio_out_out")
                    .is_some()
                    && any_layer(graph, rel.class(), &rel.entity(), "fix_ratio_in_out").is_none();
                if !out_only {
                    inputs.entry(rel.unit.as_str()).or_default().insert(rel.node1.as_str());
                }
            }
            RelKind::ToNode => {}
        }
    }

    let node_reachable = |name: &str, reached: &BTreeSet<&str>| -> bool {
        match graph.groups.get(name) {
            Some(members) => members.iter().any(|m| reached.contains(m.as_str())),
            None => reached.contains(name),
        }
    };

    let mut fired: BTreeSet<&str> = BTreeSet::new();
    loop {
        let mut changed = false;
        for (unit, ins) in &inputs {
            if fired.contains(unit) {
                continue;
            }
            if ins.iter().all(|n| node_reachable(n, &reachable_nodes)) {
                fired.insert(unit);
                changed = true;
                for rel in graph.unit_relationships(unit) {
                    let target = match rel.kind {
                        RelKind::ToNode => Some(rel.node1.as_str()),
                        RelKind::InOut => rel.node2.as_deref(),
                        RelKind::FromNode => None,
                    };
                    if let Some(t) = target {
                        for member in graph.expand_endpoint(t) {
                            reachable_nodes.insert(member);
                        }
                        reachable_nodes.insert(t);
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    for rel in &graph.relationships {
        let earns = graph.layers.values().any(|l| {
            l.get(&crate::graph::ParamKey::new(rel.class(), rel.entity(), "fuel_cost"))
                .and_then(|v| v.as_number())
                .is_some_and(|c| c < 0.0)
        });
        if earns && !fired.contains(rel.unit.as_str()) {
            push(
                out,
                Severity::Warning,
                &rel.unit,
                "earns revenue but no chain of sources can supply it".into(),
            );
        }
    }
}

/// Declared nodes that no relationship touches; harmless, worth knowing.
fn isolated_nodes(graph: &EntityGraph, out: &mut Vec<Diagnostic>) {
    let mut touched: BTreeSet<&str> = BTreeSet::new();
    for rel in &graph.relationships {
        for node in std::iter::once(&rel.node1).chain(rel.node2.iter()) {
            for member in graph.expand_endpoint(node) {
                touched.insert(member);
            }
            touched.insert(node.as_str());
        }
    }
    for (group, members) in &graph.groups {
        touched.insert(group.as_str());
        if graph.relationships.iter().any(|r| {
            std::iter::once(&r.node1).chain(r.node2.iter()).any(|n| n == group)
        }) {
            for m in members {
                touched.insert(m.as_str());
            }
        }
    }
    for node in &graph.nodes {
        if !touched.contains(node.as_str()) {
            push(out, Severity::Info, node, "no relationship touches this node".into());
        }
    }
}
