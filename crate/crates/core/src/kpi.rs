//! Solution reporting: investment summary, full-load hours, commodity
//! volumes, cost breakdown, and the CSV outputs.
//!
//! Extensive quantities (volumes, costs, profit, start counts, full-load
//! hours) can be annualized — scaled by the year-to-horizon ratio — which
//! undoes the proration of fixed costs and extrapolates operations; stock
//! quantities such as invested units are never scaled.

use std::path::Path;

use hubopt_solver::Solution;

use crate::compile::{CompiledInstance, FlowDir, PRORATION_BASE_HOURS};
use crate::graph::RelKind;
use crate::scenario::EffectiveView;
use crate::time::format_timestamp;
use crate::CoreError;

#[derive(Debug, Clone, PartialEq)]
pub struct UnitKpi {
    pub unit: String,
    /// Units invested (solution value of the invested-available variable).
    pub invested: f64,
    /// Existing units from the dataset.
    pub existing: f64,
    /// Per-unit rating of the primary output relationship.
    pub rating: f64,
    /// (existing + invested) × rating.
    pub capacity: f64,
    /// Primary output summed over the horizon.
    pub production: f64,
    /// production ÷ capacity; zero when nothing is installed.
    pub full_load_hours: f64,
    pub starts: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeKpi {
    pub node: String,
    /// Inflow total: production for product nodes, sales volume for sinks.
    pub inflow: f64,
    /// Revenue earned by flows into this node (negative fuel costs).
    pub revenue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageKpi {
    pub node: String,
    pub invested: f64,
    pub capacity: f64,
    pub peak_state: f64,
    pub final_state: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpiReport {
    pub scenario: String,
    pub mode: String,
    pub horizon_hours: usize,
    pub annualized: bool,
    pub objective: f64,
    /// Negated objective: revenues minus all costs.
    pub profit: f64,
    pub operating_cost: f64,
    pub revenue: f64,
    pub invest_cost: f64,
    pub fom_cost: f64,
    pub units: Vec<UnitKpi>,
    pub nodes: Vec<NodeKpi>,
    pub storages: Vec<StorageKpi>,
}

/// Derives the report from a solved instance.
pub fn compute(
    view: &EffectiveView,
    inst: &CompiledInstance,
    solution: &Solution,
    annualize: bool,
) -> KpiReport {
    let value = |id: hubopt_solver::VarId| solution.values[id.index()];
    let scale = if annualize { PRORATION_BASE_HOURS / inst.horizon.hours as f64 } else { 1.0 };

    let mut operating_cost = 0.0;
    let mut revenue = 0.0;
    for &(var, cost) in &inst.operating_terms {
        let contribution = cost * value(var);
        if contribution >= 0.0 {
            operating_cost += contribution;
        } else {
            revenue -= contribution;
        }
    }
    let invest_cost: f64 = inst.invest_terms.iter().map(|&(v, c)| c * value(v)).sum();
    let fom_cost: f64 =
        inst.fom_terms.iter().map(|&(v, c)| c * value(v)).sum::<f64>() + inst.fom_offset;

    let mut units = Vec::new();
    for unit in active_units(view, inst) {
        let invested = inst.unit_invest.get(&unit).map_or(0.0, |iv| value(iv.available));
        let existing = view
            .unit(&unit, "number_of_units")
            .and_then(|v| v.as_number())
            .unwrap_or(0.0);
        let primary = primary_output(view, &unit);
        let (rating, production) = match primary {
            None => (0.0, 0.0),
            Some((endpoint, rating)) => {
                let members = view.graph.expand_endpoint(&endpoint);
                let total: f64 = members
                    .iter()
                    .filter_map(|m| {
                        inst.flows.get(&(unit.clone(), m.to_string(), FlowDir::To))
                    })
                    .flat_map(|vars| vars.iter().map(|&v| value(v)))
                    .sum();
                (rating, total)
            }
        };
        let capacity = (existing + invested) * rating;
        let production = production * scale;
        let full_load_hours = if capacity > 0.0 { production / capacity } else { 0.0 };
        let starts = inst
            .units_started
            .get(&unit)
            .map_or(0.0, |vars| vars.iter().map(|&v| value(v)).sum::<f64>())
            * scale;
        units.push(UnitKpi {
            unit,
            invested,
            existing,
            rating,
            capacity,
            production,
            full_load_hours,
            starts,
        });
    }

    // Inflows and revenues per node. Revenue terms attach to flow variables;
    // a reverse variable-to-endpoint index attributes each to the node its
    // flow injects into.
    let mut inflows: std::collections::BTreeMap<&str, f64> = std::collections::BTreeMap::new();
    let mut revenues: std::collections::BTreeMap<&str, f64> = std::collections::BTreeMap::new();
    let mut to_node_of: std::collections::BTreeMap<usize, &str> = std::collections::BTreeMap::new();
    for ((_, n, dir), vars) in &inst.flows {
        if *dir == FlowDir::To {
            let total: f64 = vars.iter().map(|&v| value(v)).sum();
            *inflows.entry(n.as_str()).or_default() += total;
            for &v in vars {
                to_node_of.insert(v.index(), n.as_str());
            }
        }
    }
    for &(var, cost) in &inst.operating_terms {
        if cost < 0.0 {
            if let Some(&n) = to_node_of.get(&var.index()) {
                *revenues.entry(n).or_default() -= cost * value(var);
            }
        }
    }
    let mut nodes = Vec::new();
    for node in view.graph.nodes.iter().filter(|n| !view.graph.is_group(n)) {
        let inflow = inflows.get(node.as_str()).copied().unwrap_or(0.0);
        let node_revenue = revenues.get(node.as_str()).copied().unwrap_or(0.0);
        if inflow != 0.0 || node_revenue != 0.0 {
            nodes.push(NodeKpi {
                node: node.clone(),
                inflow: inflow * scale,
                revenue: node_revenue * scale,
            });
        }
    }

    let mut storages = Vec::new();
    for (node, state) in &inst.node_state {
        let invested = inst.storage_invest.get(node).map_or(0.0, |iv| value(iv.available));
        let existing = view
            .node(node, "number_of_storages")
            .and_then(|v| v.as_number())
            .unwrap_or(0.0);
        let cap = view
            .node(node, "node_state_cap")
            .and_then(|v| v.as_number())
            .unwrap_or(0.0);
        let peak = state.iter().map(|&v| value(v)).fold(0.0_f64, f64::max);
        let last = state.last().map_or(0.0, |&v| value(v));
        storages.push(StorageKpi {
            node: node.clone(),
            invested,
            capacity: (existing + invested) * cap,
            peak_state: peak,
            final_state: last,
        });
    }

    let objective = solution.objective;
    KpiReport {
        scenario: inst.scenario.clone(),
        mode: inst.mode.as_str().to_string(),
        horizon_hours: inst.horizon.hours,
        annualized: annualize,
        objective: objective * scale,
        profit: -objective * scale,
        operating_cost: operating_cost * scale,
        revenue: revenue * scale,
        invest_cost: invest_cost * scale,
        fom_cost: fom_cost * scale,
        units,
        nodes,
        storages,
    }
}

fn active_units(view: &EffectiveView, inst: &CompiledInstance) -> Vec<String> {
    let mut units: Vec<String> = inst
        .flows
        .keys()
        .map(|(u, _, _)| u.clone())
        .collect();
    units.extend(inst.unit_invest.keys().cloned());
    units.extend(inst.units_on.keys().cloned());
    units.sort();
    units.dedup();
    let _ = view;
    units
}

/// The unit's rated output: its first capacitated to-relationship (by entity
/// order) with the capacity sampled at the horizon start.
fn primary_output(view: &EffectiveView, unit: &str) -> Option<(String, f64)> {
    for rel in view.graph.unit_relationships(unit) {
        if rel.kind != RelKind::ToNode {
            continue;
        }
        if let Some(cap) = view.rel(rel, "unit_capacity") {
            let rating = match cap {
                crate::value::ParameterValue::Series(s) => {
                    s.points().first().map(|&(_, v)| v).unwrap_or(0.0)
                }
                other => other.as_number().unwrap_or(0.0),
            };
            return Some((rel.node1.clone(), rating));
        }
    }
    None
}

fn fmt(v: f64) -> String {
    // Shortest round-trip float formatting keeps the CSVs byte-deterministic.
    format!("{v}")
}

/// Writes the four report files into `dir` (created if missing):
/// `investments.csv`, `kpis.csv`, `flows_hourly.csv`, `storage_state.csv`.
pub fn write_outputs(
    dir: &Path,
    inst: &CompiledInstance,
    solution: &Solution,
    report: &KpiReport,
) -> Result<(), CoreError> {
    std::fs::create_dir_all(dir)?;
    let value = |id: hubopt_solver::VarId| solution.values[id.index()];

    let mut inv = String::from("entity,variable,value\n");
    for (unit, iv) in &inst.unit_invest {
        inv.push_str(&format!("{unit},units_invested,{}\n", fmt(value(iv.invested))));
        inv.push_str(&format!("{unit},units_invested_available,{}\n", fmt(value(iv.available))));
        inv.push_str(&format!("{unit},units_mothballed,{}\n", fmt(value(iv.mothballed))));
    }
    for (node, iv) in &inst.storage_invest {
        inv.push_str(&format!("{node},storages_invested,{}\n", fmt(value(iv.invested))));
        inv.push_str(&format!("{node},storages_invested_available,{}\n", fmt(value(iv.available))));
        inv.push_str(&format!("{node},storages_mothballed,{}\n", fmt(value(iv.mothballed))));
    }
    std::fs::write(dir.join("investments.csv"), inv)?;

    let mut kpis = String::from("section,entity,metric,value\n");
    let mut summary = |metric: &str, v: String| {
        kpis.push_str(&format!("summary,{},{metric},{v}\n", report.scenario));
    };
    summary("mode", report.mode.clone());
    summary("horizon_hours", report.horizon_hours.to_string());
    summary("annualized", report.annualized.to_string());
    summary("objective", fmt(report.objective));
    summary("profit", fmt(report.profit));
    summary("operating_cost", fmt(report.operating_cost));
    summary("revenue", fmt(report.revenue));
    summary("invest_cost", fmt(report.invest_cost));
    summary("fom_cost", fmt(report.fom_cost));
    for u in &report.units {
        for (metric, v) in [
            ("invested", u.invested),
            ("existing", u.existing),
            ("rating", u.rating),
            ("capacity", u.capacity),
            ("production", u.production),
            ("full_load_hours", u.full_load_hours),
            ("starts", u.starts),
        ] {
            kpis.push_str(&format!("unit,{},{metric},{}\n", u.unit, fmt(v)));
        }
    }
    for n in &report.nodes {
        kpis.push_str(&format!("node,{},inflow,{}\n", n.node, fmt(n.inflow)));
        kpis.push_str(&format!("node,{},revenue,{}\n", n.node, fmt(n.revenue)));
    }
    for s in &report.storages {
        for (metric, v) in [
            ("invested", s.invested),
            ("capacity", s.capacity),
            ("peak_state", s.peak_state),
            ("final_state", s.final_state),
        ] {
            kpis.push_str(&format!("storage,{},{metric},{}\n", s.node, fmt(v)));
        }
    }
    std::fs::write(dir.join("kpis.csv"), kpis)?;

    let mut flows = String::from("unit,node,direction,hour,time,value\n");
    for ((unit, node, dir), vars) in &inst.flows {
        let dir = match dir {
            FlowDir::From => "from",
            FlowDir::To => "to",
        };
        for (h, t) in inst.horizon.iter() {
            flows.push_str(&format!(
                "{unit},{node},{dir},{h},{},{}\n",
                format_timestamp(t),
                fmt(value(vars[h]))
            ));
        }
    }
    std::fs::write(dir.join("flows_hourly.csv"), flows)?;

    let mut states = String::from("node,hour,time,value\n");
    for (node, vars) in &inst.node_state {
        for (h, t) in inst.horizon.iter() {
            states.push_str(&format!(
                "{node},{h},{},{}\n",
                format_timestamp(t),
                fmt(value(vars[h]))
            ));
        }
    }
    std::fs::write(dir.join("storage_state.csv"), states)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::{compile, CompileOptions};
    use crate::graph::{ClassTag, EntityGraph, ParamKey};
    use crate::scenario::{compose, ScenarioStack};
    use crate::value::ParameterValue;
    use hubopt_solver::{solve_milp, SolverConfig};

    fn demo_graph() -> EntityGraph {
        let mut g = EntityGraph::default();
        let mut layer = crate::graph::Layer::new();
        g.declare(ClassTag::Model, "hub").unwrap();
        layer.insert(
            ParamKey::new(ClassTag::Model, "hub", "model_start"),
            ParameterValue::Text("2019-01-01T00:00:00".into()),
        );
        layer.insert(
            ParamKey::new(ClassTag::Model, "hub", "model_end"),
            ParameterValue::Text("2019-01-01T04:00:00".into()),
        );
        for (class, entity, param, value) in [
            (ClassTag::Unit, "gen", "is_active", ParameterValue::Flag(true)),
            (ClassTag::Unit, "gen", "candidate_units", ParameterValue::Number(2.0)),
            (
                ClassTag::Unit,
                "gen",
                "unit_investment_cost",
                ParameterValue::Number(8736.0),
            ),
            (ClassTag::Unit, "gen", "fom_cost", ParameterValue::Number(2184.0)),
            (
                ClassTag::Unit,
                "gen",
                "unit_investment_variable_type",
                ParameterValue::Text("integer".into()),
            ),
            (ClassTag::Node, "out", "nodal_balance_sense", ParameterValue::Text(">=".into())),
            (ClassTag::UnitToNode, "gen|out", "unit_capacity", ParameterValue::Number(3.0)),
            (ClassTag::UnitToNode, "gen|out", "fuel_cost", ParameterValue::Number(-10.0)),
        ] {
            g.declare(class, entity).unwrap();
            layer.insert(ParamKey::new(class, entity, param), value);
        }
        g.layers.insert("Base".into(), layer);
        g
    }

    #[test]
    fn report_reconstructs_the_objective_and_flh() {
        let g = demo_graph();
        let view = compose(&g, &ScenarioStack::new("t", "", &["Base"])).unwrap();
        let inst = compile(&view, &CompileOptions::default()).unwrap();
        let sol = solve_milp(&inst.problem, &SolverConfig::default()).unwrap();
        let report = compute(&view, &inst, &sol, false);

        // Optimum invests both units, running flat out: revenue 2×3×4×10.
        assert!((report.revenue - 240.0).abs() < 1e-6);
        assert!((report.profit + report.objective).abs() < 1e-12);
        let recomposed =
            report.operating_cost - report.revenue + report.invest_cost + report.fom_cost;
        assert!(
            (recomposed - report.objective).abs() < 1e-6,
            "breakdown {recomposed} vs objective {}",
            report.objective
        );

        let gen = report.units.iter().find(|u| u.unit == "gen").unwrap();
        assert!((gen.invested - 2.0).abs() < 1e-9);
        assert!((gen.capacity - 6.0).abs() < 1e-9);
        assert!((gen.production - 24.0).abs() < 1e-9);
        assert!((gen.full_load_hours - 4.0).abs() < 1e-9);
        assert!(gen.full_load_hours <= inst.horizon.hours as f64 + 1e-9);

        let out = report.nodes.iter().find(|n| n.node == "out").unwrap();
        assert!((out.inflow - 24.0).abs() < 1e-9);
        assert!((out.revenue - 240.0).abs() < 1e-9);
    }

    #[test]
    fn annualize_scales_flows_but_not_stocks() {
        let g = demo_graph();
        let view = compose(&g, &ScenarioStack::new("t", "", &["Base"])).unwrap();
        let inst = compile(&view, &CompileOptions::default()).unwrap();
        let sol = solve_milp(&inst.problem, &SolverConfig::default()).unwrap();
        let plain = compute(&view, &inst, &sol, false);
        let yearly = compute(&view, &inst, &sol, true);
        let factor = 8736.0 / 4.0;
        assert!((yearly.profit - plain.profit * factor).abs() < 1e-6);
        assert!((yearly.invest_cost - plain.invest_cost * factor).abs() < 1e-6);
        let (gp, gy) = (
            plain.units.iter().find(|u| u.unit == "gen").unwrap(),
            yearly.units.iter().find(|u| u.unit == "gen").unwrap(),
        );
        assert!((gy.production - gp.production * factor).abs() < 1e-6);
        assert!((gy.full_load_hours - 8736.0).abs() < 1e-6);
        assert_eq!(gy.invested, gp.invested);
        // Annualized invest cost matches the unprorated dataset cost.
        assert!((yearly.invest_cost - 2.0 * 8736.0).abs() < 1e-6);
    }

    #[test]
    fn outputs_are_written_and_byte_deterministic() {
        let g = demo_graph();
        let view = compose(&g, &ScenarioStack::new("t", "", &["Base"])).unwrap();
        let inst = compile(&view, &CompileOptions::default()).unwrap();
        let sol = solve_milp(&inst.problem, &SolverConfig::default()).unwrap();
        let report = compute(&view, &inst, &sol, false);

        let dir = tempfile::tempdir().unwrap();
        write_outputs(dir.path(), &inst, &sol, &report).unwrap();
        let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
        let first: Vec<Vec<u8>> = ["investments.csv", "kpis.csv", "flows_hourly.csv", "storage_state.csv"]
            .iter()
            .map(|f| read(f))
            .collect();
        assert!(String::from_utf8(first[0].clone()).unwrap().contains("gen,units_invested,2"));
        assert!(String::from_utf8(first[1].clone()).unwrap().contains("summary,t,profit,"));
        assert!(String::from_utf8(first[2].clone())
            .unwrap()
            .lines()
            .any(|l| l.starts_with("gen,out,to,0,2019-01-01T00:00:00,")));

        write_outputs(dir.path(), &inst, &sol, &report).unwrap();
        for (i, f) in ["investments.csv", "kpis.csv", "flows_hourly.csv", "storage_state.csv"]
            .iter()
            .enumerate()
        {
            assert_eq!(first[i], read(f), "{f} changed between runs");
        }
    }
}
