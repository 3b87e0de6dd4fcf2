//! Scenario stacks and the effective parameter view.
//!
//! A scenario is an ordered stack of layer names. Composing a stack walks it
//! bottom to top and keeps the last assignment of every parameter key — later
//! layers override earlier ones, so a small layer like a price premium can
//! ride on top of the full base description. A stack may additionally carry a
//! cost-side scaling applied to the fuel-synthesis units after stacking,
//! which is how the optimistic-investment variants are expressed.

use std::collections::BTreeMap;

use crate::graph::{ClassTag, EntityGraph, ParamKey, Relationship};
use crate::value::ParameterValue;
use crate::CoreError;

/// Unit-name prefixes whose investment-side costs a [`ScenarioStack::capex_factor`]
/// scales: the fuel synthesizers and the air separation plant.
const CAPEX_SCALE_PREFIXES: [&str; 3] = ["MeOH_syn", "NH3_syn", "ASU"];
const CAPEX_SCALE_PARAMS: [&str; 2] = ["unit_investment_cost", "fom_cost"];

/// An ordered selection of layers, lowest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioStack {
    pub name: String,
    pub description: String,
    pub layers: Vec<String>,
    /// When set, multiplies investment and fixed-O&M costs of the
    /// fuel-synthesis units after stacking (optimistic-cost variants).
    pub capex_factor: Option<f64>,
}

impl ScenarioStack {
    pub fn new(name: &str, description: &str, layers: &[&str]) -> Self {
        ScenarioStack {
            name: name.to_string(),
            description: description.to_string(),
            layers: layers.iter().map(|s| s.to_string()).collect(),
            capex_factor: None,
        }
    }
}

/// The resolved parameter assignment for one stack: every key maps to the
/// value from the topmost layer that sets it, tagged with that layer's name.
#[derive(Debug, Clone)]
pub struct EffectiveView<'g> {
    pub graph: &'g EntityGraph,
    pub stack: ScenarioStack,
    resolved: BTreeMap<ParamKey, (ParameterValue, String)>,
}

/// Stacks the named layers over `graph`. Every layer must exist in the
/// dataset; order in `stack.layers` is the override order.
pub fn compose<'g>(graph: &'g EntityGraph, stack: &ScenarioStack) -> Result<EffectiveView<'g>, CoreError> {
    let mut resolved: BTreeMap<ParamKey, (ParameterValue, String)> = BTreeMap::new();
    for layer_name in &stack.layers {
        let layer = graph.layers.get(layer_name).ok_or_else(|| {
            CoreError::Scenario(format!(
                "scenario {} references layer {layer_name:?} which the dataset does not define (known: {})",
                stack.name,
                graph.layers.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })?;
        for (key, value) in layer {
            resolved.insert(key.clone(), (value.clone(), layer_name.clone()));
        }
    }
    if let Some(factor) = stack.capex_factor {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(CoreError::Scenario(format!(
                "capex factor must be positive and finite, got {factor}"
            )));
        }
        for (key, slot) in resolved.iter_mut() {
            let applies = key.class == ClassTag::Unit
                && CAPEX_SCALE_PREFIXES.iter().any(|p| key.entity.starts_with(p))
                && CAPEX_SCALE_PARAMS.contains(&key.param.as_str());
            if applies {
                if let ParameterValue::Number(v) = slot.0 {
                    slot.0 = ParameterValue::Number(v * factor);
                    slot.1 = format!("{}*capex_factor", slot.1);
                }
            }
        }
    }
    Ok(EffectiveView { graph, stack: stack.clone(), resolved })
}

impl<'g> EffectiveView<'g> {
    pub fn get(&self, class: ClassTag, entity: &str, param: &str) -> Option<&ParameterValue> {
        self.resolved
            .get(&ParamKey::new(class, entity, param))
            .map(|(v, _)| v)
    }

    /// The layer whose assignment won for this key, if any layer set it.
    pub fn origin(&self, class: ClassTag, entity: &str, param: &str) -> Option<&str> {
        self.resolved
            .get(&ParamKey::new(class, entity, param))
            .map(|(_, l)| l.as_str())
    }

    pub fn unit(&self, unit: &str, param: &str) -> Option<&ParameterValue> {
        self.get(ClassTag::Unit, unit, param)
    }

    pub fn node(&self, node: &str, param: &str) -> Option<&ParameterValue> {
        self.get(ClassTag::Node, node, param)
    }

    pub fn rel(&self, rel: &Relationship, param: &str) -> Option<&ParameterValue> {
        self.get(rel.class(), &rel.entity(), param)
    }

    pub fn block(&self, block: &str, param: &str) -> Option<&ParameterValue> {
        self.get(ClassTag::TemporalBlock, block, param)
    }

    /// A model-level parameter; datasets carry a single model entity, but if
    /// several exist the lexicographically last assignment wins.
    pub fn model(&self, param: &str) -> Option<&ParameterValue> {
        self.graph
            .models
            .iter()
            .rev()
            .find_map(|m| self.get(ClassTag::Model, m, param))
    }

    /// Iterates all resolved keys (for inspection output).
    pub fn entries(&self) -> impl Iterator<Item = (&ParamKey, &ParameterValue, &str)> {
        self.resolved.iter().map(|(k, (v, l))| (k, v, l.as_str()))
    }
}

/// The scenario catalog bundled with the model: twelve investment studies on
/// the premium ladder, two relaxed variants, and two optimistic-cost runs.
pub fn builtin_scenarios() -> Vec<ScenarioStack> {
    const COMMON_TAIL: [&str; 4] = ["Inv-storage-compress", "Mod-UC", "Solver-Gurobi", "Year"];
    let build = |name: &str, desc: &str, mids: &[&str], premium: Option<&str>| {
        let mut layers: Vec<&str> =
            vec!["Base", "Inv", "Tech-H2-units", "Inv-H2-on", "Inv-H2-int"];
        layers.extend_from_slice(mids);
        layers.extend_from_slice(&COMMON_TAIL[..2]);
        if let Some(p) = premium {
            layers.push(p);
        }
        layers.extend_from_slice(&COMMON_TAIL[2..]);
        ScenarioStack::new(name, desc, &layers)
    };

    let meoh: [&str; 3] = ["Inv-MeOH-on", "Inv-MeOH-bin", "Inv-PPA"];
    let nh3: [&str; 3] = ["Inv-NH3-on", "Inv-NH3-bin", "Inv-PPA"];
    let mut out = vec![
        build("S0", "Hydrogen from local RES, base prices", &[], None),
        build("S1", "Hydrogen from local RES, 1.5x prices", &[], Some("Premium-1.5x")),
        build("S2", "Hydrogen from local RES, 2x prices", &[], Some("Premium-2x")),
        build("S3", "Hydrogen with PPA build-out, base prices", &["Inv-PPA"], None),
        build("S4", "Hydrogen with PPA build-out, 1.5x prices", &["Inv-PPA"], Some("Premium-1.5x")),
        build("S5", "Hydrogen with PPA build-out, 2x prices", &["Inv-PPA"], Some("Premium-2x")),
        build("S6", "Methanol option with PPA, base prices", &meoh, None),
        build("S7", "Methanol option with PPA, 1.5x prices", &meoh, Some("Premium-1.5x")),
        build("S8", "Methanol option with PPA, 2x prices", &meoh, Some("Premium-2x")),
        build("S9", "Ammonia option with PPA, base prices", &nh3, None),
        build("S10", "Ammonia option with PPA, 1.5x prices", &nh3, Some("Premium-1.5x")),
        build("S11", "Ammonia option with PPA, 2x prices", &nh3, Some("Premium-2x")),
    ];

    let relaxed_layers: [&str; 14] = [
        "Base",
        "Inv",
        "Tech-H2-units",
        "Inv-H2-on",
        "Inv-H2-cont",
        "Inv-MeOH-on",
        "Inv-MeOH-cont",
        "Inv-NH3-on",
        "Inv-NH3-cont",
        "Inv-PPA",
        "Inv-storage-compress",
        "Mod-UC",
        "Solver-Gurobi",
        "Year",
    ];
    out.push(ScenarioStack::new(
        "a",
        "All fuels, continuous investment, with commitment",
        &relaxed_layers,
    ));
    let no_uc: Vec<&str> = relaxed_layers.iter().copied().filter(|&l| l != "Mod-UC").collect();
    out.push(ScenarioStack::new(
        "b",
        "All fuels, continuous investment, no commitment",
        &no_uc,
    ));

    for (base, name, desc) in [
        ("S6", "S6-opt", "Methanol option with optimistic synthesis costs"),
        ("S9", "S9-opt", "Ammonia option with optimistic synthesis costs"),
    ] {
        let mut s = out.iter().find(|s| s.name == base).expect("base scenario exists").clone();
        s.name = name.to_string();
        s.description = desc.to_string();
        s.capex_factor = Some(0.5);
        out.push(s);
    }
    out
}

/// Looks a builtin stack up by name.
pub fn builtin_stack(name: &str) -> Option<ScenarioStack> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Layer;

    fn graph_with_layers(layers: &[(&str, &[(&str, f64)])]) -> EntityGraph {
        let mut g = EntityGraph::default();
        for (name, entries) in layers {
            let mut layer = Layer::new();
            for (unit, v) in *entries {
                g.declare(ClassTag::Unit, unit).unwrap();
                layer.insert(
                    ParamKey::new(ClassTag::Unit, *unit, "number_of_units"),
                    ParameterValue::Number(*v),
                );
            }
            g.layers.insert(name.to_string(), layer);
        }
        g
    }

    #[test]
    fn later_layers_override_earlier_ones() {
        let g = graph_with_layers(&[
            ("Base", &[("A", 1.0), ("B", 5.0)]),
            ("Upgrade", &[("A", 3.0)]),
        ]);
        let fwd = compose(&g, &ScenarioStack::new("s", "", &["Base", "Upgrade"])).unwrap();
        assert_eq!(fwd.unit("A", "number_of_units").unwrap().as_number(), Some(3.0));
        assert_eq!(fwd.unit("B", "number_of_units").unwrap().as_number(), Some(5.0));
        assert_eq!(fwd.origin(ClassTag::Unit, "A", "number_of_units"), Some("Upgrade"));

        let rev = compose(&g, &ScenarioStack::new("s", "", &["Upgrade", "Base"])).unwrap();
        assert_eq!(rev.unit("A", "number_of_units").unwrap().as_number(), Some(1.0));
    }

    #[test]
    fn unknown_layers_are_reported() {
        let g = graph_with_layers(&[("Base", &[("A", 1.0)])]);
        let err = compose(&g, &ScenarioStack::new("s", "", &["Base", "Nope"])).unwrap_err();
        assert!(err.to_string().contains("\"Nope\""));
        assert!(err.to_string().contains("Base"));
    }

    #[test]
    fn capex_factor_scales_only_synthesis_costs() {
        let mut g = EntityGraph::default();
        g.declare(ClassTag::Unit, "MeOH_syn_02").unwrap();
        g.declare(ClassTag::Unit, "H2_syn").unwrap();
        let mut layer = Layer::new();
        for (unit, param, v) in [
            ("MeOH_syn_02", "unit_investment_cost", 100.0),
            ("MeOH_syn_02", "fom_cost", 40.0),
            ("MeOH_syn_02", "number_of_units", 0.0),
            ("H2_syn", "unit_investment_cost", 80.0),
        ] {
            layer.insert(ParamKey::new(ClassTag::Unit, unit, param), ParameterValue::Number(v));
        }
        g.layers.insert("Base".into(), layer);

        let mut stack = ScenarioStack::new("opt", "", &["Base"]);
        stack.capex_factor = Some(0.5);
        let v = compose(&g, &stack).unwrap();
        assert_eq!(v.unit("MeOH_syn_02", "unit_investment_cost").unwrap().as_number(), Some(50.0));
        assert_eq!(v.unit("MeOH_syn_02", "fom_cost").unwrap().as_number(), Some(20.0));
        assert_eq!(v.unit("MeOH_syn_02", "number_of_units").unwrap().as_number(), Some(0.0));
        assert_eq!(v.unit("H2_syn", "unit_investment_cost").unwrap().as_number(), Some(80.0));
        assert!(v
            .origin(ClassTag::Unit, "MeOH_syn_02", "fom_cost")
            .unwrap()
            .contains("capex_factor"));
    }

    #[test]
    fn builtin_catalog_shape() {
        let all = builtin_scenarios();
        let names: Vec<&str> = all.iter().map(|s| s.name.as_str()).collect();
        for want in ["S0", "S5", "S11", "a", "b", "S6-opt", "S9-opt"] {
            assert!(names.contains(&want), "missing {want}");
        }
        let s6 = builtin_stack("S6").unwrap();
        assert!(s6.layers.contains(&"Inv-MeOH-bin".to_string()));
        assert!(s6.layers.contains(&"Inv-PPA".to_string()));
        assert!(!s6.layers.contains(&"Inv-NH3-on".to_string()));
        let s0 = builtin_stack("S0").unwrap();
        assert!(!s0.layers.contains(&"Inv-PPA".to_string()));
        let b = builtin_stack("b").unwrap();
        assert!(!b.layers.contains(&"Mod-UC".to_string()));
        assert!(builtin_stack("a").unwrap().layers.contains(&"Mod-UC".to_string()));
        let s9o = builtin_stack("S9-opt").unwrap();
        assert_eq!(s9o.capex_factor, Some(0.5));
        assert!(s9o.layers.contains(&"Inv-NH3-bin".to_string()));
        // Premium layers sit below the solver/year tail, above everything else.
        let s7 = builtin_stack("S7").unwrap();
        let pos = |l: &str| s7.layers.iter().position(|x| x == l).unwrap();
        assert!(pos("Premium-1.5x") > pos("Mod-UC"));
        assert!(pos("Premium-1.5x") < pos("Year"));
    }

    /// Stacking is associative: folding the first two layers into one merged
    /// layer and stacking the rest on top resolves identically.
    #[test]
    fn stacking_is_associative() {
        use proptest::prelude::*;
        let layer_strategy = proptest::collection::btree_map(0u8..6, -100i32..100, 0..6);
        proptest!(|(a in layer_strategy.clone(), b in layer_strategy.clone(), c in layer_strategy)| {
            let to_layer = |m: &std::collections::BTreeMap<u8, i32>| -> Layer {
                m.iter()
                    .map(|(k, v)| {
                        (
                            ParamKey::new(ClassTag::Unit, format!("U{k}"), "p"),
                            ParameterValue::Number(f64::from(*v)),
                        )
                    })
                    .collect()
            };
            let mut g = EntityGraph::default();
            for m in [&a, &b, &c] {
                for k in m.keys() {
                    g.declare(ClassTag::Unit, &format!("U{k}")).unwrap();
                }
            }
            g.layers.insert("A".into(), to_layer(&a));
            g.layers.insert("B".into(), to_layer(&b));
            g.layers.insert("C".into(), to_layer(&c));
            let mut ab = to_layer(&a);
            ab.extend(to_layer(&b));
            g.layers.insert("AB".into(), ab);

            let three = compose(&g, &ScenarioStack::new("s", "", &["A", "B", "C"])).unwrap();
            let two = compose(&g, &ScenarioStack::new("s", "", &["AB", "C"])).unwrap();
            let flat = |v: &EffectiveView| -> Vec<(ParamKey, Option<f64>)> {
                v.entries().map(|(k, val, _)| (k.clone(), val.as_number())).collect()
            };
            prop_assert_eq!(flat(&three), flat(&two));
        });
    }
}
