//! Compilation of an effective parameter view into a mixed-integer program.
//!
//! The investment side follows a three-step chain per unit: invested
//! availability is capped by the candidate pool, linked to the invest and
//! mothball decisions, and finally expands the commitment headroom —
//! `units_available` is bounded by the availability factor times existing
//! plus invested units, `units_on` by `units_available`, and every capacity
//! constraint by `units_on` times the per-unit rating. Storage nodes carry an
//! hourly state with carry-over losses and the analogous storage-investment
//! chain. Unit commitment (start/stop variables and minimum down time) is
//! emitted only in MILP mode for units whose online variable is integer.
//!
//! All variables and constraints have deterministic dotted names
//! (`unit_flow.H2_syn.H2.h0017`); compiling the same view twice yields
//! byte-identical programs.

use std::collections::BTreeMap;

use chrono::Duration;

use hubopt_solver::{Problem, Sense, VarId, VarKind};

use crate::graph::{ClassTag, RelKind};
use crate::scenario::EffectiveView;
use crate::time::{format_timestamp, parse_duration, parse_timestamp, Horizon};
use crate::value::ParameterValue;
use crate::CoreError;

/// Hours in the full modeling year; investment and fixed-O&M costs are
/// prorated by `horizon_hours / PRORATION_BASE_HOURS` so short horizons see
/// proportionally small fixed costs.
pub const PRORATION_BASE_HOURS: f64 = 8736.0;

/// Program flavor: `Milp` keeps integer domains and unit commitment, `Lp`
/// relaxes every variable to continuous and drops the start/stop machinery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Lp,
    Milp,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Lp => "lp",
            Mode::Milp => "milp",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CoreError> {
        match s {
            "lp" => Ok(Mode::Lp),
            "milp" => Ok(Mode::Milp),
            other => Err(CoreError::Parse(format!("mode must be lp or milp, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompileOptions {
    pub mode: Mode,
    /// Overrides the model's own end timestamp with `start + hours`.
    pub horizon_hours: Option<usize>,
    /// Frees the mothball variables (they are created but pinned to zero by
    /// default — with a single investment period retiring is never useful,
    /// but the variables keep the investment identity visible).
    pub allow_retirement: bool,
    /// Multiplies candidate pools; integer-typed pools round down (but never
    /// below one). Used to shrink instances for fast test runs.
    pub candidate_scale: f64,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            mode: Mode::Milp,
            horizon_hours: None,
            allow_retirement: false,
            candidate_scale: 1.0,
        }
    }
}

/// Which side of a unit a flow variable sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FlowDir {
    /// Withdrawal: node → unit.
    From,
    /// Injection: unit → node.
    To,
}

/// The investment variable triple of one unit or storage node.
#[derive(Debug, Clone, Copy)]
pub struct InvestVars {
    pub invested: VarId,
    pub available: VarId,
    pub mothballed: VarId,
}

/// A compiled program plus the variable bookkeeping reporting needs.
#[derive(Debug)]
pub struct CompiledInstance {
    pub problem: Problem,
    pub horizon: Horizon,
    pub scenario: String,
    pub mode: Mode,
    pub prorate: f64,
    /// Hourly flow variables keyed by (unit, plain node, direction).
    pub flows: BTreeMap<(String, String, FlowDir), Vec<VarId>>,
    pub units_on: BTreeMap<String, Vec<VarId>>,
    pub units_available: BTreeMap<String, Vec<VarId>>,
    pub units_started: BTreeMap<String, Vec<VarId>>,
    pub units_shut: BTreeMap<String, Vec<VarId>>,
    pub unit_invest: BTreeMap<String, InvestVars>,
    pub node_state: BTreeMap<String, Vec<VarId>>,
    pub storage_invest: BTreeMap<String, InvestVars>,
    /// Objective terms by kind, for cost breakdowns: (variable, coefficient).
    pub operating_terms: Vec<(VarId, f64)>,
    pub invest_terms: Vec<(VarId, f64)>,
    pub fom_terms: Vec<(VarId, f64)>,
    /// Fixed-O&M on existing units: a constant, carried in the objective
    /// offset.
    pub fom_offset: f64,
}

/// Per-unit facts gathered before any variable exists.
struct UnitPlan {
    name: String,
    existing: f64,
    candidates: f64,
    invest_integer: bool,
    invest_cost: f64,
    fom_cost: f64,
    investable: bool,
    committable: bool,
    online_integer: bool,
    min_down_hours: Option<usize>,
    fix_on: Option<ParameterValue>,
    availability: Option<ParameterValue>,
    /// Upper bound for the commitment variables.
    units_ub: f64,
}

pub fn compile(view: &EffectiveView, options: &CompileOptions) -> Result<CompiledInstance, CoreError> {
    Compiler::new(view, options)?.run()
}

struct Compiler<'a, 'g> {
    view: &'a EffectiveView<'g>,
    options: &'a CompileOptions,
    horizon: Horizon,
    prorate: f64,
    problem: Problem,
    out: Bookkeeping,
}

#[derive(Default)]
struct Bookkeeping {
    flows: BTreeMap<(String, String, FlowDir), Vec<VarId>>,
    units_on: BTreeMap<String, Vec<VarId>>,
    units_available: BTreeMap<String, Vec<VarId>>,
    units_started: BTreeMap<String, Vec<VarId>>,
    units_shut: BTreeMap<String, Vec<VarId>>,
    unit_invest: BTreeMap<String, InvestVars>,
    node_state: BTreeMap<String, Vec<VarId>>,
    storage_invest: BTreeMap<String, InvestVars>,
    operating_terms: Vec<(VarId, f64)>,
    invest_terms: Vec<(VarId, f64)>,
    fom_terms: Vec<(VarId, f64)>,
    fom_offset: f64,
}

impl<'a, 'g> Compiler<'a, 'g> {
    fn new(view: &'a EffectiveView<'g>, options: &'a CompileOptions) -> Result<Self, CoreError> {
        let start = parse_timestamp(require_text(view.model("model_start"), "model model_start")?)?;
        let horizon = match options.horizon_hours {
            Some(hours) => {
                if hours == 0 {
                    return Err(CoreError::Compile("horizon must be at least one hour".into()));
                }
                Horizon::new(start, start + Duration::hours(hours as i64))?
            }
            None => {
                let end = parse_timestamp(require_text(view.model("model_end"), "model model_end")?)?;
                Horizon::new(start, end)?
            }
        };
        let prorate = horizon.hours as f64 / PRORATION_BASE_HOURS;
        let name = format!("{}_{}h_{}", view.stack.name, horizon.hours, options.mode.as_str());
        Ok(Compiler {
            view,
            options,
            horizon,
            prorate,
            problem: Problem::new(&name),
            out: Bookkeeping::default(),
        })
    }

    fn run(mut self) -> Result<CompiledInstance, CoreError> {
        let units = self.active_units();
        let plans: Vec<UnitPlan> =
            units.iter().map(|u| self.plan_unit(u)).collect::<Result<_, _>>()?;

        // Variables first (deterministic column order: units, then storage
        // nodes), then all constraint rows.
        let cost_specs = self.collect_flow_costs(&units)?;
        for plan in &plans {
            self.unit_variables(plan, &cost_specs)?;
        }
        self.storage_variables()?;

        for plan in &plans {
            self.investment_rows(plan)?;
            self.commitment_rows(plan)?;
            self.capacity_rows(plan)?;
            self.ratio_rows(plan)?;
            self.unit_commitment_rows(plan)?;
        }
        self.balance_rows(&units)?;
        self.user_constraint_rows(&units)?;

        self.problem
            .validate()
            .map_err(|e| CoreError::Compile(format!("compiled program is inconsistent: {e}")))?;
        Ok(CompiledInstance {
            problem: self.problem,
            horizon: self.horizon,
            scenario: self.view.stack.name.clone(),
            mode: self.options.mode,
            prorate: self.prorate,
            flows: self.out.flows,
            units_on: self.out.units_on,
            units_available: self.out.units_available,
            units_started: self.out.units_started,
            units_shut: self.out.units_shut,
            unit_invest: self.out.unit_invest,
            node_state: self.out.node_state,
            storage_invest: self.out.storage_invest,
            operating_terms: self.out.operating_terms,
            invest_terms: self.out.invest_terms,
            fom_terms: self.out.fom_terms,
            fom_offset: self.out.fom_offset,
        })
    }

    /// Units whose `is_active` flag resolves to true in this stack.
    fn active_units(&self) -> Vec<String> {
        self.view
            .graph
            .units
            .iter()
            .filter(|u| {
                self.view
                    .unit(u, "is_active")
                    .and_then(|v| v.as_flag())
                    .unwrap_or(false)
            })
            .cloned()
            .collect()
    }

    fn plan_unit(&self, unit: &str) -> Result<UnitPlan, CoreError> {
        let num = |param: &str, default: f64| -> Result<f64, CoreError> {
            match self.view.unit(unit, param) {
                None => Ok(default),
                Some(v) => v.as_number().ok_or_else(|| {
                    CoreError::Compile(format!("unit {unit}: {param} must be numeric"))
                }),
            }
        };
        let existing = num("number_of_units", 0.0)?;
        let raw_candidates = num("candidate_units", 0.0)?;
        let invest_integer = type_is_integer(self.view.unit(unit, "unit_investment_variable_type"), unit)?;
        let candidates = scale_candidates(raw_candidates, self.options.candidate_scale, invest_integer);
        let investable = candidates > 0.0;
        let online_integer = type_is_integer(self.view.unit(unit, "online_variable_type"), unit)?;
        let min_down_hours = match self.view.unit(unit, "min_down_time") {
            None => None,
            Some(v) => {
                let text = v.as_text().ok_or_else(|| {
                    CoreError::Compile(format!("unit {unit}: min_down_time must be a duration"))
                })?;
                let d = parse_duration(text)?;
                Some(d.num_hours().max(0) as usize)
            }
        };
        let fix_on = self.view.unit(unit, "fix_units_on").cloned();
        let availability = self.view.unit(unit, "unit_availability_factor").cloned();
        let has_capacity = self
            .view
            .graph
            .unit_relationships(unit)
            .iter()
            .any(|r| self.view.rel(r, "unit_capacity").is_some());
        let committable = has_capacity || fix_on.is_some();

        let af_max = match &availability {
            None => 1.0,
            Some(ParameterValue::Series(s)) => s
                .points()
                .iter()
                .map(|&(_, v)| v)
                .fold(1.0_f64, f64::max),
            Some(v) => v.as_number().map_or(1.0, |x| x.max(1.0)),
        };
        Ok(UnitPlan {
            name: unit.to_string(),
            existing,
            candidates,
            invest_integer,
            invest_cost: num("unit_investment_cost", 0.0)?,
            fom_cost: num("fom_cost", 0.0)?,
            investable,
            committable,
            online_integer,
            min_down_hours,
            fix_on,
            availability,
            units_ub: (existing + candidates) * af_max,
        })
    }

    /// Fuel costs keyed by the (unit, plain node, direction) flow they price.
    /// Costs declared against a group endpoint apply to every member flow.
    fn collect_flow_costs(
        &self,
        units: &[String],
    ) -> Result<BTreeMap<(String, String, FlowDir), Vec<ParameterValue>>, CoreError> {
        let mut costs: BTreeMap<(String, String, FlowDir), Vec<ParameterValue>> = BTreeMap::new();
        for unit in units {
            for rel in self.view.graph.unit_relationships(unit) {
                let Some(cost) = self.view.rel(rel, "fuel_cost") else { continue };
                let dir = match rel.kind {
                    RelKind::FromNode => FlowDir::From,
                    RelKind::ToNode => FlowDir::To,
                    RelKind::InOut => {
                        return Err(CoreError::Compile(format!(
                            "fuel_cost on {} is ambiguous; put it on the from- or to-relationship",
                            rel.entity()
                        )))
                    }
                };
                for member in self.view.graph.expand_endpoint(&rel.node1) {
                    costs
                        .entry((unit.clone(), member.to_string(), dir))
                        .or_default()
                        .push(cost.clone());
                }
            }
        }
        Ok(costs)
    }

    /// The flow endpoints of a unit: each relationship resolved to plain
    /// nodes and a direction. In-out relationships orient by which ratio
    /// parameter they carry.
    fn flow_endpoints(&self, unit: &str) -> Result<Vec<(String, FlowDir)>, CoreError> {
        let mut endpoints: Vec<(String, FlowDir)> = Vec::new();
        for rel in self.view.graph.unit_relationships(unit) {
            match rel.kind {
                RelKind::FromNode => {
                    for m in self.view.graph.expand_endpoint(&rel.node1) {
                        endpoints.push((m.to_string(), FlowDir::From));
                    }
                }
                RelKind::ToNode => {
                    for m in self.view.graph.expand_endpoint(&rel.node1) {
                        endpoints.push((m.to_string(), FlowDir::To));
                    }
                }
                RelKind::InOut => {
                    let node2 = rel.node2.as_deref().expect("in-out relationship has node2");
                    let in_out = self.view.rel(rel, "fix_ratio_in_out").is_some();
                    let out_out = self.view.rel(rel, "fix_ratio_out_out").is_some();
                    let first_dir = match (in_out, out_out) {
                        (true, false) => FlowDir::From,
                        (false, true) => FlowDir::To,
                        (true, true) => {
                            return Err(CoreError::Compile(format!(
                                "{} carries both an in-out and an out-out ratio",
                                rel.entity()
                            )))
                        }
                        (false, false) => {
                            return Err(CoreError::Compile(format!(
                                "{} needs fix_ratio_in_out or fix_ratio_out_out to orient its flows",
                                rel.entity()
                            )))
                        }
                    };
                    for m in self.view.graph.expand_endpoint(&rel.node1) {
                        endpoints.push((m.to_string(), first_dir));
                    }
                    for m in self.view.graph.expand_endpoint(node2) {
                        endpoints.push((m.to_string(), FlowDir::To));
                    }
                }
            }
        }
        endpoints.sort();
        endpoints.dedup();
        Ok(endpoints)
    }

    fn unit_variables(
        &mut self,
        plan: &UnitPlan,
        cost_specs: &BTreeMap<(String, String, FlowDir), Vec<ParameterValue>>,
    ) -> Result<(), CoreError> {
        let u = &plan.name;
        let milp = self.options.mode == Mode::Milp;

        if plan.investable {
            let kind = if plan.invest_integer && milp { VarKind::Integer } else { VarKind::Continuous };
            let invested = self.problem.add_var(
                &format!("units_invested.{u}.t00"),
                0.0,
                plan.candidates,
                kind,
                plan.invest_cost * self.prorate,
            );
            let available = self.problem.add_var(
                &format!("units_invested_available.{u}.t00"),
                0.0,
                plan.candidates,
                kind,
                plan.fom_cost * self.prorate,
            );
            let mothball_ub = if self.options.allow_retirement { plan.candidates } else { 0.0 };
            let mothballed = self.problem.add_var(
                &format!("units_mothballed.{u}.t00"),
                0.0,
                mothball_ub,
                kind,
                0.0,
            );
            if plan.invest_cost != 0.0 {
                self.out.invest_terms.push((invested, plan.invest_cost * self.prorate));
            }
            if plan.fom_cost != 0.0 {
                self.out.fom_terms.push((available, plan.fom_cost * self.prorate));
            }
            self.out
                .unit_invest
                .insert(u.clone(), InvestVars { invested, available, mothballed });
        }
        // Existing units pay fixed O&M whether or not anything was invested.
        self.out.fom_offset += plan.existing * plan.fom_cost * self.prorate;
        self.problem.objective_offset += plan.existing * plan.fom_cost * self.prorate;

        if plan.committable {
            let on_kind = if plan.online_integer && milp { VarKind::Integer } else { VarKind::Continuous };
            let mut available = Vec::with_capacity(self.horizon.hours);
            let mut on = Vec::with_capacity(self.horizon.hours);
            for h in 0..self.horizon.hours {
                available.push(self.problem.add_var(
                    &format!("units_available.{u}.h{h:04}"),
                    0.0,
                    plan.units_ub,
                    VarKind::Continuous,
                    0.0,
                ));
            }
            for (h, t) in self.horizon.iter() {
                let (lo, hi) = match &plan.fix_on {
                    Some(v) => {
                        let x = v.number_at(t).ok_or_else(|| {
                            CoreError::Compile(format!(
                                "unit {u}: fix_units_on has no value at {}",
                                format_timestamp(t)
                            ))
                        })?;
                        (x, x)
                    }
                    None => (0.0, plan.units_ub),
                };
                on.push(self.problem.add_var(
                    &format!("units_on.{u}.h{h:04}"),
                    lo,
                    hi,
                    on_kind,
                    0.0,
                ));
            }
            if milp && plan.online_integer {
                let mut started = Vec::with_capacity(self.horizon.hours);
                let mut shut = Vec::with_capacity(self.horizon.hours);
                for h in 0..self.horizon.hours {
                    started.push(self.problem.add_var(
                        &format!("units_started.{u}.h{h:04}"),
                        0.0,
                        plan.units_ub,
                        on_kind,
                        0.0,
                    ));
                }
                for h in 0..self.horizon.hours {
                    shut.push(self.problem.add_var(
                        &format!("units_shut_down.{u}.h{h:04}"),
                        0.0,
                        plan.units_ub,
                        on_kind,
                        0.0,
                    ));
                }
                self.out.units_started.insert(u.clone(), started);
                self.out.units_shut.insert(u.clone(), shut);
            }
            self.out.units_available.insert(u.clone(), available);
            self.out.units_on.insert(u.clone(), on);
        }

        for (node, dir) in self.flow_endpoints(u)? {
            let key = (u.clone(), node.clone(), dir);
            if self.out.flows.contains_key(&key) {
                continue;
            }
            let costs = cost_specs.get(&key);
            let suffix = match dir {
                FlowDir::To => String::new(),
                FlowDir::From => ".in".to_string(),
            };
            let mut vars = Vec::with_capacity(self.horizon.hours);
            for (h, t) in self.horizon.iter() {
                let mut cost = 0.0;
                if let Some(specs) = costs {
                    for spec in specs {
                        cost += spec.number_at(t).ok_or_else(|| {
                            CoreError::Compile(format!(
                                "fuel_cost for {u}/{node} has no value at {}",
                                format_timestamp(t)
                            ))
                        })?;
                    }
                }
                let var = self.problem.add_var(
                    &format!("unit_flow.{u}.{node}{suffix}.h{h:04}"),
                    0.0,
                    f64::INFINITY,
                    VarKind::Continuous,
                    cost,
                );
                if cost != 0.0 {
                    self.out.operating_terms.push((var, cost));
                }
                vars.push(var);
            }
            self.out.flows.insert(key, vars);
        }
        Ok(())
    }

    fn storage_variables(&mut self) -> Result<(), CoreError> {
        let milp = self.options.mode == Mode::Milp;
        for node in self.view.graph.nodes.clone() {
            if !flag(self.view.node(&node, "has_state")) {
                continue;
            }
            let mut state = Vec::with_capacity(self.horizon.hours);
            for h in 0..self.horizon.hours {
                state.push(self.problem.add_var(
                    &format!("node_state.{node}.h{h:04}"),
                    0.0,
                    f64::INFINITY,
                    VarKind::Continuous,
                    0.0,
                ));
            }
            self.out.node_state.insert(node.clone(), state);

            let raw_candidates = number_or(self.view.node(&node, "candidate_storages"), 0.0, &node)?;
            let integer =
                type_is_integer(self.view.node(&node, "storage_investment_variable_type"), &node)?;
            let candidates = scale_candidates(raw_candidates, self.options.candidate_scale, integer);
            if candidates > 0.0 {
                let cost = number_or(self.view.node(&node, "storage_investment_cost"), 0.0, &node)?
                    * self.prorate;
                let kind = if integer && milp { VarKind::Integer } else { VarKind::Continuous };
                let invested = self.problem.add_var(
                    &format!("storages_invested.{node}.t00"),
                    0.0,
                    candidates,
                    kind,
                    cost,
                );
                let available = self.problem.add_var(
                    &format!("storages_invested_available.{node}.t00"),
                    0.0,
                    candidates,
                    kind,
                    0.0,
                );
                let mothball_ub = if self.options.allow_retirement { candidates } else { 0.0 };
                let mothballed = self.problem.add_var(
                    &format!("storages_mothballed.{node}.t00"),
                    0.0,
                    mothball_ub,
                    kind,
                    0.0,
                );
                if cost != 0.0 {
                    self.out.invest_terms.push((invested, cost));
                }
                self.out
                    .storage_invest
                    .insert(node.clone(), InvestVars { invested, available, mothballed });
            }
        }
        Ok(())
    }

    fn investment_rows(&mut self, plan: &UnitPlan) -> Result<(), CoreError> {
        let Some(vars) = self.out.unit_invest.get(&plan.name) else { return Ok(()) };
        let u = &plan.name;
        self.problem.add_con(
            &format!("inv_cap.{u}.t00"),
            Sense::Le,
            plan.candidates,
            vec![(vars.available, 1.0)],
        );
        self.problem.add_con(
            &format!("inv_link.{u}.t00"),
            Sense::Eq,
            0.0,
            vec![(vars.available, 1.0), (vars.invested, -1.0), (vars.mothballed, 1.0)],
        );
        Ok(())
    }

    /// Availability and commitment chain: `units_available` below the
    /// availability factor times (existing + invested), `units_on` below
    /// `units_available`.
    fn commitment_rows(&mut self, plan: &UnitPlan) -> Result<(), CoreError> {
        let u = &plan.name;
        let Some(available) = self.out.units_available.get(u).cloned() else { return Ok(()) };
        let on = self.out.units_on[u].clone();
        let invest = self.out.unit_invest.get(u).copied();
        for (h, t) in self.horizon.iter() {
            let af = match &plan.availability {
                None => 1.0,
                Some(v) => v.number_at(t).ok_or_else(|| {
                    CoreError::Compile(format!(
                        "unit {u}: unit_availability_factor has no value at {}",
                        format_timestamp(t)
                    ))
                })?,
            };
            let mut terms = vec![(available[h], 1.0)];
            if let Some(iv) = invest {
                terms.push((iv.available, -af));
            }
            self.problem.add_con(
                &format!("avail.{u}.h{h:04}"),
                Sense::Le,
                af * plan.existing,
                terms,
            );
            self.problem.add_con(
                &format!("commit.{u}.h{h:04}"),
                Sense::Le,
                0.0,
                vec![(on[h], 1.0), (available[h], -1.0)],
            );
        }
        Ok(())
    }

    /// Flow capacity and minimum operating point per capacitated
    /// relationship; group endpoints bound the sum of member flows.
    fn capacity_rows(&mut self, plan: &UnitPlan) -> Result<(), CoreError> {
        let u = &plan.name;
        for rel in self.view.graph.unit_relationships(u) {
            let Some(cap) = self.view.rel(rel, "unit_capacity").cloned() else { continue };
            let dir = match rel.kind {
                RelKind::FromNode => FlowDir::From,
                RelKind::ToNode => FlowDir::To,
                RelKind::InOut => {
                    return Err(CoreError::Compile(format!(
                        "unit_capacity on {} is ambiguous; put it on the from- or to-relationship",
                        rel.entity()
                    )))
                }
            };
            let members: Vec<String> = self
                .view
                .graph
                .expand_endpoint(&rel.node1)
                .into_iter()
                .map(String::from)
                .collect();
            let on = self.out.units_on.get(u).cloned().ok_or_else(|| {
                CoreError::Compile(format!("unit {u} has a capacity but no commitment variables"))
            })?;
            let min_op = self.view.rel(rel, "minimum_operating_point").cloned();
            let arrow = if dir == FlowDir::From { "from" } else { "to" };
            for (h, t) in self.horizon.iter() {
                let cap_h = cap.number_at(t).ok_or_else(|| {
                    CoreError::Compile(format!(
                        "unit_capacity for {} has no value at {}",
                        rel.entity(),
                        format_timestamp(t)
                    ))
                })?;
                let mut terms: Vec<(VarId, f64)> = members
                    .iter()
                    .map(|m| (self.out.flows[&(u.clone(), m.clone(), dir)][h], 1.0))
                    .collect();
                terms.push((on[h], -cap_h));
                self.problem.add_con(
                    &format!("flow_cap.{u}.{arrow}.{}.h{h:04}", rel.node1),
                    Sense::Le,
                    0.0,
                    terms,
                );
                if let Some(m) = &min_op {
                    let m_h = m.number_at(t).ok_or_else(|| {
                        CoreError::Compile(format!(
                            "minimum_operating_point for {} has no value at {}",
                            rel.entity(),
                            format_timestamp(t)
                        ))
                    })?;
                    let mut terms: Vec<(VarId, f64)> = members
                        .iter()
                        .map(|mm| (self.out.flows[&(u.clone(), mm.clone(), dir)][h], 1.0))
                        .collect();
                    terms.push((on[h], -m_h * cap_h));
                    self.problem.add_con(
                        &format!("min_op.{u}.{arrow}.{}.h{h:04}", rel.node1),
                        Sense::Ge,
                        0.0,
                        terms,
                    );
                }
            }
        }
        Ok(())
    }

    /// Conversion ratios: input = ratio × output (in-out) and secondary
    /// output = ratio × reference output (out-out).
    fn ratio_rows(&mut self, plan: &UnitPlan) -> Result<(), CoreError> {
        let u = &plan.name;
        for rel in self.view.graph.unit_relationships(u) {
            if rel.kind != RelKind::InOut {
                continue;
            }
            let node2 = rel.node2.as_deref().expect("in-out relationship has node2");
            let in_out = self.view.rel(rel, "fix_ratio_in_out").cloned();
            let out_out = self.view.rel(rel, "fix_ratio_out_out").cloned();
            let (ratio, first_dir, tag) = match (in_out, out_out) {
                (Some(r), None) => (r, FlowDir::From, "ratio_io"),
                (None, Some(r)) => (r, FlowDir::To, "ratio_oo"),
                // Both/neither already rejected while planning endpoints.
                _ => unreachable!("ratio orientation validated during variable creation"),
            };
            let first: Vec<String> = self
                .view
                .graph
                .expand_endpoint(&rel.node1)
                .into_iter()
                .map(String::from)
                .collect();
            let second: Vec<String> = self
                .view
                .graph
                .expand_endpoint(node2)
                .into_iter()
                .map(String::from)
                .collect();
            for (h, t) in self.horizon.iter() {
                let r = ratio.number_at(t).ok_or_else(|| {
                    CoreError::Compile(format!(
                        "ratio for {} has no value at {}",
                        rel.entity(),
                        format_timestamp(t)
                    ))
                })?;
                // in-out: input(node1) = r × output(node2).
                // out-out: output(node2) = r × reference output(node1).
                let (unit_coeff, ratio_coeff) = match tag {
                    "ratio_io" => (1.0, -r),
                    _ => (-r, 1.0),
                };
                let mut terms: Vec<(VarId, f64)> = first
                    .iter()
                    .map(|m| (self.out.flows[&(u.clone(), m.clone(), first_dir)][h], unit_coeff))
                    .collect();
                for m in &second {
                    terms.push((self.out.flows[&(u.clone(), m.clone(), FlowDir::To)][h], ratio_coeff));
                }
                self.problem.add_con(
                    &format!("{tag}.{u}.{}.{}.h{h:04}", rel.node1, node2),
                    Sense::Eq,
                    0.0,
                    terms,
                );
            }
        }
        Ok(())
    }

    /// Start/stop accounting and minimum down time (MILP with integer online
    /// variables only). A unit down for fewer than `min_down_time` hours
    /// cannot restart: started(h) ≤ available(h) − shutdowns in the window
    /// ending at h.
    fn unit_commitment_rows(&mut self, plan: &UnitPlan) -> Result<(), CoreError> {
        let u = &plan.name;
        let Some(started) = self.out.units_started.get(u).cloned() else { return Ok(()) };
        let shut = self.out.units_shut[u].clone();
        let on = self.out.units_on[u].clone();
        let available = self.out.units_available[u].clone();
        for h in 0..self.horizon.hours {
            let mut terms = vec![(on[h], 1.0), (started[h], -1.0), (shut[h], 1.0)];
            if h > 0 {
                terms.push((on[h - 1], -1.0));
            }
            self.problem.add_con(&format!("uc_link.{u}.h{h:04}"), Sense::Eq, 0.0, terms);
        }
        if let Some(d) = plan.min_down_hours {
            if d > 1 {
                for h in 0..self.horizon.hours {
                    let mut terms = vec![(started[h], 1.0), (available[h], -1.0)];
                    for k in h.saturating_sub(d - 1)..=h {
                        terms.push((shut[k], 1.0));
                    }
                    self.problem.add_con(
                        &format!("min_down.{u}.h{h:04}"),
                        Sense::Le,
                        0.0,
                        terms,
                    );
                }
            }
        }
        Ok(())
    }

    /// Nodal balances. Plain nodes compare inflows against withdrawals under
    /// the node's sense; storage nodes instead run the state recursion
    /// state(h) = (1−loss)·state(h−1) + in − out with the pre-horizon state
    /// pinned by fix_node_state, plus the state cap and investment chain.
    fn balance_rows(&mut self, units: &[String]) -> Result<(), CoreError> {
        // Flows by node, assembled once: direction plus per-hour variables.
        let mut by_node: BTreeMap<String, Vec<(FlowDir, Vec<VarId>)>> = BTreeMap::new();
        for ((_, node, dir), vars) in &self.out.flows {
            by_node.entry(node.clone()).or_default().push((*dir, vars.clone()));
        }
        let _ = units;
        for node in self.view.graph.nodes.clone() {
            if self.view.graph.is_group(&node) {
                continue;
            }
            let touching = by_node.get(&node).cloned().unwrap_or_default();
            let is_storage = flag(self.view.node(&node, "has_state"));
            if is_storage {
                self.storage_rows(&node, &touching)?;
                continue;
            }
            if touching.is_empty() {
                continue;
            }
            let sense = match self.view.node(&node, "nodal_balance_sense") {
                None => Sense::Eq,
                Some(v) => parse_sense(v, &node)?,
            };
            for h in 0..self.horizon.hours {
                let terms: Vec<(VarId, f64)> = touching
                    .iter()
                    .map(|(dir, vars)| {
                        let sign = if *dir == FlowDir::To { 1.0 } else { -1.0 };
                        (vars[h], sign)
                    })
                    .collect();
                self.problem
                    .add_con(&format!("balance.{node}.h{h:04}"), sense, 0.0, terms);
            }
        }
        Ok(())
    }

    fn storage_rows(
        &mut self,
        node: &str,
        touching: &[(FlowDir, Vec<VarId>)],
    ) -> Result<(), CoreError> {
        let state = self.out.node_state[node].clone();
        let loss = number_or(self.view.node(node, "frac_state_loss"), 0.0, node)?;
        let carry = 1.0 - loss;
        let boundary = self.horizon.start - Duration::hours(1);
        let init = match self.view.node(node, "fix_node_state") {
            None => 0.0,
            Some(v) => v.number_at(boundary).ok_or_else(|| {
                CoreError::Compile(format!(
                    "node {node}: fix_node_state has no value at the pre-horizon hour {}",
                    format_timestamp(boundary)
                ))
            })?,
        };

        for h in 0..self.horizon.hours {
            let mut terms = vec![(state[h], 1.0)];
            if h > 0 {
                terms.push((state[h - 1], -carry));
            }
            for (dir, vars) in touching {
                let sign = if *dir == FlowDir::To { -1.0 } else { 1.0 };
                terms.push((vars[h], sign));
            }
            let rhs = if h == 0 { carry * init } else { 0.0 };
            self.problem
                .add_con(&format!("balance.{node}.h{h:04}"), Sense::Eq, rhs, terms);
        }

        if let Some(cap) = self.view.node(node, "node_state_cap") {
            let cap = cap.as_number().ok_or_else(|| {
                CoreError::Compile(format!("node {node}: node_state_cap must be numeric"))
            })?;
            let existing = number_or(self.view.node(node, "number_of_storages"), 0.0, node)?;
            let invest = self.out.storage_invest.get(node).copied();
            for h in 0..self.horizon.hours {
                let mut terms = vec![(state[h], 1.0)];
                if let Some(iv) = invest {
                    terms.push((iv.available, -cap));
                }
                self.problem.add_con(
                    &format!("state_cap.{node}.h{h:04}"),
                    Sense::Le,
                    cap * existing,
                    terms,
                );
            }
        }

        if flag(self.view.node(node, "cyclic_condition")) {
            let last = self.horizon.hours - 1;
            self.problem.add_con(
                &format!("cyclic.{node}"),
                Sense::Eq,
                init,
                vec![(state[last], 1.0)],
            );
        }

        if let Some(iv) = self.out.storage_invest.get(node).copied() {
            let raw = number_or(self.view.node(node, "candidate_storages"), 0.0, node)?;
            let integer =
                type_is_integer(self.view.node(node, "storage_investment_variable_type"), node)?;
            let candidates = scale_candidates(raw, self.options.candidate_scale, integer);
            self.problem.add_con(
                &format!("storage_inv_cap.{node}.t00"),
                Sense::Le,
                candidates,
                vec![(iv.available, 1.0)],
            );
            self.problem.add_con(
                &format!("storage_inv_link.{node}.t00"),
                Sense::Eq,
                0.0,
                vec![(iv.available, 1.0), (iv.invested, -1.0), (iv.mothballed, 1.0)],
            );
        }
        Ok(())
    }

    /// User constraints: Σ coefficient × units_on, summed over the horizon,
    /// against a sense and right-hand side. Skipped entirely when the stack
    /// does not resolve the sense or right-hand side.
    fn user_constraint_rows(&mut self, _units: &[String]) -> Result<(), CoreError> {
        for (name, members) in &self.view.graph.user_constraints {
            let sense = self.view.get(ClassTag::UserConstraint, name, "constraint_sense");
            let rhs = self.view.get(ClassTag::UserConstraint, name, "right_hand_side");
            let (Some(sense), Some(rhs)) = (sense, rhs) else { continue };
            let sense = parse_sense(sense, name)?;
            let rhs = rhs.as_number().ok_or_else(|| {
                CoreError::Compile(format!("user constraint {name}: right_hand_side must be numeric"))
            })?;
            let mut terms: Vec<(VarId, f64)> = Vec::new();
            for member in members {
                let entity = format!("{name}|{member}");
                let Some(coeff) =
                    self.view.get(ClassTag::UserConstraint, &entity, "units_on_coefficient")
                else {
                    continue;
                };
                let coeff = coeff.as_number().ok_or_else(|| {
                    CoreError::Compile(format!(
                        "user constraint {name}: coefficient for {member} must be numeric"
                    ))
                })?;
                let Some(on) = self.out.units_on.get(member) else { continue };
                for &var in on {
                    terms.push((var, coeff));
                }
            }
            if !terms.is_empty() {
                self.problem.add_con(&format!("user.{name}"), sense, rhs, terms);
            }
        }
        Ok(())
    }
}

fn require_text<'v>(v: Option<&'v ParameterValue>, what: &str) -> Result<&'v str, CoreError> {
    v.and_then(|v| v.as_text())
        .ok_or_else(|| CoreError::Compile(format!("{what} is not set in this scenario")))
}

fn number_or(v: Option<&ParameterValue>, default: f64, entity: &str) -> Result<f64, CoreError> {
    match v {
        None => Ok(default),
        Some(v) => v
            .as_number()
            .ok_or_else(|| CoreError::Compile(format!("{entity}: expected a numeric value"))),
    }
}

fn flag(v: Option<&ParameterValue>) -> bool {
    v.and_then(|v| v.as_flag()).unwrap_or(false)
}

fn type_is_integer(v: Option<&ParameterValue>, entity: &str) -> Result<bool, CoreError> {
    match v.and_then(|v| v.as_text()) {
        None => Ok(false),
        Some("continuous") => Ok(false),
        Some("integer") => Ok(true),
        Some(other) => Err(CoreError::Compile(format!(
            "{entity}: variable type must be continuous or integer, got {other:?}"
        ))),
    }
}

fn parse_sense(v: &ParameterValue, entity: &str) -> Result<Sense, CoreError> {
    match v.as_text() {
        Some("==") => Ok(Sense::Eq),
        Some("<=") => Ok(Sense::Le),
        Some(">=") => Ok(Sense::Ge),
        other => Err(CoreError::Compile(format!(
            "{entity}: sense must be ==, <=, or >=, got {other:?}"
        ))),
    }
}

/// Scales a candidate pool. Integer pools round down so the scaled pool stays
/// integral, but never below one — scaling must not remove an option
/// entirely.
fn scale_candidates(candidates: f64, scale: f64, integer: bool) -> f64 {
    if candidates <= 0.0 || scale == 1.0 {
        return candidates;
    }
    let scaled = candidates * scale;
    if integer {
        scaled.floor().max(1.0)
    } else {
        scaled
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EntityGraph, ParamKey};
    use crate::scenario::{compose, ScenarioStack};
    use hubopt_solver::{solve_milp, SolverConfig, SolveStatus};

    /// Builds a graph from (class, entity, parameter, value) rows, all in one
    /// layer named "Base", with model timing for a `hours`-hour horizon.
    fn graph(hours: usize, rows: &[(ClassTag, &str, &str, ParameterValue)]) -> EntityGraph {
        let mut g = EntityGraph::default();
        let mut layer = crate::graph::Layer::new();
        g.declare(ClassTag::Model, "hub").unwrap();
        layer.insert(
            ParamKey::new(ClassTag::Model, "hub", "model_start"),
            ParameterValue::Text("2019-01-01T00:00:00".into()),
        );
        let end = crate::time::parse_timestamp("2019-01-01T00:00:00").unwrap()
            + Duration::hours(hours as i64);
        layer.insert(
            ParamKey::new(ClassTag::Model, "hub", "model_end"),
            ParameterValue::Text(crate::time::format_timestamp(end)),
        );
        for (class, entity, param, value) in rows {
            g.declare(*class, entity).unwrap();
            layer.insert(ParamKey::new(*class, *entity, *param), value.clone());
        }
        g.layers.insert("Base".into(), layer);
        g
    }

    fn num(v: f64) -> ParameterValue {
        ParameterValue::Number(v)
    }
    fn text(s: &str) -> ParameterValue {
        ParameterValue::Text(s.into())
    }
    fn yes() -> ParameterValue {
        ParameterValue::Flag(true)
    }

    fn compile_base(g: &EntityGraph, options: &CompileOptions) -> CompiledInstance {
        let view = compose(g, &ScenarioStack::new("t", "", &["Base"])).unwrap();
        compile(&view, options).unwrap()
    }

    /// One investable generator selling into a sink at a negative fuel cost:
    /// the optimum invests the full candidate pool and runs flat out.
    fn seller(hours: usize, sale_price: f64, invest_cost: f64) -> EntityGraph {
        graph(
            hours,
            &[
                (ClassTag::Unit, "gen", "is_active", yes()),
                (ClassTag::Unit, "gen", "candidate_units", num(3.0)),
                (ClassTag::Unit, "gen", "unit_investment_cost", num(invest_cost)),
                (ClassTag::Unit, "gen", "unit_investment_variable_type", text("integer")),
                (ClassTag::Node, "sink", "nodal_balance_sense", text(">=")),
                (ClassTag::UnitToNode, "gen|sink", "unit_capacity", num(2.0)),
                (ClassTag::UnitToNode, "gen|sink", "fuel_cost", num(-sale_price)),
            ],
        )
    }

    #[test]
    fn investment_chain_invests_when_profitable() {
        let g = seller(2, 10.0, 8736.0); // prorated invest cost 2 per unit over 2h
        let inst = compile_base(&g, &CompileOptions::default());
        let sol = solve_milp(&inst.problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        // 3 units × 2 cap × 2 h × price 10 = 120 revenue, invest cost 3 × 2.
        assert!((sol.objective - (-120.0 + 6.0)).abs() < 1e-6, "objective {}", sol.objective);
        let inv = inst.unit_invest["gen"];
        assert!((sol.values[inv.invested.index()] - 3.0).abs() < 1e-9);
        assert!((sol.values[inv.available.index()] - 3.0).abs() < 1e-9);
        assert_eq!(sol.values[inv.mothballed.index()], 0.0);
    }

    #[test]
    fn investment_stays_out_when_unprofitable() {
        let g = seller(2, 10.0, 8736.0 * 50.0); // prorated invest cost 100 per unit
        let inst = compile_base(&g, &CompileOptions::default());
        let sol = solve_milp(&inst.problem, &SolverConfig::default()).unwrap();
        assert!(sol.objective.abs() < 1e-9, "objective {}", sol.objective);
    }

    #[test]
    fn availability_factor_scales_invested_headroom() {
        let mut g = seller(2, 10.0, 0.0);
        let layer = g.layers.get_mut("Base").unwrap();
        layer.insert(
            ParamKey::new(ClassTag::Unit, "gen", "unit_availability_factor"),
            ParameterValue::Series(
                crate::value::TimeSeries::new(vec![
                    (crate::time::parse_timestamp("2019-01-01T00:00:00").unwrap(), 0.5),
                    (crate::time::parse_timestamp("2019-01-01T01:00:00").unwrap(), 1.0),
                ])
                .unwrap(),
            ),
        );
        let inst = compile_base(&g, &CompileOptions::default());
        let sol = solve_milp(&inst.problem, &SolverConfig::default()).unwrap();
        // Hour 0 runs at half the fleet: (0.5 + 1.0) × 3 × 2 × 10 = 90.
        assert!((sol.objective + 90.0).abs() < 1e-6, "objective {}", sol.objective);
    }

    #[test]
    fn candidate_scaling_shrinks_pools_but_keeps_options() {
        assert_eq!(scale_candidates(222.0, 0.1, true), 22.0);
        assert_eq!(scale_candidates(1.0, 0.1, true), 1.0);
        assert_eq!(scale_candidates(5.0, 0.1, true), 1.0);
        assert_eq!(scale_candidates(10.0, 0.1, false), 1.0);
        assert_eq!(scale_candidates(0.0, 0.1, true), 0.0);
        let g = seller(1, 10.0, 0.0);
        let inst = compile_base(
            &g,
            &CompileOptions { candidate_scale: 1.0 / 3.0, ..CompileOptions::default() },
        );
        let sol = solve_milp(&inst.problem, &SolverConfig::default()).unwrap();
        let inv = inst.unit_invest["gen"];
        assert!((sol.values[inv.invested.index()] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn product_nodes_force_exact_balance() {
        // Converter buys from a source at 1, sells from a product node chain
        // at 5, with a 2:1 input ratio. Product balance must hold exactly.
        let g = graph(
            1,
            &[
                (ClassTag::Unit, "conv", "is_active", yes()),
                (ClassTag::Unit, "conv", "number_of_units", num(1.0)),
                (ClassTag::Unit, "sell", "is_active", yes()),
                (ClassTag::Node, "src", "nodal_balance_sense", text("<=")),
                (ClassTag::Node, "mid", "nodal_balance_sense", text("==")),
                (ClassTag::Node, "out", "nodal_balance_sense", text(">=")),
                (ClassTag::UnitToNode, "conv|mid", "unit_capacity", num(4.0)),
                (ClassTag::UnitFromNode, "conv|src", "fuel_cost", num(1.0)),
                (ClassTag::UnitNodeNode, "conv|src|mid", "fix_ratio_in_out", num(2.0)),
                (ClassTag::UnitToNode, "sell|out", "fuel_cost", num(-5.0)),
                (ClassTag::UnitFromNode, "sell|mid", "fuel_cost", num(0.0)),
            ],
        );
        let inst = compile_base(&g, &CompileOptions::default());
        let sol = solve_milp(&inst.problem, &SolverConfig::default()).unwrap();
        // 4 output sold at 5, 8 input bought at 1 → −12.
        assert!((sol.objective + 12.0).abs() < 1e-6, "objective {}", sol.objective);
        let produced = sol.values[inst.flows[&("conv".into(), "mid".into(), FlowDir::To)][0].index()];
        let sold = sol.values[inst.flows[&("sell".into(), "mid".into(), FlowDir::From)][0].index()];
        assert!((produced - sold).abs() < 1e-9);
        let bought = sol.values[inst.flows[&("conv".into(), "src".into(), FlowDir::From)][0].index()];
        assert!((bought - 2.0 * produced).abs() < 1e-9);
    }

    #[test]
    fn out_out_ratio_locks_byproduct_to_reference_output() {
        let g = graph(
            1,
            &[
                (ClassTag::Unit, "conv", "is_active", yes()),
                (ClassTag::Unit, "conv", "number_of_units", num(1.0)),
                (ClassTag::Node, "main", "nodal_balance_sense", text(">=")),
                (ClassTag::Node, "heat", "nodal_balance_sense", text(">=")),
                (ClassTag::UnitToNode, "conv|main", "unit_capacity", num(2.0)),
                (ClassTag::UnitToNode, "conv|main", "fuel_cost", num(-10.0)),
                (ClassTag::UnitNodeNode, "conv|main|heat", "fix_ratio_out_out", num(0.5)),
                (ClassTag::UnitToNode, "conv|heat", "fuel_cost", num(-1.0)),
            ],
        );
        let inst = compile_base(&g, &CompileOptions::default());
        let sol = solve_milp(&inst.problem, &SolverConfig::default()).unwrap();
        let main = sol.values[inst.flows[&("conv".into(), "main".into(), FlowDir::To)][0].index()];
        let heat = sol.values[inst.flows[&("conv".into(), "heat".into(), FlowDir::To)][0].index()];
        assert!((main - 2.0).abs() < 1e-9);
        assert!((heat - 1.0).abs() < 1e-9, "byproduct {heat} should be 0.5 × {main}");
        assert!((sol.objective + 21.0).abs() < 1e-6);
    }

    #[test]
    fn group_endpoints_bound_the_member_sum() {
        // A consumer draws from a two-member group; capacity and ratio bind
        // the sum, and each member flow is priced by its own relationship.
        let g = graph(
            1,
            &[
                (ClassTag::Unit, "conv", "is_active", yes()),
                (ClassTag::Unit, "conv", "number_of_units", num(1.0)),
                (ClassTag::Node, "cheap", "nodal_balance_sense", text("<=")),
                (ClassTag::Node, "dear", "nodal_balance_sense", text("<=")),
                (ClassTag::Group, "pool|cheap", "member", yes()),
                (ClassTag::Group, "pool|dear", "member", yes()),
                (ClassTag::Node, "out", "nodal_balance_sense", text(">=")),
                (ClassTag::UnitToNode, "conv|out", "unit_capacity", num(10.0)),
                (ClassTag::UnitToNode, "conv|out", "fuel_cost", num(-8.0)),
                (ClassTag::UnitNodeNode, "conv|pool|out", "fix_ratio_in_out", num(2.0)),
                (ClassTag::UnitFromNode, "conv|cheap", "fuel_cost", num(1.0)),
                (ClassTag::UnitFromNode, "conv|dear", "fuel_cost", num(3.0)),
            ],
        );
        let inst = compile_base(&g, &CompileOptions::default());
        let sol = solve_milp(&inst.problem, &SolverConfig::default()).unwrap();
        let cheap = sol.values[inst.flows[&("conv".into(), "cheap".into(), FlowDir::From)][0].index()];
        let dear = sol.values[inst.flows[&("conv".into(), "dear".into(), FlowDir::From)][0].index()];
        let out = sol.values[inst.flows[&("conv".into(), "out".into(), FlowDir::To)][0].index()];
        assert!((out - 10.0).abs() < 1e-9);
        assert!((cheap + dear - 2.0 * out).abs() < 1e-9, "group ratio over member sum");
        // All input drawn from the cheap member.
        assert!((cheap - 20.0).abs() < 1e-9);
        assert!(dear.abs() < 1e-9);
        assert!((sol.objective - (20.0 - 80.0)).abs() < 1e-6);
    }

    #[test]
    fn storage_recursion_carries_losses_and_cycles() {
        // Buy cheap in hour 0, store, sell dear in hour 2; 10% hourly loss.
        let g = graph(
            3,
            &[
                (ClassTag::Unit, "charge", "is_active", yes()),
                (ClassTag::Unit, "discharge", "is_active", yes()),
                (ClassTag::Node, "grid", "nodal_balance_sense", text("<=")),
                (ClassTag::Node, "sold", "nodal_balance_sense", text(">=")),
                (ClassTag::Node, "store", "has_state", yes()),
                (ClassTag::Node, "store", "frac_state_loss", num(0.1)),
                (ClassTag::Node, "store", "node_state_cap", num(100.0)),
                (ClassTag::Node, "store", "number_of_storages", num(1.0)),
                (
                    ClassTag::Node,
                    "store",
                    "fix_node_state",
                    ParameterValue::Series(
                        crate::value::TimeSeries::new(vec![(
                            crate::time::parse_timestamp("2018-12-31T23:00:00").unwrap(),
                            0.0,
                        )])
                        .unwrap(),
                    ),
                ),
                (ClassTag::UnitFromNode, "charge|grid", "fuel_cost", {
                    ParameterValue::Series(
                        crate::value::TimeSeries::new(vec![
                            (crate::time::parse_timestamp("2019-01-01T00:00:00").unwrap(), 1.0),
                            (crate::time::parse_timestamp("2019-01-01T01:00:00").unwrap(), 50.0),
                        ])
                        .unwrap(),
                    )
                }),
                (ClassTag::UnitNodeNode, "charge|grid|store", "fix_ratio_in_out", num(1.0)),
                (ClassTag::UnitToNode, "charge|store", "unit_capacity", num(5.0)),
                (ClassTag::Unit, "charge", "number_of_units", num(1.0)),
                (ClassTag::UnitFromNode, "discharge|store", "fuel_cost", num(0.0)),
                (ClassTag::UnitNodeNode, "discharge|store|sold", "fix_ratio_in_out", num(1.0)),
                (ClassTag::UnitToNode, "discharge|sold", "fuel_cost", {
                    ParameterValue::Series(
                        crate::value::TimeSeries::new(vec![
                            (crate::time::parse_timestamp("2019-01-01T00:00:00").unwrap(), 0.0),
                            (crate::time::parse_timestamp("2019-01-01T02:00:00").unwrap(), -20.0),
                        ])
                        .unwrap(),
                    )
                }),
            ],
        );
        let inst = compile_base(&g, &CompileOptions::default());
        let sol = solve_milp(&inst.problem, &SolverConfig::default()).unwrap();
        // Charge 5 in h0 (cost 5), state decays 5 → 4.5 entering h2 wait:
        // state(0)=5, state(1)=4.5, sell in h2: 0.9·4.5 = 4.05 at 20 → 81.
        // Net −81 + 5 = −76.
        assert!((sol.objective + 76.0).abs() < 1e-6, "objective {}", sol.objective);
        let state = &inst.node_state["store"];
        assert!((sol.values[state[0].index()] - 5.0).abs() < 1e-9);
        assert!((sol.values[state[1].index()] - 4.5).abs() < 1e-9);
        assert!(sol.values[state[2].index()].abs() < 1e-9);
    }

    #[test]
    fn cyclic_condition_pins_the_final_state() {
        // Same storage play, but the state must return to its initial value
        // (2.0) at the end of the horizon.
        let g = graph(
            2,
            &[
                (ClassTag::Unit, "discharge", "is_active", yes()),
                (ClassTag::Node, "sold", "nodal_balance_sense", text(">=")),
                (ClassTag::Node, "store", "has_state", yes()),
                (ClassTag::Node, "store", "node_state_cap", num(100.0)),
                (ClassTag::Node, "store", "number_of_storages", num(1.0)),
                (ClassTag::Node, "store", "cyclic_condition", yes()),
                (
                    ClassTag::Node,
                    "store",
                    "fix_node_state",
                    ParameterValue::Series(
                        crate::value::TimeSeries::new(vec![(
                            crate::time::parse_timestamp("2018-12-31T23:00:00").unwrap(),
                            2.0,
                        )])
                        .unwrap(),
                    ),
                ),
                (ClassTag::UnitFromNode, "discharge|store", "fuel_cost", num(0.0)),
                (ClassTag::UnitNodeNode, "discharge|store|sold", "fix_ratio_in_out", num(1.0)),
                (ClassTag::UnitToNode, "discharge|sold", "fuel_cost", num(-10.0)),
            ],
        );
        let inst = compile_base(&g, &CompileOptions::default());
        let sol = solve_milp(&inst.problem, &SolverConfig::default()).unwrap();
        let state = &inst.node_state["store"];
        // Selling would pay, but the cyclic pin forces the state back to 2.
        assert!((sol.values[state[1].index()] - 2.0).abs() < 1e-9);
        assert!(sol.objective.abs() < 1e-6, "objective {}", sol.objective);
    }

    fn uc_fixture(fix_pattern: &[f64]) -> EntityGraph {
        let hours = fix_pattern.len();
        let mut rows: Vec<(ClassTag, &str, &str, ParameterValue)> = vec![
            (ClassTag::Unit, "plant", "is_active", yes()),
            (ClassTag::Unit, "plant", "number_of_units", num(1.0)),
            (ClassTag::Unit, "plant", "online_variable_type", text("integer")),
            (ClassTag::Unit, "plant", "min_down_time", text("2h")),
            (ClassTag::Node, "out", "nodal_balance_sense", text(">=")),
            (ClassTag::UnitToNode, "plant|out", "unit_capacity", num(1.0)),
        ];
        let start = crate::time::parse_timestamp("2019-01-01T00:00:00").unwrap();
        let points: Vec<_> = fix_pattern
            .iter()
            .enumerate()
            .map(|(h, &v)| (start + Duration::hours(h as i64), v))
            .collect();
        rows.push((
            ClassTag::Unit,
            "plant",
            "fix_units_on",
            ParameterValue::Series(crate::value::TimeSeries::new(points).unwrap()),
        ));
        graph(hours, &rows)
    }

    #[test]
    fn min_down_time_blocks_short_outages() {
        // Down for two hours then restart: feasible.
        let inst = compile_base(&uc_fixture(&[1.0, 0.0, 0.0, 1.0]), &CompileOptions::default());
        let sol = solve_milp(&inst.problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let started = &inst.units_started["plant"];
        let shut = &inst.units_shut["plant"];
        assert!((sol.values[started[0].index()] - 1.0).abs() < 1e-9);
        assert!((sol.values[shut[1].index()] - 1.0).abs() < 1e-9);
        assert!((sol.values[started[3].index()] - 1.0).abs() < 1e-9);

        // Down for one hour then restart: the window constraint forbids it.
        let inst = compile_base(&uc_fixture(&[1.0, 0.0, 1.0, 1.0]), &CompileOptions::default());
        let sol = solve_milp(&inst.problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn lp_mode_relaxes_domains_and_drops_commitment() {
        let g = uc_fixture(&[1.0, 0.0, 0.0, 1.0]);
        let milp = compile_base(&g, &CompileOptions::default());
        let lp = compile_base(&g, &CompileOptions { mode: Mode::Lp, ..CompileOptions::default() });
        assert!(milp.problem.vars().iter().any(|v| v.kind == VarKind::Integer));
        assert!(lp.problem.vars().iter().all(|v| v.kind == VarKind::Continuous));
        assert!(lp.units_started.is_empty());
        assert!(lp
            .problem
            .cons()
            .iter()
            .all(|c| !c.name.starts_with("uc_link") && !c.name.starts_with("min_down")));
        assert!(milp.problem.cons().iter().any(|c| c.name.starts_with("min_down")));
    }

    #[test]
    fn minimum_operating_point_floors_running_units() {
        let g = graph(
            1,
            &[
                (ClassTag::Unit, "plant", "is_active", yes()),
                (ClassTag::Unit, "plant", "number_of_units", num(1.0)),
                (ClassTag::Unit, "plant", "online_variable_type", text("integer")),
                (
                    ClassTag::Unit,
                    "plant",
                    "fix_units_on",
                    ParameterValue::Series(
                        crate::value::TimeSeries::new(vec![(
                            crate::time::parse_timestamp("2019-01-01T00:00:00").unwrap(),
                            1.0,
                        )])
                        .unwrap(),
                    ),
                ),
                (ClassTag::Node, "out", "nodal_balance_sense", text(">=")),
                (ClassTag::UnitToNode, "plant|out", "unit_capacity", num(10.0)),
                (ClassTag::UnitToNode, "plant|out", "minimum_operating_point", num(0.2)),
                (ClassTag::UnitToNode, "plant|out", "fuel_cost", num(1.0)),
            ],
        );
        let inst = compile_base(&g, &CompileOptions::default());
        let sol = solve_milp(&inst.problem, &SolverConfig::default()).unwrap();
        // Forced on and output costs money: the floor 0.2 × 10 × 1 binds.
        let out = sol.values[inst.flows[&("plant".into(), "out".into(), FlowDir::To)][0].index()];
        assert!((out - 2.0).abs() < 1e-9, "flow {out} should sit at the minimum");
    }

    #[test]
    fn user_constraints_cap_summed_on_hours() {
        // Two free generators, each worth 1/hour when on; the shared cap
        // allows three unit-hours across the 2-hour horizon.
        let mut rows: Vec<(ClassTag, &str, &str, ParameterValue)> = Vec::new();
        for unit in ["gen_a", "gen_b"] {
            for row in [
                (ClassTag::Unit, unit, "is_active", yes()),
                (ClassTag::Unit, unit, "number_of_units", num(1.0)),
                (ClassTag::Unit, unit, "online_variable_type", text("integer")),
            ] {
                rows.push(row);
            }
        }
        rows.push((ClassTag::Node, "out", "nodal_balance_sense", text(">=")));
        rows.push((ClassTag::UnitToNode, "gen_a|out", "unit_capacity", num(1.0)));
        rows.push((ClassTag::UnitToNode, "gen_b|out", "unit_capacity", num(1.0)));
        rows.push((ClassTag::UnitToNode, "gen_a|out", "fuel_cost", num(-1.0)));
        rows.push((ClassTag::UnitToNode, "gen_b|out", "fuel_cost", num(-1.0)));
        rows.push((ClassTag::UserConstraint, "cap", "constraint_sense", text("<=")));
        rows.push((ClassTag::UserConstraint, "cap", "right_hand_side", num(3.0)));
        rows.push((ClassTag::UserConstraint, "cap|gen_a", "units_on_coefficient", num(1.0)));
        rows.push((ClassTag::UserConstraint, "cap|gen_b", "units_on_coefficient", num(1.0)));
        let g = graph(2, &rows);
        let inst = compile_base(&g, &CompileOptions::default());
        let sol = solve_milp(&inst.problem, &SolverConfig::default()).unwrap();
        assert!((sol.objective + 3.0).abs() < 1e-6, "objective {}", sol.objective);
    }

    #[test]
    fn proration_scales_fixed_costs_with_the_horizon() {
        let g = seller(2, 10.0, 8736.0);
        let view = compose(&g, &ScenarioStack::new("t", "", &["Base"])).unwrap();
        let inst = compile(&view, &CompileOptions::default()).unwrap();
        assert!((inst.prorate - 2.0 / 8736.0).abs() < 1e-15);
        let inv = inst.unit_invest["gen"];
        let var = &inst.problem.vars()[inv.invested.index()];
        assert!((var.objective - 2.0).abs() < 1e-12, "prorated invest cost {}", var.objective);
        // FOM on existing units lands in the objective offset.
        let mut g2 = seller(2, 10.0, 8736.0);
        let layer = g2.layers.get_mut("Base").unwrap();
        layer.insert(ParamKey::new(ClassTag::Unit, "gen", "number_of_units"), num(2.0));
        layer.insert(ParamKey::new(ClassTag::Unit, "gen", "fom_cost"), num(4368.0));
        let inst2 = compile_base(&g2, &CompileOptions::default());
        assert!((inst2.fom_offset - 2.0).abs() < 1e-12);
        assert!((inst2.problem.objective_offset - 2.0).abs() < 1e-12);
    }

    #[test]
    fn compiling_twice_is_deterministic() {
        let g = seller(3, 10.0, 100.0);
        let a = compile_base(&g, &CompileOptions::default());
        let b = compile_base(&g, &CompileOptions::default());
        assert_eq!(a.problem.num_vars(), b.problem.num_vars());
        assert_eq!(a.problem.num_cons(), b.problem.num_cons());
        for (x, y) in a.problem.vars().iter().zip(b.problem.vars()) {
            assert_eq!(x.name, y.name);
            assert_eq!(x.objective.to_bits(), y.objective.to_bits());
        }
        for (x, y) in a.problem.cons().iter().zip(b.problem.cons()) {
            assert_eq!(x.name, y.name);
            assert_eq!(x.rhs.to_bits(), y.rhs.to_bits());
        }
    }

    #[test]
    fn horizon_override_and_missing_model_params() {
        let g = seller(8736, 10.0, 100.0);
        let view = compose(&g, &ScenarioStack::new("t", "", &["Base"])).unwrap();
        let inst = compile(
            &view,
            &CompileOptions { horizon_hours: Some(24), ..CompileOptions::default() },
        )
        .unwrap();
        assert_eq!(inst.horizon.hours, 24);

        let mut g2 = g.clone();
        g2.layers
            .get_mut("Base")
            .unwrap()
            .remove(&ParamKey::new(ClassTag::Model, "hub", "model_end"));
        let view2 = compose(&g2, &ScenarioStack::new("t", "", &["Base"])).unwrap();
        let err = compile(&view2, &CompileOptions::default()).unwrap_err();
        assert!(err.to_string().contains("model_end"));
        // With an explicit horizon the missing end timestamp is irrelevant.
        assert!(compile(
            &view2,
            &CompileOptions { horizon_hours: Some(4), ..CompileOptions::default() }
        )
        .is_ok());
    }
}
