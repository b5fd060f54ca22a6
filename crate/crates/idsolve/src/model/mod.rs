//! Influence diagrams with framing functions.
//!
//! A diagram holds chance, decision, and value variables, the parent arcs
//! between them, conditional probability tables for chance variables, value
//! tables for value variables, and optional framing functions for decision
//! variables. Partial assignments of outcomes to variables are represented by
//! [`State`]; most operations in the rest of the crate are phrased in terms
//! of states and their enumeration order.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

mod builder;
mod validate;

pub use builder::{
    cpt_row, framing_row, value_row, CptRowSpec, DiagramBuilder, FramingRowSpec, ValueRowSpec,
};
pub use validate::{no_errors, Diagnostic, Severity, DEFAULT_CPT_SUM_TOL};

/// Identifier of a variable: its position in the diagram's declaration order.
///
/// All deterministic orderings in the crate (state enumeration, elimination
/// tie-breaks, summation order) are derived from `VarId` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// The role a variable plays in the diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Chance,
    Decision,
    Value,
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VarKind::Chance => "chance",
            VarKind::Decision => "decision",
            VarKind::Value => "value",
        };
        f.write_str(s)
    }
}

/// A named variable and its frame (outcome labels, in declaration order).
///
/// Value variables have an empty frame; chance and decision variables must
/// have at least one outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub frame: Vec<String>,
}

/// A partial assignment of outcomes to the variables of one diagram.
///
/// Slot `i` holds the outcome index of variable `VarId(i)`, or `None` when
/// the variable is unassigned. Two states are *consistent* when they agree on
/// every variable assigned in both.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct State {
    slots: Vec<Option<usize>>,
}

impl State {
    /// The empty assignment over `num_vars` variables.
    pub fn empty(num_vars: usize) -> Self {
        State {
            slots: vec![None; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.slots.len()
    }

    pub fn get(&self, var: VarId) -> Option<usize> {
        self.slots.get(var.0).copied().flatten()
    }

    pub fn is_assigned(&self, var: VarId) -> bool {
        self.get(var).is_some()
    }

    pub fn set(&mut self, var: VarId, outcome: usize) {
        self.slots[var.0] = Some(outcome);
    }

    pub fn clear(&mut self, var: VarId) {
        self.slots[var.0] = None;
    }

    /// A copy of this state with `var` assigned to `outcome`.
    pub fn extended(&self, var: VarId, outcome: usize) -> State {
        let mut next = self.clone();
        next.set(var, outcome);
        next
    }

    /// Assigned variables in ascending `VarId` order.
    pub fn assigned(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, slot)| slot.map(|o| (VarId(i), o)))
    }

    pub fn assigned_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(|s| s.is_none())
    }

    /// True when the two states agree on every variable assigned in both.
    /// The empty state is consistent with everything.
    pub fn consistent(&self, other: &State) -> bool {
        let n = self.slots.len().max(other.slots.len());
        (0..n).all(|i| {
            match (
                self.slots.get(i).copied().flatten(),
                other.slots.get(i).copied().flatten(),
            ) {
                (Some(a), Some(b)) => a == b,
                _ => true,
            }
        })
    }

    /// The restriction of this state to `vars`; variables outside `vars`
    /// become unassigned.
    pub fn project(&self, vars: &[VarId]) -> State {
        let mut out = State::empty(self.slots.len());
        for &v in vars {
            if let Some(o) = self.get(v) {
                out.set(v, o);
            }
        }
        out
    }

    /// This state overlaid with every assignment of `other`.
    pub fn merged(&self, other: &State) -> State {
        let mut out = self.clone();
        for (v, o) in other.assigned() {
            out.set(v, o);
        }
        out
    }

    /// True when every variable of `vars` is assigned.
    pub fn covers(&self, vars: &[VarId]) -> bool {
        vars.iter().all(|&v| self.is_assigned(v))
    }
}

/// One row of a conditional probability table: a pattern over the table's
/// parents and a distribution over the child's frame.
///
/// Pattern slot `i` constrains parent `i` of the owning table; `None` is a
/// wildcard. The first row whose pattern matches a parent configuration
/// supplies its distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct CptRow {
    pub pattern: Vec<Option<usize>>,
    pub distribution: Vec<f64>,
}

/// Conditional probability table of one chance variable.
///
/// `parents` is the table's own ordered parent list; validation checks that
/// it matches the graph parents of `child`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub child: VarId,
    pub parents: Vec<VarId>,
    pub rows: Vec<CptRow>,
}

fn pattern_matches(pattern: &[Option<usize>], config: &[usize]) -> bool {
    pattern
        .iter()
        .zip(config)
        .all(|(p, &c)| p.is_none_or(|want| want == c))
}

impl Cpt {
    /// First row matching `config` (outcome index per parent, in `parents`
    /// order).
    pub fn row_for(&self, config: &[usize]) -> Option<&CptRow> {
        self.rows
            .iter()
            .find(|row| pattern_matches(&row.pattern, config))
    }

    /// The distribution for `config`, optionally renormalized to sum to one.
    ///
    /// Renormalization divides each entry by the row sum and is a no-op for
    /// rows that already sum to one; rows with zero total mass are returned
    /// unchanged. Returns `None` when no row matches.
    pub fn effective_distribution(&self, config: &[usize], renormalize: bool) -> Option<Vec<f64>> {
        let row = self.row_for(config)?;
        let mut dist = row.distribution.clone();
        if renormalize {
            let total: f64 = dist.iter().sum();
            if total > 0.0 {
                for p in &mut dist {
                    *p /= total;
                }
            }
        }
        Some(dist)
    }
}

/// One row of a value table: a pattern over the table's parents and the
/// utility earned by matching configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueRow {
    pub pattern: Vec<Option<usize>>,
    pub value: f64,
}

/// Utility table of one value variable, in first-match row order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub node: VarId,
    pub parents: Vec<VarId>,
    pub rows: Vec<ValueRow>,
}

impl ValueTable {
    pub fn value_for(&self, config: &[usize]) -> Option<f64> {
        self.rows
            .iter()
            .find(|row| pattern_matches(&row.pattern, config))
            .map(|row| row.value)
    }
}

/// One row of a framing function: a pattern over the decision's parents and
/// the alternatives that remain legitimate there.
#[derive(Debug, Clone, PartialEq)]
pub struct FramingRow {
    pub pattern: Vec<Option<usize>>,
    pub allowed: Vec<usize>,
}

/// Framing function of one decision variable: maps each information state to
/// the subset of alternatives worth considering there. Patterns are aligned
/// with the decision's graph parents; first match wins.
#[derive(Debug, Clone, PartialEq)]
pub struct FramingFunction {
    pub decision: VarId,
    pub rows: Vec<FramingRow>,
}

impl FramingFunction {
    pub fn allowed_for(&self, config: &[usize]) -> Option<&[usize]> {
        self.rows
            .iter()
            .find(|row| pattern_matches(&row.pattern, config))
            .map(|row| row.allowed.as_slice())
    }
}

/// One entry of a decision rule: a full information state, the alternative
/// chosen there, and whether the state is reachable under the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleEntry {
    pub state: State,
    pub choice: usize,
    pub reachable: bool,
}

/// A complete rule for one decision: an alternative for every information
/// state, in state enumeration order when produced by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRule {
    pub decision: VarId,
    pub entries: Vec<RuleEntry>,
}

/// Errors raised while constructing diagrams or resolving names and states.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("unknown outcome '{outcome}' for variable {variable}")]
    UnknownOutcome { variable: String, outcome: String },
    #[error("duplicate variable '{0}'")]
    DuplicateVariable(String),
    #[error("duplicate {kind} declaration for {variable}")]
    DuplicateDeclaration {
        kind: &'static str,
        variable: String,
    },
    #[error("variable {variable} is a {actual} variable; expected {expected}")]
    WrongKind {
        variable: String,
        expected: &'static str,
        actual: VarKind,
    },
    #[error("pattern variable {variable} is not a parent of {node}")]
    PatternVariableNotParent { variable: String, node: String },
    #[error("information state does not assign {variable}")]
    IncompleteState { variable: String },
    #[error("no framing row matches the information state of {decision}")]
    UnmatchedFramingState { decision: String },
    #[error("no row of the {kind} for {node} matches the parent configuration {config}")]
    UnmatchedPattern {
        kind: &'static str,
        node: String,
        config: String,
    },
}

/// An influence diagram extended with framing functions.
///
/// Construction goes through [`DiagramBuilder`] or the `.id` parser in
/// [`crate::format`]; both resolve names to [`VarId`]s and leave semantic
/// checks to [`InfluenceDiagram::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceDiagram {
    name: String,
    variables: Vec<Variable>,
    parents: Vec<Vec<VarId>>,
    cpts: Vec<Option<Cpt>>,
    value_tables: Vec<Option<ValueTable>>,
    framings: Vec<Option<FramingFunction>>,
    decision_order: Vec<VarId>,
    index: HashMap<String, VarId>,
}

impl InfluenceDiagram {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_resolved(
        name: String,
        variables: Vec<Variable>,
        parents: Vec<Vec<VarId>>,
        cpts: Vec<Option<Cpt>>,
        value_tables: Vec<Option<ValueTable>>,
        framings: Vec<Option<FramingFunction>>,
        decision_order: Vec<VarId>,
    ) -> Self {
        let index = variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), VarId(i)))
            .collect();
        InfluenceDiagram {
            name,
            variables,
            parents,
            cpts,
            value_tables,
            framings,
            decision_order,
            index,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn variables(&self) -> impl Iterator<Item = (VarId, &Variable)> {
        self.variables
            .iter()
            .enumerate()
            .map(|(i, v)| (VarId(i), v))
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> {
        (0..self.variables.len()).map(VarId)
    }

    /// Graph parents of `id`, in declared arc order.
    pub fn parents(&self, id: VarId) -> &[VarId] {
        &self.parents[id.0]
    }

    /// Graph children of `id`, in ascending `VarId` order.
    pub fn children(&self, id: VarId) -> Vec<VarId> {
        self.var_ids()
            .filter(|&c| self.parents[c.0].contains(&id))
            .collect()
    }

    /// All arcs `(parent, child)`, grouped by child in ascending order.
    pub fn arcs(&self) -> impl Iterator<Item = (VarId, VarId)> + '_ {
        self.var_ids()
            .flat_map(move |c| self.parents[c.0].iter().map(move |&p| (p, c)))
    }

    /// Decision variables in the declared decision order.
    pub fn decision_order(&self) -> &[VarId] {
        &self.decision_order
    }

    pub fn chance_vars(&self) -> Vec<VarId> {
        self.vars_of_kind(VarKind::Chance)
    }

    pub fn decision_vars(&self) -> Vec<VarId> {
        self.vars_of_kind(VarKind::Decision)
    }

    pub fn value_vars(&self) -> Vec<VarId> {
        self.vars_of_kind(VarKind::Value)
    }

    fn vars_of_kind(&self, kind: VarKind) -> Vec<VarId> {
        self.var_ids()
            .filter(|&v| self.variables[v.0].kind == kind)
            .collect()
    }

    pub fn frame_size(&self, id: VarId) -> usize {
        self.variables[id.0].frame.len()
    }

    pub fn cpt(&self, id: VarId) -> Option<&Cpt> {
        self.cpts[id.0].as_ref()
    }

    pub fn value_table(&self, id: VarId) -> Option<&ValueTable> {
        self.value_tables[id.0].as_ref()
    }

    pub fn framing(&self, id: VarId) -> Option<&FramingFunction> {
        self.framings[id.0].as_ref()
    }

    pub fn empty_state(&self) -> State {
        State::empty(self.num_vars())
    }

    /// Resolves `(variable, outcome)` label pairs into a state.
    pub fn state_from_pairs(&self, pairs: &[(&str, &str)]) -> Result<State, ModelError> {
        let mut state = self.empty_state();
        for &(var, outcome) in pairs {
            let id = self
                .var_id(var)
                .ok_or_else(|| ModelError::UnknownVariable(var.to_string()))?;
            let o = self.outcome_index(id, outcome)?;
            state.set(id, o);
        }
        Ok(state)
    }

    pub fn outcome_index(&self, var: VarId, outcome: &str) -> Result<usize, ModelError> {
        self.variables[var.0]
            .frame
            .iter()
            .position(|label| label == outcome)
            .ok_or_else(|| ModelError::UnknownOutcome {
                variable: self.variables[var.0].name.clone(),
                outcome: outcome.to_string(),
            })
    }

    /// Renders the assigned part of `state` as `var=outcome, …` in ascending
    /// variable order, or `∅` for the empty state.
    pub fn state_label(&self, state: &State) -> String {
        let parts: Vec<String> = state
            .assigned()
            .map(|(v, o)| {
                format!(
                    "{}={}",
                    self.variables[v.0].name, self.variables[v.0].frame[o]
                )
            })
            .collect();
        if parts.is_empty() {
            "∅".to_string()
        } else {
            parts.join(", ")
        }
    }

    /// Outcome indices of `state` at `vars`, in the order given.
    ///
    /// Errors with [`ModelError::IncompleteState`] when a variable is
    /// unassigned.
    pub fn config_of(&self, state: &State, vars: &[VarId]) -> Result<Vec<usize>, ModelError> {
        vars.iter()
            .map(|&v| {
                state.get(v).ok_or_else(|| ModelError::IncompleteState {
                    variable: self.variables[v.0].name.clone(),
                })
            })
            .collect()
    }

    /// All full assignments of `vars`, in enumeration order: variables sorted
    /// ascending, the first variable most significant, outcomes in frame
    /// order. Empty `vars` yields exactly the empty state.
    pub fn enumerate_states(&self, vars: &[VarId]) -> StateIter<'_> {
        StateIter::new(self, self.empty_state(), vars)
    }

    /// All extensions of `base` that fully assign `vars`, enumerating the
    /// unassigned variables in enumeration order.
    pub fn extensions(&self, base: &State, vars: &[VarId]) -> StateIter<'_> {
        let free: Vec<VarId> = vars
            .iter()
            .copied()
            .filter(|&v| !base.is_assigned(v))
            .collect();
        StateIter::new(self, base.clone(), &free)
    }

    /// The set of legitimate alternatives of `decision` in the information
    /// state `state`, as outcome indices in frame order.
    ///
    /// Without a framing function this is the full frame. `state` must
    /// assign every parent of `decision`.
    pub fn effective_frame(
        &self,
        decision: VarId,
        state: &State,
    ) -> Result<Vec<usize>, ModelError> {
        match &self.framings[decision.0] {
            None => Ok((0..self.frame_size(decision)).collect()),
            Some(framing) => {
                let config = self.config_of(state, &self.parents[decision.0])?;
                let allowed = framing.allowed_for(&config).ok_or_else(|| {
                    ModelError::UnmatchedFramingState {
                        decision: self.variables[decision.0].name.clone(),
                    }
                })?;
                Ok(allowed.to_vec())
            }
        }
    }
}

/// Iterator over full assignments of a variable set, extending a base state.
///
/// Assignments are produced in enumeration order: the iteration variables
/// sorted ascending, the first moving slowest, each frame in outcome order.
pub struct StateIter<'a> {
    diagram: &'a InfluenceDiagram,
    base: State,
    vars: Vec<VarId>,
    counters: Vec<usize>,
    done: bool,
}

impl<'a> StateIter<'a> {
    fn new(diagram: &'a InfluenceDiagram, base: State, vars: &[VarId]) -> Self {
        let mut vars: Vec<VarId> = vars.to_vec();
        vars.sort_unstable();
        vars.dedup();
        for &v in &vars {
            assert!(
                diagram.var(v).kind != VarKind::Value,
                "cannot enumerate outcomes of value variable {}",
                diagram.var(v).name
            );
        }
        let done = vars.iter().any(|&v| diagram.frame_size(v) == 0);
        let counters = vec![0; vars.len()];
        StateIter {
            diagram,
            base,
            vars,
            counters,
            done,
        }
    }

    /// Number of assignments this iterator produces in total.
    pub fn len_total(&self) -> usize {
        self.vars
            .iter()
            .map(|&v| self.diagram.frame_size(v))
            .product()
    }
}

impl Iterator for StateIter<'_> {
    type Item = State;

    fn next(&mut self) -> Option<State> {
        if self.done {
            return None;
        }
        let mut state = self.base.clone();
        for (i, &v) in self.vars.iter().enumerate() {
            state.set(v, self.counters[i]);
        }
        // Odometer step: the last variable turns fastest.
        let mut i = self.vars.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.counters[i] += 1;
            if self.counters[i] < self.diagram.frame_size(self.vars[i]) {
                break;
            }
            self.counters[i] = 0;
        }
        Some(state)
    }
}
