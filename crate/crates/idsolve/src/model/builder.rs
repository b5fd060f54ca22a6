//! Programmatic construction of influence diagrams.
//!
//! The builder resolves variable and outcome names to indices but performs no
//! semantic checking beyond that: cycles, missing tables, bad distributions,
//! and the like are left for [`InfluenceDiagram::validate`] so that tests can
//! construct broken diagrams on purpose.

use std::collections::HashMap;

use super::{
    Cpt, CptRow, FramingFunction, FramingRow, InfluenceDiagram, ModelError, ValueRow, ValueTable,
    VarId, VarKind, Variable,
};

/// Row of a CPT under construction: pattern pairs and `(outcome, probability)`
/// entries. Outcomes absent from the distribution get probability zero.
#[derive(Debug, Clone)]
pub struct CptRowSpec {
    pub pattern: Vec<(String, String)>,
    pub distribution: Vec<(String, f64)>,
}

/// Builds a [`CptRowSpec`]; a pattern pair with outcome `"*"` is a wildcard,
/// as is omitting the parent entirely.
pub fn cpt_row(pattern: &[(&str, &str)], distribution: &[(&str, f64)]) -> CptRowSpec {
    CptRowSpec {
        pattern: own_pairs(pattern),
        distribution: distribution
            .iter()
            .map(|&(o, p)| (o.to_string(), p))
            .collect(),
    }
}

/// Row of a value table under construction.
#[derive(Debug, Clone)]
pub struct ValueRowSpec {
    pub pattern: Vec<(String, String)>,
    pub value: f64,
}

pub fn value_row(pattern: &[(&str, &str)], value: f64) -> ValueRowSpec {
    ValueRowSpec {
        pattern: own_pairs(pattern),
        value,
    }
}

/// Row of a framing function under construction.
#[derive(Debug, Clone)]
pub struct FramingRowSpec {
    pub pattern: Vec<(String, String)>,
    pub allowed: Vec<String>,
}

pub fn framing_row(pattern: &[(&str, &str)], allowed: &[&str]) -> FramingRowSpec {
    FramingRowSpec {
        pattern: own_pairs(pattern),
        allowed: allowed.iter().map(|a| a.to_string()).collect(),
    }
}

fn own_pairs(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs
        .iter()
        .map(|&(a, b)| (a.to_string(), b.to_string()))
        .collect()
}

/// Incremental construction of an [`InfluenceDiagram`].
///
/// ```
/// use idsolve::model::{cpt_row, DiagramBuilder};
///
/// let mut b = DiagramBuilder::new("coin");
/// b.chance("Coin", &["heads", "tails"]);
/// b.cpt("Coin", &[], vec![cpt_row(&[], &[("heads", 0.5), ("tails", 0.5)])]);
/// let diagram = b.build().unwrap();
/// assert!(diagram.validate().is_empty());
/// ```
#[derive(Debug, Default)]
pub struct DiagramBuilder {
    name: String,
    variables: Vec<Variable>,
    index: HashMap<String, VarId>,
    parents: Vec<Vec<String>>,
    cpts: Vec<(String, Vec<String>, Vec<CptRowSpec>)>,
    value_tables: Vec<(String, Vec<String>, Vec<ValueRowSpec>)>,
    framings: Vec<(String, Vec<FramingRowSpec>)>,
    order: Vec<String>,
    first_error: Option<ModelError>,
}

impl DiagramBuilder {
    pub fn new(name: &str) -> Self {
        DiagramBuilder {
            name: name.to_string(),
            ..Default::default()
        }
    }

    fn declare(&mut self, name: &str, kind: VarKind, frame: &[&str]) {
        if self.index.contains_key(name) {
            self.record(ModelError::DuplicateVariable(name.to_string()));
            return;
        }
        self.index
            .insert(name.to_string(), VarId(self.variables.len()));
        self.variables.push(Variable {
            name: name.to_string(),
            kind,
            frame: frame.iter().map(|f| f.to_string()).collect(),
        });
        self.parents.push(Vec::new());
    }

    pub fn chance(&mut self, name: &str, frame: &[&str]) -> &mut Self {
        self.declare(name, VarKind::Chance, frame);
        self
    }

    pub fn decision(&mut self, name: &str, frame: &[&str]) -> &mut Self {
        self.declare(name, VarKind::Decision, frame);
        self
    }

    pub fn value(&mut self, name: &str) -> &mut Self {
        self.declare(name, VarKind::Value, &[]);
        self
    }

    /// Sets the graph parents of `child`, in the order given.
    pub fn parents(&mut self, child: &str, parents: &[&str]) -> &mut Self {
        match self.index.get(child) {
            Some(&id) => self.parents[id.0] = parents.iter().map(|p| p.to_string()).collect(),
            None => self.record(ModelError::UnknownVariable(child.to_string())),
        }
        self
    }

    pub fn cpt(&mut self, child: &str, parents: &[&str], rows: Vec<CptRowSpec>) -> &mut Self {
        self.cpts.push((
            child.to_string(),
            parents.iter().map(|p| p.to_string()).collect(),
            rows,
        ));
        self
    }

    pub fn value_table(
        &mut self,
        node: &str,
        parents: &[&str],
        rows: Vec<ValueRowSpec>,
    ) -> &mut Self {
        self.value_tables.push((
            node.to_string(),
            parents.iter().map(|p| p.to_string()).collect(),
            rows,
        ));
        self
    }

    pub fn framing(&mut self, decision: &str, rows: Vec<FramingRowSpec>) -> &mut Self {
        self.framings.push((decision.to_string(), rows));
        self
    }

    /// Sets the decision order; names must be declared decision variables.
    pub fn order(&mut self, decisions: &[&str]) -> &mut Self {
        self.order = decisions.iter().map(|d| d.to_string()).collect();
        self
    }

    fn record(&mut self, err: ModelError) {
        self.first_error.get_or_insert(err);
    }

    fn resolve(&self, name: &str) -> Result<VarId, ModelError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::UnknownVariable(name.to_string()))
    }

    fn resolve_pattern(
        &self,
        node: &str,
        parents: &[VarId],
        pattern: &[(String, String)],
    ) -> Result<Vec<Option<usize>>, ModelError> {
        let mut resolved = vec![None; parents.len()];
        for (var, outcome) in pattern {
            let id = self.resolve(var)?;
            let pos = parents.iter().position(|&p| p == id).ok_or_else(|| {
                ModelError::PatternVariableNotParent {
                    variable: var.clone(),
                    node: node.to_string(),
                }
            })?;
            if outcome != "*" {
                resolved[pos] = Some(self.outcome_index(id, outcome)?);
            }
        }
        Ok(resolved)
    }

    fn outcome_index(&self, var: VarId, outcome: &str) -> Result<usize, ModelError> {
        self.variables[var.0]
            .frame
            .iter()
            .position(|label| label == outcome)
            .ok_or_else(|| ModelError::UnknownOutcome {
                variable: self.variables[var.0].name.clone(),
                outcome: outcome.to_string(),
            })
    }

    /// Resolves all names and assembles the diagram.
    ///
    /// Fails on the first unresolved name, duplicate declaration, or pattern
    /// referencing a non-parent; semantic problems beyond naming are reported
    /// by [`InfluenceDiagram::validate`] instead.
    pub fn build(&mut self) -> Result<InfluenceDiagram, ModelError> {
        if let Some(err) = self.first_error.take() {
            return Err(err);
        }
        let n = self.variables.len();
        let mut parents: Vec<Vec<VarId>> = Vec::with_capacity(n);
        for list in &self.parents {
            parents.push(
                list.iter()
                    .map(|p| self.resolve(p))
                    .collect::<Result<_, _>>()?,
            );
        }

        let mut cpts: Vec<Option<Cpt>> = vec![None; n];
        for (child, parent_names, rows) in &self.cpts {
            let child_id = self.resolve(child)?;
            if cpts[child_id.0].is_some() {
                return Err(ModelError::DuplicateDeclaration {
                    kind: "cpt",
                    variable: child.clone(),
                });
            }
            let table_parents: Vec<VarId> = parent_names
                .iter()
                .map(|p| self.resolve(p))
                .collect::<Result<_, _>>()?;
            let frame_len = self.variables[child_id.0].frame.len();
            let mut resolved_rows = Vec::with_capacity(rows.len());
            for row in rows {
                let pattern = self.resolve_pattern(child, &table_parents, &row.pattern)?;
                let mut distribution = vec![0.0; frame_len];
                for (outcome, p) in &row.distribution {
                    distribution[self.outcome_index(child_id, outcome)?] = *p;
                }
                resolved_rows.push(CptRow {
                    pattern,
                    distribution,
                });
            }
            cpts[child_id.0] = Some(Cpt {
                child: child_id,
                parents: table_parents,
                rows: resolved_rows,
            });
        }

        let mut value_tables: Vec<Option<ValueTable>> = vec![None; n];
        for (node, parent_names, rows) in &self.value_tables {
            let node_id = self.resolve(node)?;
            if value_tables[node_id.0].is_some() {
                return Err(ModelError::DuplicateDeclaration {
                    kind: "valuetable",
                    variable: node.clone(),
                });
            }
            let table_parents: Vec<VarId> = parent_names
                .iter()
                .map(|p| self.resolve(p))
                .collect::<Result<_, _>>()?;
            let mut resolved_rows = Vec::with_capacity(rows.len());
            for row in rows {
                resolved_rows.push(ValueRow {
                    pattern: self.resolve_pattern(node, &table_parents, &row.pattern)?,
                    value: row.value,
                });
            }
            value_tables[node_id.0] = Some(ValueTable {
                node: node_id,
                parents: table_parents,
                rows: resolved_rows,
            });
        }

        let mut framings: Vec<Option<FramingFunction>> = vec![None; n];
        for (decision, rows) in &self.framings {
            let decision_id = self.resolve(decision)?;
            if framings[decision_id.0].is_some() {
                return Err(ModelError::DuplicateDeclaration {
                    kind: "framing",
                    variable: decision.clone(),
                });
            }
            let graph_parents = parents[decision_id.0].clone();
            let mut resolved_rows = Vec::with_capacity(rows.len());
            for row in rows {
                let allowed = row
                    .allowed
                    .iter()
                    .map(|a| self.outcome_index(decision_id, a))
                    .collect::<Result<_, _>>()?;
                resolved_rows.push(FramingRow {
                    pattern: self.resolve_pattern(decision, &graph_parents, &row.pattern)?,
                    allowed,
                });
            }
            framings[decision_id.0] = Some(FramingFunction {
                decision: decision_id,
                rows: resolved_rows,
            });
        }

        let decision_order: Vec<VarId> = self
            .order
            .iter()
            .map(|d| self.resolve(d))
            .collect::<Result<_, _>>()?;

        Ok(InfluenceDiagram::from_resolved(
            self.name.clone(),
            self.variables.clone(),
            parents,
            cpts,
            value_tables,
            framings,
            decision_order,
        ))
    }
}
