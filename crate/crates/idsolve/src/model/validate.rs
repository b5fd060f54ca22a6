//! Structural and numeric validation of influence diagrams.

use std::fmt;

use super::{InfluenceDiagram, VarId, VarKind};

/// Row sums of a CPT may deviate from one by up to this much before the
/// deviation is reported as an error rather than a warning.
pub const DEFAULT_CPT_SUM_TOL: f64 = 0.02;

/// Row sums within this distance of one are considered exact and produce no
/// diagnostic at all.
const SUM_EXACT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Error => f.write_str("error"),
            Severity::Warning => f.write_str("warning"),
        }
    }
}

/// A single validation finding, tied to the part of the diagram it concerns.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub location: String,
    pub message: String,
}

impl Diagnostic {
    fn error(location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            location: location.into(),
            message: message.into(),
        }
    }

    fn warning(location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.severity, self.location, self.message)
    }
}

/// Returns true when no diagnostic in `diags` is an error.
pub fn no_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().all(|d| !d.is_error())
}

impl InfluenceDiagram {
    /// Checks the diagram against all structural and numeric invariants and
    /// returns the findings in a deterministic order.
    ///
    /// Errors make the diagram unusable for inference and solving; warnings
    /// (currently only mildly unnormalized CPT rows) do not.
    pub fn validate(&self) -> Vec<Diagnostic> {
        self.validate_with_tol(DEFAULT_CPT_SUM_TOL)
    }

    /// Like [`validate`](Self::validate) with an explicit bound on how far a
    /// CPT row sum may deviate from one before becoming an error.
    pub fn validate_with_tol(&self, cpt_sum_tol: f64) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        self.check_variables(&mut diags);
        self.check_tables_present(&mut diags);
        self.check_graph(&mut diags);
        self.check_order(&mut diags);
        self.check_cpts(cpt_sum_tol, &mut diags);
        self.check_value_tables(&mut diags);
        self.check_framings(&mut diags);
        diags
    }

    fn check_variables(&self, diags: &mut Vec<Diagnostic>) {
        for (id, var) in self.variables() {
            let loc = format!("variable {}", var.name);
            for (i, label) in var.frame.iter().enumerate() {
                if var.frame[..i].contains(label) {
                    diags.push(Diagnostic::error(
                        &loc,
                        format!("frame label '{label}' appears more than once"),
                    ));
                }
            }
            match var.kind {
                VarKind::Chance | VarKind::Decision if var.frame.is_empty() => {
                    diags.push(Diagnostic::error(
                        &loc,
                        format!("{} variable has no outcomes", var.kind),
                    ));
                }
                VarKind::Value if !var.frame.is_empty() => {
                    diags.push(Diagnostic::error(
                        &loc,
                        "value variable must not declare outcomes",
                    ));
                }
                _ => {}
            }
            for (i, &p) in self.parents(id).iter().enumerate() {
                if self.parents(id)[..i].contains(&p) {
                    diags.push(Diagnostic::error(
                        &loc,
                        format!("duplicate parent {}", self.var(p).name),
                    ));
                }
            }
        }
    }

    fn check_tables_present(&self, diags: &mut Vec<Diagnostic>) {
        for (id, var) in self.variables() {
            match var.kind {
                VarKind::Chance => {
                    if self.cpt(id).is_none() {
                        diags.push(Diagnostic::error(
                            format!("variable {}", var.name),
                            "chance variable has no cpt",
                        ));
                    }
                }
                VarKind::Value => {
                    if self.value_table(id).is_none() {
                        diags.push(Diagnostic::error(
                            format!("variable {}", var.name),
                            "value variable has no valuetable",
                        ));
                    }
                }
                VarKind::Decision => {}
            }
            if var.kind != VarKind::Chance && self.cpt(id).is_some() {
                diags.push(Diagnostic::error(
                    format!("cpt {}", var.name),
                    format!("cpt declared for {} variable", var.kind),
                ));
            }
            if var.kind != VarKind::Value && self.value_table(id).is_some() {
                diags.push(Diagnostic::error(
                    format!("valuetable {}", var.name),
                    format!("valuetable declared for {} variable", var.kind),
                ));
            }
            if var.kind != VarKind::Decision && self.framing(id).is_some() {
                diags.push(Diagnostic::error(
                    format!("framing {}", var.name),
                    format!("framing declared for {} variable", var.kind),
                ));
            }
        }
    }

    fn check_graph(&self, diags: &mut Vec<Diagnostic>) {
        for (id, var) in self.variables() {
            if var.kind == VarKind::Value {
                for child in self.children(id) {
                    diags.push(Diagnostic::error(
                        format!("variable {}", var.name),
                        format!(
                            "value variable has outgoing arc to {}",
                            self.var(child).name
                        ),
                    ));
                }
            }
        }

        // Kahn's algorithm; whatever cannot be topologically removed lies on
        // or downstream of a cycle.
        let n = self.num_vars();
        let mut in_degree: Vec<usize> = (0..n).map(|i| self.parents(VarId(i)).len()).collect();
        let mut removed = vec![false; n];
        loop {
            let next = (0..n).find(|&i| !removed[i] && in_degree[i] == 0);
            let Some(i) = next else { break };
            removed[i] = true;
            for child in self.children(VarId(i)) {
                in_degree[child.0] -= 1;
            }
        }
        if let Some(i) = (0..n).find(|&i| !removed[i]) {
            diags.push(Diagnostic::error(
                "graph",
                format!("cycle detected involving {}", self.var(VarId(i)).name),
            ));
        }
    }

    fn check_order(&self, diags: &mut Vec<Diagnostic>) {
        let order = self.decision_order();
        for (i, &d) in order.iter().enumerate() {
            let var = self.var(d);
            if var.kind != VarKind::Decision {
                diags.push(Diagnostic::error(
                    "order",
                    format!("{} is a {} variable, not a decision", var.name, var.kind),
                ));
            } else if order[..i].contains(&d) {
                diags.push(Diagnostic::error(
                    "order",
                    format!("decision {} appears more than once", var.name),
                ));
            }
        }
        for d in self.decision_vars() {
            if !order.contains(&d) {
                diags.push(Diagnostic::error(
                    "order",
                    format!("decision {} is missing from the order", self.var(d).name),
                ));
            }
        }

        // No-forgetting: each decision's parents must include the previous
        // decision and everything that decision could see.
        for pair in order.windows(2) {
            let (prev, next) = (pair[0], pair[1]);
            if self.var(prev).kind != VarKind::Decision || self.var(next).kind != VarKind::Decision
            {
                continue;
            }
            let next_parents = self.parents(next);
            let mut missing: Vec<&str> = Vec::new();
            for &p in self.parents(prev) {
                if !next_parents.contains(&p) {
                    missing.push(&self.var(p).name);
                }
            }
            if !next_parents.contains(&prev) {
                missing.push(&self.var(prev).name);
            }
            if !missing.is_empty() {
                diags.push(Diagnostic::error(
                    "order",
                    format!(
                        "no-forgetting violated: {} must observe {}",
                        self.var(next).name,
                        missing.join(", ")
                    ),
                ));
            }
        }
    }

    /// Enumerates outcome configurations over `vars` in table order (first
    /// variable most significant). Yields nothing if any frame is empty.
    fn table_configs(&self, vars: &[VarId]) -> Vec<Vec<usize>> {
        let sizes: Vec<usize> = vars.iter().map(|&v| self.frame_size(v)).collect();
        let total: usize = sizes.iter().product();
        let mut configs = Vec::with_capacity(total);
        let mut current = vec![0usize; vars.len()];
        for _ in 0..total {
            configs.push(current.clone());
            for i in (0..current.len()).rev() {
                current[i] += 1;
                if current[i] < sizes[i] {
                    break;
                }
                current[i] = 0;
            }
        }
        configs
    }

    fn config_label(&self, vars: &[VarId], config: &[usize]) -> String {
        if vars.is_empty() {
            return "∅".to_string();
        }
        vars.iter()
            .zip(config)
            .map(|(&v, &o)| format!("{}={}", self.var(v).name, self.var(v).frame[o]))
            .collect::<Vec<_>>()
            .join(", ")
    }

    fn parent_list(&self, vars: &[VarId]) -> String {
        vars.iter()
            .map(|&v| self.var(v).name.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    }

    fn check_cpts(&self, cpt_sum_tol: f64, diags: &mut Vec<Diagnostic>) {
        for id in self.var_ids() {
            let Some(cpt) = self.cpt(id) else { continue };
            let loc = format!("cpt {}", self.var(id).name);

            let mut table_sorted = cpt.parents.clone();
            table_sorted.sort_unstable();
            let mut graph_sorted = self.parents(id).to_vec();
            graph_sorted.sort_unstable();
            if table_sorted != graph_sorted {
                diags.push(Diagnostic::error(
                    &loc,
                    format!(
                        "table parents ({}) do not match graph parents ({})",
                        self.parent_list(&cpt.parents),
                        self.parent_list(self.parents(id))
                    ),
                ));
            }

            let frame_len = self.frame_size(id);
            let mut rows_ok = true;
            for (i, row) in cpt.rows.iter().enumerate() {
                if row.pattern.len() != cpt.parents.len() {
                    diags.push(Diagnostic::error(
                        &loc,
                        format!(
                            "row {}: pattern has {} entries for {} parents",
                            i + 1,
                            row.pattern.len(),
                            cpt.parents.len()
                        ),
                    ));
                    rows_ok = false;
                }
                if row.distribution.len() != frame_len {
                    diags.push(Diagnostic::error(
                        &loc,
                        format!(
                            "row {}: distribution has {} entries for {} outcomes",
                            i + 1,
                            row.distribution.len(),
                            frame_len
                        ),
                    ));
                    rows_ok = false;
                }
                if let Some(p) = row
                    .distribution
                    .iter()
                    .find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0)
                {
                    diags.push(Diagnostic::error(
                        &loc,
                        format!("row {}: probability {} outside [0, 1]", i + 1, p),
                    ));
                }
            }
            if !rows_ok {
                continue;
            }

            for config in self.table_configs(&cpt.parents) {
                match cpt.row_for(&config) {
                    None => {
                        diags.push(Diagnostic::error(
                            &loc,
                            format!(
                                "no row matches {}",
                                self.config_label(&cpt.parents, &config)
                            ),
                        ));
                        break;
                    }
                    Some(row) => {
                        let sum: f64 = row.distribution.iter().sum();
                        let deviation = (sum - 1.0).abs();
                        if deviation > cpt_sum_tol {
                            diags.push(Diagnostic::error(
                                &loc,
                                format!(
                                    "distribution for {} sums to {}",
                                    self.config_label(&cpt.parents, &config),
                                    sum
                                ),
                            ));
                        } else if deviation > SUM_EXACT_EPS {
                            diags.push(Diagnostic::warning(
                                &loc,
                                format!(
                                    "distribution for {} sums to {}",
                                    self.config_label(&cpt.parents, &config),
                                    sum
                                ),
                            ));
                        }
                    }
                }
            }
        }
    }

    fn check_value_tables(&self, diags: &mut Vec<Diagnostic>) {
        for id in self.var_ids() {
            let Some(table) = self.value_table(id) else {
                continue;
            };
            let loc = format!("valuetable {}", self.var(id).name);

            let mut table_sorted = table.parents.clone();
            table_sorted.sort_unstable();
            let mut graph_sorted = self.parents(id).to_vec();
            graph_sorted.sort_unstable();
            if table_sorted != graph_sorted {
                diags.push(Diagnostic::error(
                    &loc,
                    format!(
                        "table parents ({}) do not match graph parents ({})",
                        self.parent_list(&table.parents),
                        self.parent_list(self.parents(id))
                    ),
                ));
            }

            let mut rows_ok = true;
            for (i, row) in table.rows.iter().enumerate() {
                if row.pattern.len() != table.parents.len() {
                    diags.push(Diagnostic::error(
                        &loc,
                        format!(
                            "row {}: pattern has {} entries for {} parents",
                            i + 1,
                            row.pattern.len(),
                            table.parents.len()
                        ),
                    ));
                    rows_ok = false;
                }
                if !row.value.is_finite() {
                    diags.push(Diagnostic::error(
                        &loc,
                        format!("row {}: value is not finite", i + 1),
                    ));
                }
            }
            if !rows_ok {
                continue;
            }

            for config in self.table_configs(&table.parents) {
                if table.value_for(&config).is_none() {
                    diags.push(Diagnostic::error(
                        &loc,
                        format!(
                            "no row matches {}",
                            self.config_label(&table.parents, &config)
                        ),
                    ));
                    break;
                }
            }
        }
    }

    fn check_framings(&self, diags: &mut Vec<Diagnostic>) {
        for id in self.var_ids() {
            let Some(framing) = self.framing(id) else {
                continue;
            };
            if self.var(id).kind != VarKind::Decision {
                continue; // already reported as a misplaced framing
            }
            let loc = format!("framing {}", self.var(id).name);
            let parents = self.parents(id);

            let mut rows_ok = true;
            for (i, row) in framing.rows.iter().enumerate() {
                if row.pattern.len() != parents.len() {
                    diags.push(Diagnostic::error(
                        &loc,
                        format!(
                            "row {}: pattern has {} entries for {} parents",
                            i + 1,
                            row.pattern.len(),
                            parents.len()
                        ),
                    ));
                    rows_ok = false;
                }
                if row.allowed.is_empty() {
                    diags.push(Diagnostic::error(
                        &loc,
                        format!("row {}: empty set of alternatives", i + 1),
                    ));
                }
            }
            if !rows_ok {
                continue;
            }

            for config in self.table_configs(parents) {
                if framing.allowed_for(&config).is_none() {
                    diags.push(Diagnostic::error(
                        &loc,
                        format!("no row matches {}", self.config_label(parents, &config)),
                    ));
                    break;
                }
            }
        }
    }
}
