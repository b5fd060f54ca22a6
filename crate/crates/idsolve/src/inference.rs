//! Discrete factors and exact posterior queries over chance variables.
//!
//! Factors are dense tables over a sorted scope of variables, with the first
//! scope variable most significant, matching the state enumeration order of
//! [`crate::model`]. Queries multiply the (evidence-reduced) CPT factors of
//! the diagram, eliminate nuisance variables greedily, and normalize; an
//! observation set with zero probability mass is reported as a distinguished
//! result rather than an error.

use thiserror::Error;

use crate::model::{InfluenceDiagram, ModelError, State, VarId, VarKind};

/// A nonnegative function over the full assignments of its scope.
///
/// The scope is sorted by [`VarId`]; `table` is indexed in enumeration order
/// (first scope variable most significant). A factor with an empty scope is a
/// scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<VarId>,
    card: Vec<usize>,
    table: Vec<f64>,
}

impl Factor {
    /// A scalar factor with the given value.
    pub fn scalar(value: f64) -> Self {
        Factor {
            scope: Vec::new(),
            card: Vec::new(),
            table: vec![value],
        }
    }

    /// Builds a factor from a sorted scope, per-variable cardinalities, and a
    /// table in enumeration order.
    pub fn new(scope: Vec<VarId>, card: Vec<usize>, table: Vec<f64>) -> Self {
        assert_eq!(
            scope.len(),
            card.len(),
            "scope and cardinality length differ"
        );
        assert!(
            scope.windows(2).all(|w| w[0] < w[1]),
            "factor scope must be sorted and duplicate-free"
        );
        let expected: usize = card.iter().product();
        assert_eq!(
            table.len(),
            expected,
            "table size does not match cardinalities"
        );
        Factor { scope, card, table }
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn is_scalar(&self) -> bool {
        self.scope.is_empty()
    }

    /// Total mass of the table.
    pub fn mass(&self) -> f64 {
        self.table.iter().sum()
    }

    /// Strides of each scope position (last position has stride 1).
    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.card.len()];
        for i in (0..self.card.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.card[i + 1];
        }
        strides
    }

    /// Value at a full configuration of the scope (one outcome index per
    /// scope variable, in scope order).
    pub fn value(&self, config: &[usize]) -> f64 {
        debug_assert_eq!(config.len(), self.scope.len());
        let strides = self.strides();
        let idx: usize = config.iter().zip(&strides).map(|(&c, &s)| c * s).sum();
        self.table[idx]
    }

    /// Value at a state that assigns every scope variable.
    pub fn value_in(&self, state: &State) -> f64 {
        let config: Vec<usize> = self
            .scope
            .iter()
            .map(|&v| state.get(v).expect("state must assign the factor scope"))
            .collect();
        self.value(&config)
    }

    /// Pointwise product; the result's scope is the union of both scopes.
    pub fn multiply(&self, other: &Factor) -> Factor {
        let mut scope: Vec<VarId> = self.scope.iter().chain(&other.scope).copied().collect();
        scope.sort_unstable();
        scope.dedup();
        let card: Vec<usize> = scope
            .iter()
            .map(|v| {
                self.scope
                    .iter()
                    .position(|s| s == v)
                    .map(|i| self.card[i])
                    .or_else(|| {
                        other
                            .scope
                            .iter()
                            .position(|s| s == v)
                            .map(|i| other.card[i])
                    })
                    .expect("variable comes from one of the operands")
            })
            .collect();

        // Per output position, the stride of each operand (zero when the
        // variable is absent from that operand).
        let self_strides = self.strides();
        let other_strides = other.strides();
        let stride_of = |operand: &Factor, strides: &[usize], v: VarId| {
            operand
                .scope
                .iter()
                .position(|s| *s == v)
                .map_or(0, |i| strides[i])
        };
        let a_stride: Vec<usize> = scope
            .iter()
            .map(|&v| stride_of(self, &self_strides, v))
            .collect();
        let b_stride: Vec<usize> = scope
            .iter()
            .map(|&v| stride_of(other, &other_strides, v))
            .collect();

        let total: usize = card.iter().product();
        let mut table = Vec::with_capacity(total);
        let mut config = vec![0usize; scope.len()];
        for _ in 0..total {
            let a: usize = config.iter().zip(&a_stride).map(|(&c, &s)| c * s).sum();
            let b: usize = config.iter().zip(&b_stride).map(|(&c, &s)| c * s).sum();
            table.push(self.table[a] * other.table[b]);
            for i in (0..config.len()).rev() {
                config[i] += 1;
                if config[i] < card[i] {
                    break;
                }
                config[i] = 0;
            }
        }
        Factor { scope, card, table }
    }

    /// Sums out `vars`; variables not in scope are ignored.
    pub fn marginalize(&self, vars: &[VarId]) -> Factor {
        let keep: Vec<usize> = (0..self.scope.len())
            .filter(|&i| !vars.contains(&self.scope[i]))
            .collect();
        if keep.len() == self.scope.len() {
            return self.clone();
        }
        let scope: Vec<VarId> = keep.iter().map(|&i| self.scope[i]).collect();
        let card: Vec<usize> = keep.iter().map(|&i| self.card[i]).collect();
        let total: usize = card.iter().product();
        let mut table = vec![0.0; total];

        let out_strides = {
            let mut strides = vec![1usize; card.len()];
            for i in (0..card.len().saturating_sub(1)).rev() {
                strides[i] = strides[i + 1] * card[i + 1];
            }
            strides
        };
        // For each source position, its stride in the output (zero when the
        // variable is summed out).
        let mut source_out_stride = vec![0usize; self.scope.len()];
        for (out_pos, &src_pos) in keep.iter().enumerate() {
            source_out_stride[src_pos] = out_strides[out_pos];
        }

        let mut config = vec![0usize; self.scope.len()];
        for &value in &self.table {
            let idx: usize = config
                .iter()
                .zip(&source_out_stride)
                .map(|(&c, &s)| c * s)
                .sum();
            table[idx] += value;
            for i in (0..config.len()).rev() {
                config[i] += 1;
                if config[i] < self.card[i] {
                    break;
                }
                config[i] = 0;
            }
        }
        Factor { scope, card, table }
    }

    /// Fixes every scope variable assigned in `evidence` and drops it from
    /// the scope, keeping only the matching slice of the table.
    pub fn reduce(&self, evidence: &State) -> Factor {
        let fixed: Vec<Option<usize>> = self.scope.iter().map(|&v| evidence.get(v)).collect();
        if fixed.iter().all(|f| f.is_none()) {
            return self.clone();
        }
        let keep: Vec<usize> = (0..self.scope.len())
            .filter(|&i| fixed[i].is_none())
            .collect();
        let scope: Vec<VarId> = keep.iter().map(|&i| self.scope[i]).collect();
        let card: Vec<usize> = keep.iter().map(|&i| self.card[i]).collect();
        let total: usize = card.iter().product();
        let src_strides = self.strides();

        let base: usize = fixed
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.map(|o| o * src_strides[i]))
            .sum();
        let mut table = Vec::with_capacity(total);
        let mut config = vec![0usize; keep.len()];
        for _ in 0..total {
            let idx: usize = config
                .iter()
                .enumerate()
                .map(|(pos, &c)| c * src_strides[keep[pos]])
                .sum();
            table.push(self.table[base + idx]);
            for i in (0..config.len()).rev() {
                config[i] += 1;
                if config[i] < card[i] {
                    break;
                }
                config[i] = 0;
            }
        }
        Factor { scope, card, table }
    }
}

/// The CPT of `chance` as a factor over the variable and its table parents.
pub fn factor_from_cpt(
    diagram: &InfluenceDiagram,
    chance: VarId,
    renormalize: bool,
) -> Result<Factor, ModelError> {
    let cpt = diagram
        .cpt(chance)
        .unwrap_or_else(|| panic!("variable {} has no cpt", diagram.var(chance).name));
    let mut scope: Vec<VarId> = cpt.parents.iter().copied().chain([chance]).collect();
    scope.sort_unstable();
    let card: Vec<usize> = scope.iter().map(|&v| diagram.frame_size(v)).collect();
    let child_pos = scope
        .iter()
        .position(|&v| v == chance)
        .expect("child in scope");

    let total: usize = card.iter().product();
    let mut table = Vec::with_capacity(total);
    let mut config = vec![0usize; scope.len()];
    let mut last_parent_config: Option<(Vec<usize>, Vec<f64>)> = None;
    for _ in 0..total {
        let parent_config: Vec<usize> = cpt
            .parents
            .iter()
            .map(|p| config[scope.iter().position(|v| v == p).expect("parent in scope")])
            .collect();
        let dist = match &last_parent_config {
            Some((cached, dist)) if *cached == parent_config => dist.clone(),
            _ => {
                let dist = cpt
                    .effective_distribution(&parent_config, renormalize)
                    .ok_or_else(|| ModelError::UnmatchedPattern {
                        kind: "cpt",
                        node: diagram.var(chance).name.clone(),
                        config: diagram_config_label(diagram, &cpt.parents, &parent_config),
                    })?;
                last_parent_config = Some((parent_config.clone(), dist.clone()));
                dist
            }
        };
        table.push(dist[config[child_pos]]);
        for i in (0..config.len()).rev() {
            config[i] += 1;
            if config[i] < card[i] {
                break;
            }
            config[i] = 0;
        }
    }
    Ok(Factor::new(scope, card, table))
}

fn diagram_config_label(diagram: &InfluenceDiagram, vars: &[VarId], config: &[usize]) -> String {
    if vars.is_empty() {
        return "∅".to_string();
    }
    vars.iter()
        .zip(config)
        .map(|(&v, &o)| format!("{}={}", diagram.var(v).name, diagram.var(v).frame[o]))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Multiplies `factors` and sums out everything not in `keep`.
///
/// Variables are eliminated one at a time, chosen greedily by the smallest
/// number of distinct neighbors among the factors that mention them, with
/// ties broken by ascending [`VarId`]. `order_hint` overrides the greedy
/// choice for the variables it lists (in the order given); any eliminable
/// variables it omits are handled greedily afterwards.
pub fn eliminate(factors: &[Factor], keep: &[VarId], order_hint: Option<&[VarId]>) -> Factor {
    let mut pool: Vec<Factor> = factors.to_vec();
    let mut to_eliminate: Vec<VarId> = pool
        .iter()
        .flat_map(|f| f.scope.iter().copied())
        .filter(|v| !keep.contains(v))
        .collect();
    to_eliminate.sort_unstable();
    to_eliminate.dedup();

    let mut hint: Vec<VarId> = order_hint
        .map(|h| {
            h.iter()
                .copied()
                .filter(|v| to_eliminate.contains(v))
                .collect()
        })
        .unwrap_or_default();
    hint.reverse(); // pop from the back

    while !to_eliminate.is_empty() {
        let var = match hint.pop() {
            Some(v) if to_eliminate.contains(&v) => v,
            Some(_) => continue,
            None => {
                // Greedy min-degree choice over the remaining variables.
                *to_eliminate
                    .iter()
                    .min_by_key(|&&v| {
                        let mut neighbors: Vec<VarId> = pool
                            .iter()
                            .filter(|f| f.scope.contains(&v))
                            .flat_map(|f| f.scope.iter().copied())
                            .filter(|&u| u != v)
                            .collect();
                        neighbors.sort_unstable();
                        neighbors.dedup();
                        (neighbors.len(), v)
                    })
                    .expect("nonempty elimination set")
            }
        };
        to_eliminate.retain(|&v| v != var);

        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            pool.into_iter().partition(|f| f.scope.contains(&var));
        let product = touching
            .into_iter()
            .reduce(|a, b| a.multiply(&b))
            .unwrap_or_else(|| Factor::scalar(1.0));
        pool = rest;
        pool.push(product.marginalize(&[var]));
    }

    pool.into_iter()
        .reduce(|a, b| a.multiply(&b))
        .unwrap_or_else(|| Factor::scalar(1.0))
}

/// Outcome of a posterior query.
#[derive(Debug, Clone, PartialEq)]
pub enum QueryResult {
    /// Joint posterior over the target variables, normalized to mass one.
    Distribution(Factor),
    /// The evidence has probability zero; no posterior exists.
    ZeroEvidence,
}

impl QueryResult {
    pub fn into_distribution(self) -> Option<Factor> {
        match self {
            QueryResult::Distribution(f) => Some(f),
            QueryResult::ZeroEvidence => None,
        }
    }

    pub fn distribution(&self) -> Option<&Factor> {
        match self {
            QueryResult::Distribution(f) => Some(f),
            QueryResult::ZeroEvidence => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    /// A decision variable influences the query but is neither clamped as
    /// evidence nor irrelevant; no distribution is defined without a policy.
    #[error("decision variable {0} is relevant to the query but not fixed as evidence")]
    UnclampedDecision(String),
    #[error("value variable {0} cannot appear in a probabilistic query")]
    ValueInQuery(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Joint posterior of `targets` given `evidence`, or [`QueryResult::ZeroEvidence`]
/// when the evidence has no probability mass.
///
/// Targets that are themselves fixed by the evidence appear in the result
/// with all mass on their observed outcome. Chance variables that are
/// irrelevant to the query — those no remaining factor depends on, found by
/// repeatedly discarding unobserved non-target leaves — are dropped before
/// elimination; decision variables that remain relevant after that must be
/// fixed by `evidence`, otherwise the query has no defined answer.
pub fn query(
    diagram: &InfluenceDiagram,
    targets: &[VarId],
    evidence: &State,
    renormalize: bool,
) -> Result<QueryResult, InferenceError> {
    for &t in targets {
        if diagram.var(t).kind == VarKind::Value {
            return Err(InferenceError::ValueInQuery(diagram.var(t).name.clone()));
        }
    }
    for (v, _) in evidence.assigned() {
        if diagram.var(v).kind == VarKind::Value {
            return Err(InferenceError::ValueInQuery(diagram.var(v).name.clone()));
        }
    }

    let chance = diagram.chance_vars();
    let mut factors: Vec<(VarId, Factor)> = Vec::with_capacity(chance.len());
    for &c in &chance {
        let factor = factor_from_cpt(diagram, c, renormalize)?.reduce(evidence);
        factors.push((c, factor));
    }

    // Iteratively drop factors of barren chance variables: unobserved
    // non-targets that no other remaining factor mentions.
    let mut alive: Vec<bool> = vec![true; factors.len()];
    loop {
        let mut changed = false;
        for i in 0..factors.len() {
            if !alive[i] {
                continue;
            }
            let (c, _) = factors[i];
            if targets.contains(&c) || evidence.is_assigned(c) {
                continue;
            }
            let mentioned_elsewhere = factors
                .iter()
                .enumerate()
                .any(|(j, (_, f))| j != i && alive[j] && f.scope().contains(&c));
            if !mentioned_elsewhere {
                alive[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let active: Vec<&Factor> = factors
        .iter()
        .zip(&alive)
        .filter(|(_, &a)| a)
        .map(|((_, f), _)| f)
        .collect();
    for f in &active {
        for &v in f.scope() {
            if diagram.var(v).kind == VarKind::Decision && !evidence.is_assigned(v) {
                return Err(InferenceError::UnclampedDecision(
                    diagram.var(v).name.clone(),
                ));
            }
        }
    }

    let keep: Vec<VarId> = {
        let mut keep: Vec<VarId> = targets
            .iter()
            .copied()
            .filter(|&t| !evidence.is_assigned(t))
            .collect();
        keep.sort_unstable();
        keep.dedup();
        keep
    };
    let owned: Vec<Factor> = active.into_iter().cloned().collect();
    let joint = eliminate(&owned, &keep, None);

    let mass = joint.mass();
    if mass == 0.0 {
        return Ok(QueryResult::ZeroEvidence);
    }
    let normalized = Factor {
        scope: joint.scope.clone(),
        card: joint.card.clone(),
        table: joint.table.iter().map(|p| p / mass).collect(),
    };

    // Fold observed targets back into the result with point mass on their
    // observed outcome.
    let mut full_targets: Vec<VarId> = targets.to_vec();
    full_targets.sort_unstable();
    full_targets.dedup();
    if full_targets == normalized.scope {
        return Ok(QueryResult::Distribution(normalized));
    }
    let card: Vec<usize> = full_targets
        .iter()
        .map(|&v| diagram.frame_size(v))
        .collect();
    let total: usize = card.iter().product();
    let mut table = Vec::with_capacity(total);
    let mut config = vec![0usize; full_targets.len()];
    for _ in 0..total {
        let matches_evidence = full_targets
            .iter()
            .zip(&config)
            .all(|(&v, &o)| evidence.get(v).is_none_or(|fixed| fixed == o));
        if matches_evidence {
            let inner: Vec<usize> = normalized
                .scope
                .iter()
                .map(|v| {
                    config[full_targets
                        .iter()
                        .position(|t| t == v)
                        .expect("kept target")]
                })
                .collect();
            table.push(normalized.value(&inner));
        } else {
            table.push(0.0);
        }
        for i in (0..config.len()).rev() {
            config[i] += 1;
            if config[i] < card[i] {
                break;
            }
            config[i] = 0;
        }
    }
    Ok(QueryResult::Distribution(Factor::new(
        full_targets,
        card,
        table,
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::used_car;
    use crate::model::InfluenceDiagram;

    fn var(d: &InfluenceDiagram, name: &str) -> VarId {
        d.var_id(name).unwrap()
    }

    fn state(d: &InfluenceDiagram, pairs: &[(&str, &str)]) -> State {
        d.state_from_pairs(pairs).unwrap()
    }

    fn assert_close(actual: &[f64], expected: &[f64], tol: f64) {
        assert_eq!(actual.len(), expected.len(), "{actual:?} vs {expected:?}");
        for (a, e) in actual.iter().zip(expected) {
            assert!((a - e).abs() <= tol, "{actual:?} vs {expected:?}");
        }
    }

    #[test]
    fn prior_cpt_becomes_its_own_factor() {
        let d = used_car();
        let f = factor_from_cpt(&d, var(&d, "CC"), true).unwrap();
        assert_eq!(f.scope(), &[var(&d, "CC")]);
        assert_eq!(f.table(), &[0.8, 0.2]);
    }

    #[test]
    fn cpt_factor_slices_recover_table_rows() {
        let d = used_car();
        let f = factor_from_cpt(&d, var(&d, "R1"), true).unwrap();
        let slice = f.reduce(&state(&d, &[("T1", "st"), ("CC", "peach")]));
        assert_eq!(slice.scope(), &[var(&d, "R1")]);
        assert_eq!(slice.table(), &[0.0, 0.9, 0.1, 0.0]);

        let f2 = factor_from_cpt(&d, var(&d, "R2"), true).unwrap();
        let slice2 = f2.reduce(&state(
            &d,
            &[("T1", "nt"), ("R1", "nr"), ("T2", "nt"), ("CC", "peach")],
        ));
        assert_eq!(slice2.scope(), &[var(&d, "R2")]);
        assert_eq!(slice2.table(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn multiplying_by_the_unit_factor_changes_nothing() {
        let d = used_car();
        let f = factor_from_cpt(&d, var(&d, "R1"), true).unwrap();
        assert_eq!(f.multiply(&Factor::scalar(1.0)), f);
        assert_eq!(Factor::scalar(1.0).multiply(&f), f);
    }

    #[test]
    fn products_combine_entries_over_the_union_scope() {
        let d = used_car();
        let prior = factor_from_cpt(&d, var(&d, "CC"), true).unwrap();
        let result = factor_from_cpt(&d, var(&d, "R1"), true).unwrap();
        let joint = prior.multiply(&result);
        assert_eq!(
            joint.scope(),
            &[var(&d, "CC"), var(&d, "T1"), var(&d, "R1")]
        );
        // (CC=lemon, T1=st, R1=one) = 0.2 · 0.6.
        assert!((joint.value(&[1, 1, 2]) - 0.12).abs() < 1e-15);
    }

    #[test]
    fn multiplying_by_zero_annihilates() {
        let d = used_car();
        let f = factor_from_cpt(&d, var(&d, "CC"), true).unwrap();
        let zeroed = f.multiply(&Factor::scalar(0.0));
        assert!(zeroed.table().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn marginalizing_a_normalized_prior_gives_mass_one() {
        let d = used_car();
        let f = factor_from_cpt(&d, var(&d, "CC"), true).unwrap();
        let total = f.marginalize(&[var(&d, "CC")]);
        assert!(total.is_scalar());
        assert!((total.table()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn marginalization_sums_over_the_eliminated_variable() {
        let d = used_car();
        let prior = factor_from_cpt(&d, var(&d, "CC"), true).unwrap();
        let result = factor_from_cpt(&d, var(&d, "R1"), true).unwrap();
        let joint = prior.multiply(&result).reduce(&state(&d, &[("T1", "st")]));
        let marginal = joint.marginalize(&[var(&d, "CC")]);
        assert_eq!(marginal.scope(), &[var(&d, "R1")]);
        // P(R1=one | T1=st) before normalization: 0.8·0.1 + 0.2·0.6.
        assert!((marginal.table()[2] - 0.20).abs() < 1e-15);
    }

    #[test]
    fn marginalizing_nothing_is_the_identity() {
        let d = used_car();
        let f = factor_from_cpt(&d, var(&d, "R2"), true).unwrap();
        assert_eq!(f.marginalize(&[]), f);
    }

    #[test]
    fn reducing_by_nothing_is_the_identity() {
        let d = used_car();
        let f = factor_from_cpt(&d, var(&d, "R1"), true).unwrap();
        assert_eq!(f.reduce(&d.empty_state()), f);
    }

    #[test]
    fn reducing_everything_leaves_a_scalar() {
        let d = used_car();
        let f = factor_from_cpt(&d, var(&d, "CC"), true).unwrap();
        let scalar = f.reduce(&state(&d, &[("CC", "lemon")]));
        assert!(scalar.is_scalar());
        assert_eq!(scalar.table(), &[0.2]);
    }

    #[test]
    fn eliminating_nothing_returns_the_factor() {
        let d = used_car();
        let f = factor_from_cpt(&d, var(&d, "R1"), true).unwrap();
        let kept = eliminate(std::slice::from_ref(&f), f.scope(), None);
        assert_eq!(kept, f);
    }

    #[test]
    fn elimination_matches_the_hand_computed_joint() {
        let d = used_car();
        let prior = factor_from_cpt(&d, var(&d, "CC"), true).unwrap();
        let result = factor_from_cpt(&d, var(&d, "R1"), true)
            .unwrap()
            .reduce(&state(&d, &[("T1", "st")]));
        let kept = eliminate(&[prior, result], &[var(&d, "R1")], None);
        assert_eq!(kept.scope(), &[var(&d, "R1")]);
        // 0.8·0.9 + 0.2·0.4 = 0.80 for zero; 0.8·0.1 + 0.2·0.6 = 0.20 for one.
        assert_close(kept.table(), &[0.0, 0.80, 0.20, 0.0], 1e-12);
    }

    #[test]
    fn eliminating_every_variable_of_a_chain_gives_total_mass() {
        let d = used_car();
        let prior = factor_from_cpt(&d, var(&d, "CC"), true).unwrap();
        let result = factor_from_cpt(&d, var(&d, "R1"), true)
            .unwrap()
            .reduce(&state(&d, &[("T1", "f&e")]));
        let total = eliminate(&[prior, result], &[], None);
        assert!(total.is_scalar());
        assert!((total.table()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn elimination_is_order_invariant() {
        let d = used_car();
        let evidence = state(&d, &[("T1", "tr"), ("T2", "diff")]);
        let factors: Vec<Factor> = ["CC", "R1", "R2"]
            .iter()
            .map(|n| {
                factor_from_cpt(&d, var(&d, n), true)
                    .unwrap()
                    .reduce(&evidence)
            })
            .collect();
        let keep = [var(&d, "R2")];
        let greedy = eliminate(&factors, &keep, None);
        let hints: [&[VarId]; 3] = [
            &[var(&d, "CC"), var(&d, "R1")],
            &[var(&d, "R1"), var(&d, "CC")],
            &[var(&d, "CC")],
        ];
        for hint in hints {
            let other = eliminate(&factors, &keep, Some(hint));
            assert_eq!(other.scope(), greedy.scope());
            for (a, b) in other.table().iter().zip(greedy.table()) {
                let scale = b.abs().max(1.0);
                assert!((a - b).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn posterior_follows_bayes_rule() {
        let d = used_car();
        let result = query(
            &d,
            &[var(&d, "CC")],
            &state(&d, &[("T1", "st"), ("R1", "one")]),
            true,
        )
        .unwrap();
        let f = result.distribution().unwrap();
        // 0.12 / (0.08 + 0.12) = 0.6 for lemon.
        assert_close(f.table(), &[0.4, 0.6], 1e-9);
    }

    #[test]
    fn impossible_outcomes_get_zero_mass() {
        let d = used_car();
        let result = query(&d, &[var(&d, "R1")], &state(&d, &[("T1", "st")]), true).unwrap();
        let f = result.distribution().unwrap();
        assert_eq!(f.value(&[3]), 0.0);
        assert_close(f.table(), &[0.0, 0.80, 0.20, 0.0], 1e-9);
    }

    #[test]
    fn deterministic_cpts_pass_through_queries() {
        let d = used_car();
        let result = query(
            &d,
            &[var(&d, "R2")],
            &state(&d, &[("T1", "nt"), ("R1", "nr"), ("T2", "nt")]),
            true,
        )
        .unwrap();
        let f = result.distribution().unwrap();
        assert_close(f.table(), &[1.0, 0.0, 0.0], 1e-9);
    }

    #[test]
    fn queries_without_evidence_return_the_prior() {
        let d = used_car();
        let result = query(&d, &[var(&d, "CC")], &d.empty_state(), true).unwrap();
        let f = result.distribution().unwrap();
        assert_close(f.table(), &[0.8, 0.2], 1e-12);
    }

    #[test]
    fn query_results_are_normalized() {
        let d = used_car();
        let result = query(
            &d,
            &[var(&d, "CC"), var(&d, "R1")],
            &state(&d, &[("T1", "f&e")]),
            true,
        )
        .unwrap();
        let f = result.distribution().unwrap();
        assert!((f.mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_probability_evidence_is_flagged_not_fatal() {
        let d = used_car();
        let result = query(
            &d,
            &[var(&d, "CC")],
            &state(&d, &[("T1", "st"), ("R1", "nr")]),
            true,
        )
        .unwrap();
        assert_eq!(result, QueryResult::ZeroEvidence);
        assert!(result.distribution().is_none());
    }

    #[test]
    fn observed_targets_collapse_to_point_mass() {
        let d = used_car();
        let result = query(
            &d,
            &[var(&d, "CC"), var(&d, "R1")],
            &state(&d, &[("T1", "st"), ("R1", "one")]),
            true,
        )
        .unwrap();
        let f = result.distribution().unwrap();
        assert_eq!(f.scope(), &[var(&d, "CC"), var(&d, "R1")]);
        // All mass sits on R1=one, split 0.4/0.6 over CC.
        assert_close(f.table(), &[0.0, 0.0, 0.4, 0.0, 0.0, 0.0, 0.6, 0.0], 1e-9);
    }

    #[test]
    fn relevant_unclamped_decisions_are_rejected() {
        let d = used_car();
        let err = query(
            &d,
            &[var(&d, "R2")],
            &state(&d, &[("T1", "tr"), ("R1", "zero")]),
            true,
        )
        .unwrap_err();
        assert_eq!(
            err.to_string(),
            "decision variable T2 is relevant to the query but not fixed as evidence"
        );
    }

    #[test]
    fn irrelevant_decisions_do_not_block_queries() {
        // R1 depends on the unclamped decision T1, but with CC as the only
        // target and no evidence R1 is discardable, and T1 with it.
        let d = used_car();
        let result = query(&d, &[var(&d, "CC")], &d.empty_state(), true).unwrap();
        assert_close(result.distribution().unwrap().table(), &[0.8, 0.2], 1e-12);
    }

    #[test]
    fn value_variables_cannot_be_queried() {
        let d = used_car();
        let err = query(&d, &[var(&d, "V")], &d.empty_state(), true).unwrap_err();
        assert_eq!(
            err.to_string(),
            "value variable V cannot appear in a probabilistic query"
        );
    }

    #[test]
    fn raw_tables_shift_the_posterior() {
        let d = used_car();
        let evidence = state(&d, &[("T1", "f&e"), ("R1", "two")]);
        // Only the lemon row gives two defects a chance, so CC is certain
        // whether or not the 0.99-mass row is rescaled.
        for renormalize in [true, false] {
            let result = query(&d, &[var(&d, "CC")], &evidence, renormalize).unwrap();
            assert_close(result.distribution().unwrap().table(), &[0.0, 1.0], 1e-12);
        }
        // The total mass of the unnormalized run reflects the raw row.
        let raw = query(&d, &[var(&d, "R1")], &state(&d, &[("T1", "f&e")]), false).unwrap();
        let f = raw.distribution().unwrap();
        assert!((f.mass() - 1.0).abs() < 1e-9);
        let expected_two = (0.2 * 0.33) / (0.8 * 1.0 + 0.2 * 0.99);
        assert!((f.value(&[3]) - expected_two).abs() < 1e-12);
    }
}
