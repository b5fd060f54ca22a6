//! Construction of the asymmetric decision tree for a diagram.
//!
//! The tree alternates chance and choice levels along the decision order.
//! A chance node holds the history so far and branches over the information
//! states of the next decision, weighted by their conditional probability
//! given the history; a choice node branches over the legitimate alternatives
//! of its decision. Information states with zero (or below-threshold)
//! probability are pruned, so the tree enumerates only scenarios that can
//! actually occur. Leaves carry the posterior expected total utility of
//! their complete history.

use thiserror::Error;

use crate::inference::{query, InferenceError, QueryResult};
use crate::model::{InfluenceDiagram, ModelError, State, VarId};

/// Options controlling tree construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Drop information states whose conditional probability is at or below
    /// `prune_epsilon`.
    pub prune: bool,
    /// Restrict choice nodes to the effective frame of their decision; when
    /// false every alternative of the frame is expanded.
    pub use_framing: bool,
    /// Pruning threshold; zero prunes exactly the impossible states.
    pub prune_epsilon: f64,
    /// Renormalize CPT rows whose entries do not sum to one.
    pub renormalize: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            prune: true,
            use_framing: true,
            prune_epsilon: 0.0,
            renormalize: true,
        }
    }
}

/// An arc from a chance node to the choice node of one information state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChanceArc {
    /// Conditional probability of the information state given the history.
    pub probability: f64,
    pub child: TreeNode,
}

/// An information state dropped by pruning, kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedArc {
    pub probability: f64,
    pub state: State,
}

/// An arc from a choice node to the subtree of one alternative.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceArc {
    /// Outcome index of the alternative within the decision's frame.
    pub alternative: usize,
    pub child: TreeNode,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    /// Branches over the information states of the next decision. `state` is
    /// the history accumulated so far; arc probabilities are conditioned on
    /// it and sum to one over the kept children.
    Chance {
        state: State,
        children: Vec<ChanceArc>,
        pruned: Vec<PrunedArc>,
    },
    /// Branches over the alternatives considered for `decision` (an index
    /// into the decision order) in the information state `state`.
    Choice {
        decision: usize,
        state: State,
        children: Vec<ChoiceArc>,
    },
    /// A complete history and its posterior expected total utility.
    Leaf { state: State, value: f64 },
}

impl TreeNode {
    pub fn state(&self) -> &State {
        match self {
            TreeNode::Chance { state, .. }
            | TreeNode::Choice { state, .. }
            | TreeNode::Leaf { state, .. } => state,
        }
    }
}

/// Per-decision summary of the tree's information states.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionStats {
    pub decision: String,
    /// Information states expanded into a choice node.
    pub reachable: usize,
    /// Reachable states whose choice node offers exactly one alternative.
    pub singleton: usize,
    /// Information states dropped by pruning.
    pub pruned: usize,
    /// `reachable + pruned`.
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TreeStats {
    pub per_decision: Vec<DecisionStats>,
}

/// The constructed decision tree.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub root: TreeNode,
    stats: TreeStats,
    /// True when epsilon pruning removed information states of positive
    /// probability, making downstream values approximate.
    pub approximate: bool,
}

impl DecisionTree {
    pub fn stats(&self) -> &TreeStats {
        &self.stats
    }

    #[cfg(test)]
    pub(crate) fn synthetic(root: TreeNode) -> DecisionTree {
        DecisionTree {
            root,
            stats: TreeStats::default(),
            approximate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Model(#[from] ModelError),
    /// A leaf value was requested for a history of probability zero.
    #[error("history {0} has zero probability; its posterior value is undefined")]
    ZeroEvidenceHistory(String),
}

/// Builds the decision tree of a validated diagram.
pub fn build_tree(
    diagram: &InfluenceDiagram,
    options: &BuildOptions,
) -> Result<DecisionTree, TreeError> {
    let mut builder = Builder {
        diagram,
        options: *options,
        approximate: false,
    };
    let root = builder.expand_chance(diagram.empty_state(), 0)?;
    let stats = compute_stats(diagram, &root);
    Ok(DecisionTree {
        root,
        stats,
        approximate: builder.approximate,
    })
}

struct Builder<'a> {
    diagram: &'a InfluenceDiagram,
    options: BuildOptions,
    approximate: bool,
}

impl Builder<'_> {
    /// Expands the chance node branching over the information states of the
    /// decision at `level`, given the accumulated history.
    fn expand_chance(&mut self, history: State, level: usize) -> Result<TreeNode, TreeError> {
        let order = self.diagram.decision_order();
        if level >= order.len() {
            // No decisions at all: a single certain branch to the leaf.
            let value = match leaf_value(self.diagram, &history, self.options.renormalize) {
                Ok(v) => v,
                Err(TreeError::ZeroEvidenceHistory(_)) => 0.0,
                Err(e) => return Err(e),
            };
            return Ok(TreeNode::Chance {
                children: vec![ChanceArc {
                    probability: 1.0,
                    child: TreeNode::Leaf {
                        state: history.clone(),
                        value,
                    },
                }],
                pruned: Vec::new(),
                state: history,
            });
        }

        let decision = order[level];
        let parents = self.diagram.parents(decision).to_vec();
        debug_assert!(
            history.assigned().all(|(v, _)| parents.contains(&v)),
            "history escapes the information set of {}",
            self.diagram.var(decision).name
        );
        let free: Vec<VarId> = parents
            .iter()
            .copied()
            .filter(|&p| !history.is_assigned(p))
            .collect();

        let candidates: Vec<State> = self.diagram.extensions(&history, &parents).collect();
        let probabilities: Vec<f64> = if free.is_empty() {
            vec![1.0]
        } else {
            match query(self.diagram, &free, &history, self.options.renormalize)? {
                QueryResult::Distribution(posterior) => candidates
                    .iter()
                    .map(|candidate| posterior.value_in(candidate))
                    .collect(),
                // The history itself is impossible; no information state is
                // favored, so branch uniformly (relevant only when pruning
                // is off and this subtree carries no weight).
                QueryResult::ZeroEvidence => {
                    vec![1.0 / candidates.len() as f64; candidates.len()]
                }
            }
        };

        let mut kept: Vec<(f64, &State)> = Vec::new();
        let mut pruned: Vec<PrunedArc> = Vec::new();
        if self.options.prune {
            for (p, candidate) in probabilities.iter().zip(&candidates) {
                if *p > self.options.prune_epsilon {
                    kept.push((*p, candidate));
                } else {
                    pruned.push(PrunedArc {
                        probability: *p,
                        state: candidate.clone(),
                    });
                }
            }
            if kept.is_empty() {
                // Never prune everything: keep the most probable state so the
                // tree stays well-formed.
                let best = probabilities
                    .iter()
                    .enumerate()
                    .max_by(|(_, a), (_, b)| a.partial_cmp(b).expect("finite probabilities"))
                    .map(|(i, _)| i)
                    .expect("at least one candidate");
                kept.push((probabilities[best], &candidates[best]));
                pruned.retain(|arc| arc.state != candidates[best]);
            }
            if pruned.iter().any(|arc| arc.probability > 0.0) {
                self.approximate = true;
            }
            if self.options.prune_epsilon > 0.0 {
                let mass: f64 = kept.iter().map(|(p, _)| *p).sum();
                if mass > 0.0 {
                    for (p, _) in &mut kept {
                        *p /= mass;
                    }
                }
            }
        } else {
            kept = probabilities.iter().copied().zip(&candidates).collect();
        }

        let mut children = Vec::with_capacity(kept.len());
        for (probability, candidate) in kept {
            let child = self.expand_choice(candidate.clone(), level)?;
            children.push(ChanceArc { probability, child });
        }
        Ok(TreeNode::Chance {
            state: history,
            children,
            pruned,
        })
    }

    /// Expands the choice node for the decision at `level` in a fully
    /// assigned information state.
    fn expand_choice(&mut self, info_state: State, level: usize) -> Result<TreeNode, TreeError> {
        let order = self.diagram.decision_order();
        let decision = order[level];
        let alternatives: Vec<usize> = if self.options.use_framing {
            self.diagram.effective_frame(decision, &info_state)?
        } else {
            (0..self.diagram.frame_size(decision)).collect()
        };

        let mut children = Vec::with_capacity(alternatives.len());
        for alternative in alternatives {
            let next = info_state.extended(decision, alternative);
            let child = if level + 1 < order.len() {
                self.expand_chance(next, level + 1)?
            } else {
                let value = match leaf_value(self.diagram, &next, self.options.renormalize) {
                    Ok(v) => v,
                    // Unreachable leaves exist only in unpruned trees; they
                    // carry no weight, so give them a neutral value.
                    Err(TreeError::ZeroEvidenceHistory(_)) if !self.options.prune => 0.0,
                    Err(e) => return Err(e),
                };
                TreeNode::Leaf { state: next, value }
            };
            children.push(ChoiceArc { alternative, child });
        }
        Ok(TreeNode::Choice {
            decision: level,
            state: info_state,
            children,
        })
    }
}

/// Posterior expected total utility of a complete history: the sum over all
/// value variables of the expectation of their table under the posterior of
/// their unobserved parents given the history.
pub fn leaf_value(
    diagram: &InfluenceDiagram,
    history: &State,
    renormalize: bool,
) -> Result<f64, TreeError> {
    let mut total = 0.0;
    for v in diagram.value_vars() {
        let table = diagram
            .value_table(v)
            .unwrap_or_else(|| panic!("variable {} has no valuetable", diagram.var(v).name));
        let free: Vec<VarId> = table
            .parents
            .iter()
            .copied()
            .filter(|&p| !history.is_assigned(p))
            .collect();
        if free.is_empty() {
            let config = diagram.config_of(history, &table.parents)?;
            total += lookup_value(diagram, table, &config)?;
            continue;
        }
        let posterior = match query(diagram, &free, history, renormalize)? {
            QueryResult::Distribution(f) => f,
            QueryResult::ZeroEvidence => {
                return Err(TreeError::ZeroEvidenceHistory(diagram.state_label(history)))
            }
        };
        for assignment in diagram.extensions(history, &table.parents) {
            let weight = posterior.value_in(&assignment);
            let config = diagram.config_of(&assignment, &table.parents)?;
            total += weight * lookup_value(diagram, table, &config)?;
        }
    }
    Ok(total)
}

fn lookup_value(
    diagram: &InfluenceDiagram,
    table: &crate::model::ValueTable,
    config: &[usize],
) -> Result<f64, TreeError> {
    table.value_for(config).ok_or_else(|| {
        TreeError::Model(ModelError::UnmatchedPattern {
            kind: "valuetable",
            node: diagram.var(table.node).name.clone(),
            config: table
                .parents
                .iter()
                .zip(config)
                .map(|(&p, &o)| format!("{}={}", diagram.var(p).name, diagram.var(p).frame[o]))
                .collect::<Vec<_>>()
                .join(", "),
        })
    })
}

fn compute_stats(diagram: &InfluenceDiagram, root: &TreeNode) -> TreeStats {
    let order = diagram.decision_order();
    let mut per_decision: Vec<DecisionStats> = order
        .iter()
        .map(|&d| DecisionStats {
            decision: diagram.var(d).name.clone(),
            reachable: 0,
            singleton: 0,
            pruned: 0,
            total: 0,
        })
        .collect();
    visit(root, &mut per_decision);
    for stats in &mut per_decision {
        stats.total = stats.reachable + stats.pruned;
    }
    return TreeStats { per_decision };

    fn visit(node: &TreeNode, per_decision: &mut [DecisionStats]) {
        match node {
            TreeNode::Chance {
                children, pruned, ..
            } => {
                for arc in children {
                    visit(&arc.child, per_decision);
                }
                if let Some(TreeNode::Choice { decision, .. }) =
                    children.first().map(|arc| &arc.child)
                {
                    per_decision[*decision].pruned += pruned.len();
                } else if let Some(first) = per_decision.first_mut() {
                    first.pruned += pruned.len();
                }
            }
            TreeNode::Choice {
                decision, children, ..
            } => {
                per_decision[*decision].reachable += 1;
                if children.len() == 1 {
                    per_decision[*decision].singleton += 1;
                }
                for arc in children {
                    visit(&arc.child, per_decision);
                }
            }
            TreeNode::Leaf { .. } => {}
        }
    }
}

/// Renders the tree in Graphviz DOT format. Chance nodes are ellipses,
/// choice nodes boxes, leaves plain values; `show_pruned` additionally draws
/// pruned information states as dashed gray boxes.
pub fn to_dot(diagram: &InfluenceDiagram, tree: &DecisionTree, show_pruned: bool) -> String {
    let mut out = String::from("digraph decision_tree {\n");
    out.push_str("  rankdir=LR;\n");
    let mut counter = 0usize;
    emit(diagram, &tree.root, show_pruned, &mut counter, &mut out);
    out.push_str("}\n");
    return out;

    fn fresh(counter: &mut usize) -> String {
        let id = format!("n{counter}");
        *counter += 1;
        id
    }

    fn choice_label(diagram: &InfluenceDiagram, decision: usize, state: &State) -> String {
        let name = &diagram.var(diagram.decision_order()[decision]).name;
        if state.is_empty() {
            name.clone()
        } else {
            format!("{}: {}", name, diagram.state_label(state))
        }
    }

    fn emit(
        diagram: &InfluenceDiagram,
        node: &TreeNode,
        show_pruned: bool,
        counter: &mut usize,
        out: &mut String,
    ) -> String {
        match node {
            TreeNode::Chance {
                state,
                children,
                pruned,
            } => {
                let id = fresh(counter);
                out.push_str(&format!(
                    "  {id} [shape=ellipse, label=\"{}\"];\n",
                    escape(&diagram.state_label(state))
                ));
                for arc in children {
                    let child_id = emit(diagram, &arc.child, show_pruned, counter, out);
                    out.push_str(&format!(
                        "  {id} -> {child_id} [label=\"{:.4}\"];\n",
                        arc.probability
                    ));
                }
                if show_pruned {
                    for arc in pruned {
                        let pruned_id = fresh(counter);
                        out.push_str(&format!(
                            "  {pruned_id} [shape=box, style=\"dashed,filled\", fillcolor=gray90, label=\"{}\"];\n",
                            escape(&diagram.state_label(&arc.state))
                        ));
                        out.push_str(&format!(
                            "  {id} -> {pruned_id} [style=dashed, label=\"{:.4}\"];\n",
                            arc.probability
                        ));
                    }
                }
                id
            }
            TreeNode::Choice {
                decision,
                state,
                children,
            } => {
                let id = fresh(counter);
                out.push_str(&format!(
                    "  {id} [shape=box, label=\"{}\"];\n",
                    escape(&choice_label(diagram, *decision, state))
                ));
                let decision_var = diagram.decision_order()[*decision];
                for arc in children {
                    let child_id = emit(diagram, &arc.child, show_pruned, counter, out);
                    let alt = &diagram.var(decision_var).frame[arc.alternative];
                    out.push_str(&format!(
                        "  {id} -> {child_id} [label=\"{}\"];\n",
                        escape(alt)
                    ));
                }
                id
            }
            TreeNode::Leaf { value, .. } => {
                let id = fresh(counter);
                out.push_str(&format!(
                    "  {id} [shape=plaintext, label=\"{value:.2}\"];\n"
                ));
                id
            }
        }
    }

    fn escape(s: &str) -> String {
        s.replace('\\', "\\\\").replace('"', "\\\"")
    }
}
