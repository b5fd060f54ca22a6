//! Fold-back evaluation of decision trees and policy handling.
//!
//! [`foldback`] computes the optimal expected value of a tree by averaging
//! over chance arcs and maximizing over choice arcs, keeping only the
//! maximizing arc of every choice node. [`extract_policy`] records the
//! maximizer of every choice node as complete decision rules.
//! [`evaluate_policy`] recomputes the
//! expected value of any policy directly from the joint distribution of the
//! diagram, without factors or trees, and serves as an independent
//! cross-check of the solver.

use std::collections::HashMap;

use thiserror::Error;

use crate::model::{DecisionRule, InfluenceDiagram, ModelError, RuleEntry, State, VarId, VarKind};
use crate::treegen::{
    build_tree, BuildOptions, ChanceArc, ChoiceArc, DecisionTree, TreeError, TreeNode, TreeStats,
};

/// A complete policy: one rule per decision, in decision order, plus the
/// expected value it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub rules: Vec<DecisionRule>,
    pub value: f64,
}

/// A decision tree after fold-back: every choice node retains exactly its
/// maximizing arc.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTree {
    pub root: TreeNode,
}

/// Fold-back evaluation: expectation at chance nodes, maximum at choice
/// nodes, with ties resolved toward the earliest alternative. Returns the
/// optimal expected value and the tree restricted to maximizing arcs.
pub fn foldback(tree: &DecisionTree) -> (f64, SolutionTree) {
    let (value, root) = fold(&tree.root);
    return (value, SolutionTree { root });

    fn fold(node: &TreeNode) -> (f64, TreeNode) {
        match node {
            TreeNode::Chance {
                state,
                children,
                pruned,
            } => {
                let mut value = 0.0;
                let mut folded = Vec::with_capacity(children.len());
                for arc in children {
                    let (child_value, child) = fold(&arc.child);
                    value += arc.probability * child_value;
                    folded.push(ChanceArc {
                        probability: arc.probability,
                        child,
                    });
                }
                (
                    value,
                    TreeNode::Chance {
                        state: state.clone(),
                        children: folded,
                        pruned: pruned.clone(),
                    },
                )
            }
            TreeNode::Choice {
                decision,
                state,
                children,
            } => {
                let mut best: Option<(f64, ChoiceArc)> = None;
                for arc in children {
                    let (child_value, child) = fold(&arc.child);
                    let better = match &best {
                        None => true,
                        Some((best_value, _)) => child_value > *best_value,
                    };
                    if better {
                        best = Some((
                            child_value,
                            ChoiceArc {
                                alternative: arc.alternative,
                                child,
                            },
                        ));
                    }
                }
                let (value, arc) = best.expect("choice node has at least one alternative");
                (
                    value,
                    TreeNode::Choice {
                        decision: *decision,
                        state: state.clone(),
                        children: vec![arc],
                    },
                )
            }
            TreeNode::Leaf { state, value } => (
                *value,
                TreeNode::Leaf {
                    state: state.clone(),
                    value: *value,
                },
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    /// The policy does not assign a legitimate alternative to every
    /// information state of every decision.
    #[error("incomplete policy: {0}")]
    IncompletePolicy(String),
}

/// Turns a decision tree into complete decision rules by recording the
/// fold-back maximizer at every choice node of the tree — not only those on
/// the optimal path, so a tree with choice nodes for 8 information states
/// yields 8 reachable rule entries.
///
/// Information states with a choice node in the tree take their maximizing
/// alternative (ties toward the earliest) and are marked reachable. States
/// the tree never visits — pruned, or inconsistent with every surviving
/// history — take the first alternative of their effective frame and are
/// marked unreachable. Entries are listed in state enumeration order; the
/// policy value is the folded value of the root.
pub fn extract_policy(
    diagram: &InfluenceDiagram,
    tree: &DecisionTree,
) -> Result<Policy, SolveError> {
    let order = diagram.decision_order();
    let mut visited: Vec<HashMap<Vec<usize>, usize>> = vec![HashMap::new(); order.len()];
    let value = fold(diagram, &tree.root, &mut visited);

    let mut rules = Vec::with_capacity(order.len());
    for (level, &decision) in order.iter().enumerate() {
        let parents = diagram.parents(decision).to_vec();
        let mut entries = Vec::new();
        for state in diagram.enumerate_states(&parents) {
            let key = diagram.config_of(&state, &parents)?;
            let entry = match visited[level].get(&key) {
                Some(&choice) => RuleEntry {
                    state,
                    choice,
                    reachable: true,
                },
                None => {
                    let frame = diagram.effective_frame(decision, &state)?;
                    RuleEntry {
                        state,
                        choice: frame[0],
                        reachable: false,
                    }
                }
            };
            entries.push(entry);
        }
        rules.push(DecisionRule { decision, entries });
    }

    return Ok(Policy { rules, value });

    fn fold(
        diagram: &InfluenceDiagram,
        node: &TreeNode,
        visited: &mut [HashMap<Vec<usize>, usize>],
    ) -> f64 {
        match node {
            TreeNode::Chance { children, .. } => {
                let mut value = 0.0;
                for arc in children {
                    value += arc.probability * fold(diagram, &arc.child, visited);
                }
                value
            }
            TreeNode::Choice {
                decision,
                state,
                children,
            } => {
                let mut best: Option<(f64, usize)> = None;
                for arc in children {
                    let child_value = fold(diagram, &arc.child, visited);
                    let better = match &best {
                        None => true,
                        Some((best_value, _)) => child_value > *best_value,
                    };
                    if better {
                        best = Some((child_value, arc.alternative));
                    }
                }
                let (value, alternative) = best.expect("choice node has at least one alternative");
                let decision_var = diagram.decision_order()[*decision];
                let parents = diagram.parents(decision_var);
                let key = diagram
                    .config_of(state, parents)
                    .expect("choice node state covers the information set");
                visited[*decision].insert(key, alternative);
                value
            }
            TreeNode::Leaf { value, .. } => *value,
        }
    }
}

/// Expected value of a policy, computed directly from the joint
/// distribution: the sum over all full configurations of chance and decision
/// variables of the configuration's probability (zero unless every decision
/// matches the policy) times its total utility.
///
/// This walks the raw joint on purpose — no factors, no trees — so it can
/// serve as an oracle for the rest of the crate. The policy must assign a
/// legitimate alternative to every information state of every decision.
pub fn evaluate_policy(
    diagram: &InfluenceDiagram,
    rules: &[DecisionRule],
    renormalize: bool,
) -> Result<f64, SolveError> {
    let order = diagram.decision_order();
    let n = diagram.num_vars();

    // Per decision: its parents and a dense map from the rank of a parent
    // configuration to the chosen alternative.
    struct RuleTable {
        decision: VarId,
        parents: Vec<VarId>,
        choice_by_rank: Vec<usize>,
    }
    let mut tables: Vec<RuleTable> = Vec::with_capacity(order.len());
    for &decision in order {
        let rule = rules
            .iter()
            .find(|r| r.decision == decision)
            .ok_or_else(|| {
                SolveError::IncompletePolicy(format!(
                    "no rule for decision {}",
                    diagram.var(decision).name
                ))
            })?;
        let mut parents = diagram.parents(decision).to_vec();
        parents.sort_unstable();
        let total: usize = parents.iter().map(|&p| diagram.frame_size(p)).product();
        let mut choice_by_rank: Vec<Option<usize>> = vec![None; total];
        for entry in &rule.entries {
            if !entry.state.covers(&parents) {
                return Err(SolveError::IncompletePolicy(format!(
                    "an entry for decision {} does not assign the full information state",
                    diagram.var(decision).name
                )));
            }
            let frame = diagram.effective_frame(decision, &entry.state)?;
            if !frame.contains(&entry.choice) {
                return Err(SolveError::IncompletePolicy(format!(
                    "decision {}: alternative '{}' is not legitimate in state {}",
                    diagram.var(decision).name,
                    diagram.var(decision).frame[entry.choice],
                    diagram.state_label(&entry.state.project(&parents)),
                )));
            }
            let rank = rank_of(diagram, &parents, &entry.state);
            if let Some(previous) = choice_by_rank[rank] {
                if previous != entry.choice {
                    return Err(SolveError::IncompletePolicy(format!(
                        "decision {}: conflicting alternatives for state {}",
                        diagram.var(decision).name,
                        diagram.state_label(&entry.state.project(&parents)),
                    )));
                }
            }
            choice_by_rank[rank] = Some(entry.choice);
        }
        let choice_by_rank: Vec<usize> = choice_by_rank
            .into_iter()
            .enumerate()
            .map(|(rank, choice)| {
                choice.ok_or_else(|| {
                    SolveError::IncompletePolicy(format!(
                        "decision {}: information state {} has no alternative",
                        diagram.var(decision).name,
                        rank_label(diagram, &parents, rank),
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        tables.push(RuleTable {
            decision,
            parents,
            choice_by_rank,
        });
    }

    // Dense probability tables, one per chance variable, indexed by the rank
    // of the configuration of {variable} ∪ parents in ascending order.
    struct ChanceTable {
        family: Vec<VarId>,
        probs: Vec<f64>,
    }
    let mut chance_tables: Vec<ChanceTable> = Vec::new();
    for c in diagram.chance_vars() {
        let cpt = diagram
            .cpt(c)
            .unwrap_or_else(|| panic!("variable {} has no cpt", diagram.var(c).name));
        let mut family: Vec<VarId> = cpt.parents.iter().copied().chain([c]).collect();
        family.sort_unstable();
        let child_pos = family
            .iter()
            .position(|&v| v == c)
            .expect("child in family");
        let sizes: Vec<usize> = family.iter().map(|&v| diagram.frame_size(v)).collect();
        let total: usize = sizes.iter().product();
        let mut probs = vec![0.0; total];
        let mut config = vec![0usize; family.len()];
        for slot in probs.iter_mut() {
            let parent_config: Vec<usize> = cpt
                .parents
                .iter()
                .map(|p| {
                    config[family
                        .iter()
                        .position(|v| v == p)
                        .expect("parent in family")]
                })
                .collect();
            let dist = cpt
                .effective_distribution(&parent_config, renormalize)
                .ok_or_else(|| {
                    SolveError::Model(ModelError::UnmatchedPattern {
                        kind: "cpt",
                        node: diagram.var(c).name.clone(),
                        config: config_label(diagram, &cpt.parents, &parent_config),
                    })
                })?;
            *slot = dist[config[child_pos]];
            for i in (0..config.len()).rev() {
                config[i] += 1;
                if config[i] < sizes[i] {
                    break;
                }
                config[i] = 0;
            }
        }
        chance_tables.push(ChanceTable { family, probs });
    }

    let value_tables: Vec<&crate::model::ValueTable> = diagram
        .value_vars()
        .into_iter()
        .map(|v| {
            diagram
                .value_table(v)
                .unwrap_or_else(|| panic!("variable {} has no valuetable", diagram.var(v).name))
        })
        .collect();

    // Enumerate the joint over chance and decision variables, first variable
    // most significant, accumulating in enumeration order.
    let enumerable: Vec<VarId> = diagram
        .var_ids()
        .filter(|&v| diagram.var(v).kind != VarKind::Value)
        .collect();
    let sizes: Vec<usize> = enumerable.iter().map(|&v| diagram.frame_size(v)).collect();
    let total: usize = sizes.iter().product();
    let mut outcome_of: Vec<usize> = vec![0; n];
    let mut config = vec![0usize; enumerable.len()];
    let mut expected = 0.0;
    for _ in 0..total {
        for (i, &v) in enumerable.iter().enumerate() {
            outcome_of[v.0] = config[i];
        }

        let mut matches = true;
        for table in &tables {
            let rank = rank_of_outcomes(diagram, &table.parents, &outcome_of);
            if table.choice_by_rank[rank] != outcome_of[table.decision.0] {
                matches = false;
                break;
            }
        }
        if matches {
            let mut probability = 1.0;
            for table in &chance_tables {
                let rank = rank_of_outcomes(diagram, &table.family, &outcome_of);
                probability *= table.probs[rank];
                if probability == 0.0 {
                    break;
                }
            }
            if probability > 0.0 {
                let mut utility = 0.0;
                for table in &value_tables {
                    let table_config: Vec<usize> =
                        table.parents.iter().map(|p| outcome_of[p.0]).collect();
                    utility += table.value_for(&table_config).ok_or_else(|| {
                        SolveError::Model(ModelError::UnmatchedPattern {
                            kind: "valuetable",
                            node: diagram.var(table.node).name.clone(),
                            config: config_label(diagram, &table.parents, &table_config),
                        })
                    })?;
                }
                expected += probability * utility;
            }
        }

        for i in (0..config.len()).rev() {
            config[i] += 1;
            if config[i] < sizes[i] {
                break;
            }
            config[i] = 0;
        }
    }
    Ok(expected)
}

fn config_label(diagram: &InfluenceDiagram, vars: &[VarId], config: &[usize]) -> String {
    if vars.is_empty() {
        return "∅".to_string();
    }
    vars.iter()
        .zip(config)
        .map(|(&v, &o)| format!("{}={}", diagram.var(v).name, diagram.var(v).frame[o]))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Rank of the configuration of `vars` (sorted ascending) in a state, first
/// variable most significant.
fn rank_of(diagram: &InfluenceDiagram, vars: &[VarId], state: &State) -> usize {
    let mut rank = 0;
    for &v in vars {
        rank = rank * diagram.frame_size(v) + state.get(v).expect("state covers vars");
    }
    rank
}

fn rank_of_outcomes(diagram: &InfluenceDiagram, vars: &[VarId], outcome_of: &[usize]) -> usize {
    let mut rank = 0;
    for &v in vars {
        rank = rank * diagram.frame_size(v) + outcome_of[v.0];
    }
    rank
}

fn rank_label(diagram: &InfluenceDiagram, vars: &[VarId], rank: usize) -> String {
    let mut remaining = rank;
    let mut outcomes = vec![0usize; vars.len()];
    for i in (0..vars.len()).rev() {
        let size = diagram.frame_size(vars[i]);
        outcomes[i] = remaining % size;
        remaining /= size;
    }
    if vars.is_empty() {
        return "∅".to_string();
    }
    vars.iter()
        .zip(&outcomes)
        .map(|(&v, &o)| format!("{}={}", diagram.var(v).name, diagram.var(v).frame[o]))
        .collect::<Vec<_>>()
        .join(", ")
}

/// A solved diagram: the optimal policy, the tree it came from, and the
/// folded solution tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub policy: Policy,
    pub tree: DecisionTree,
    pub solution_tree: SolutionTree,
}

impl Solution {
    pub fn stats(&self) -> &TreeStats {
        self.tree.stats()
    }
}

/// Builds the decision tree, folds it back, and extracts the optimal policy.
pub fn solve(diagram: &InfluenceDiagram, options: &BuildOptions) -> Result<Solution, SolveError> {
    let tree = build_tree(diagram, options)?;
    let (_, solution_tree) = foldback(&tree);
    let policy = extract_policy(diagram, &tree)?;
    Ok(Solution {
        policy,
        tree,
        solution_tree,
    })
}
