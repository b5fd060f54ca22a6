//! Exact solver for asymmetric Bayesian decision problems.
//!
//! A decision problem is modeled as an influence diagram over chance,
//! decision, and value variables, extended with *framing functions* that
//! restrict which alternatives of a decision are legitimate given what is
//! known at the time the decision is made. Solving builds a decision tree
//! whose paths enumerate only the possible information states and legitimate
//! alternatives, evaluates leaves against the posterior distribution, and
//! folds expected values back to the root to obtain an optimal policy.
//!
//! The crate is organized as:
//!
//! * [`model`] — diagram representation, partial states, validation;
//! * [`inference`] — discrete factors and posterior queries over the
//!   chance variables;
//! * [`treegen`] — construction of the pruned decision tree;
//! * [`solve`] — fold-back, policy extraction, and an independent policy
//!   evaluator used as a cross-check;
//! * [`format`] — the `.id` diagram text format and the policy text format;
//! * [`cli`] — the `idsolve` command-line interface.

pub mod cli;
pub mod format;
pub mod inference;
pub mod model;
pub mod solve;
pub mod treegen;

pub use inference::{query, Factor, InferenceError, QueryResult};
pub use model::{
    DecisionRule, Diagnostic, DiagramBuilder, InfluenceDiagram, ModelError, Severity, State, VarId,
    VarKind, Variable,
};
pub use solve::{evaluate_policy, solve, Policy, Solution, SolveError};
pub use treegen::{build_tree, leaf_value, BuildOptions, DecisionTree, TreeError, TreeNode};
