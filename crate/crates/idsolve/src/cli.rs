//! The `idsolve` command-line interface.
//!
//! Exit codes: `0` success, `1` operational failure (unreadable input, parse
//! or validation errors, evaluation errors), `2` usage errors.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::format;
use crate::model::{no_errors, InfluenceDiagram};
use crate::solve::{evaluate_policy, solve, Policy};
use crate::treegen::{build_tree, to_dot, BuildOptions, TreeStats};

#[derive(Debug, Parser)]
#[command(
    name = "idsolve",
    version,
    about = "Solve asymmetric decision problems modeled as influence diagrams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a diagram and report all validation findings
    Validate {
        /// Path to the `.id` diagram
        diagram: PathBuf,
    },
    /// Compute the optimal policy and expected value
    Solve {
        /// Path to the `.id` diagram
        diagram: PathBuf,
        #[command(flatten)]
        build: BuildFlags,
        /// Emit the result as JSON
        #[arg(long)]
        json: bool,
        /// Also write the optimal policy to this file
        #[arg(long, value_name = "FILE")]
        policy_out: Option<PathBuf>,
    },
    /// Print the decision tree
    Tree {
        /// Path to the `.id` diagram
        diagram: PathBuf,
        #[command(flatten)]
        build: BuildFlags,
        /// Output format
        #[arg(long, value_parser = ["dot"], default_value = "dot")]
        format: String,
        /// Include pruned information states as dashed nodes
        #[arg(long)]
        show_pruned: bool,
    },
    /// Print per-decision counts of reachable, singleton, and pruned states
    Stats {
        /// Path to the `.id` diagram
        diagram: PathBuf,
        #[command(flatten)]
        build: BuildFlags,
    },
    /// Evaluate a policy file against the joint distribution
    Eval {
        /// Path to the `.id` diagram
        diagram: PathBuf,
        /// Path to the policy file
        #[arg(long, value_name = "FILE")]
        policy: PathBuf,
        /// Use CPT rows exactly as written instead of renormalizing them
        #[arg(long)]
        no_renormalize: bool,
    },
}

#[derive(Debug, Args)]
struct BuildFlags {
    /// Keep information states of zero (or below-threshold) probability
    #[arg(long)]
    no_prune: bool,
    /// Expand every alternative instead of only the effective frame
    #[arg(long)]
    no_framing: bool,
    /// Prune information states with probability at or below this threshold
    #[arg(long, value_name = "P", default_value_t = 0.0)]
    epsilon: f64,
    /// Use CPT rows exactly as written instead of renormalizing them
    #[arg(long)]
    no_renormalize: bool,
}

impl BuildFlags {
    fn options(&self) -> BuildOptions {
        BuildOptions {
            prune: !self.no_prune,
            use_framing: !self.no_framing,
            prune_epsilon: self.epsilon,
            renormalize: !self.no_renormalize,
        }
    }
}

/// Runs the CLI against explicit argument and output streams; returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{err}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{err}");
                    2
                }
            };
        }
    };
    match dispatch(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(code) => code,
    }
}

fn fail(stderr: &mut dyn Write, message: impl Display) -> i32 {
    let _ = writeln!(stderr, "error: {message}");
    1
}

fn load_diagram(path: &Path, stderr: &mut dyn Write) -> Result<InfluenceDiagram, i32> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(stderr, format!("cannot read {}: {e}", path.display())))?;
    let diagram = format::parse_diagram(&text)
        .map_err(|e| fail(stderr, format!("{}: {e}", path.display())))?;
    let diagnostics = diagram.validate();
    for diagnostic in &diagnostics {
        let _ = writeln!(stderr, "{diagnostic}");
    }
    if !no_errors(&diagnostics) {
        return Err(fail(
            stderr,
            format!("{}: diagram has validation errors", path.display()),
        ));
    }
    Ok(diagram)
}

fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), i32> {
    match cli.command {
        Command::Validate { diagram } => {
            let text = std::fs::read_to_string(&diagram)
                .map_err(|e| fail(stderr, format!("cannot read {}: {e}", diagram.display())))?;
            let parsed = format::parse_diagram(&text)
                .map_err(|e| fail(stderr, format!("{}: {e}", diagram.display())))?;
            let diagnostics = parsed.validate();
            if diagnostics.is_empty() {
                let _ = writeln!(stdout, "ok");
            }
            for diagnostic in &diagnostics {
                let _ = writeln!(stdout, "{diagnostic}");
            }
            if no_errors(&diagnostics) {
                Ok(())
            } else {
                Err(1)
            }
        }
        Command::Solve {
            diagram,
            build,
            json,
            policy_out,
        } => {
            let parsed = load_diagram(&diagram, stderr)?;
            let solution = solve(&parsed, &build.options()).map_err(|e| fail(stderr, e))?;
            if solution.tree.approximate {
                let _ = writeln!(
                    stderr,
                    "note: epsilon pruning dropped information states of positive probability; results are approximate"
                );
            }
            let policy_text = format::write_policy(&solution.policy.rules, &parsed);
            if let Some(path) = &policy_out {
                std::fs::write(path, &policy_text)
                    .map_err(|e| fail(stderr, format!("cannot write {}: {e}", path.display())))?;
            }
            if json {
                let value = solution_json(
                    &parsed,
                    &solution.policy,
                    solution.stats(),
                    solution.tree.approximate,
                );
                let rendered = serde_json::to_string_pretty(&value).expect("serializable");
                let _ = writeln!(stdout, "{rendered}");
            } else {
                let _ = writeln!(
                    stdout,
                    "optimal expected value: {:.9}",
                    solution.policy.value
                );
                for line in stats_lines(solution.stats()) {
                    let _ = writeln!(stdout, "{line}");
                }
                let _ = writeln!(stdout, "policy:");
                let _ = write!(stdout, "{policy_text}");
            }
            Ok(())
        }
        Command::Tree {
            diagram,
            build,
            format: _,
            show_pruned,
        } => {
            let parsed = load_diagram(&diagram, stderr)?;
            let tree = build_tree(&parsed, &build.options()).map_err(|e| fail(stderr, e))?;
            let _ = write!(stdout, "{}", to_dot(&parsed, &tree, show_pruned));
            Ok(())
        }
        Command::Stats { diagram, build } => {
            let parsed = load_diagram(&diagram, stderr)?;
            let tree = build_tree(&parsed, &build.options()).map_err(|e| fail(stderr, e))?;
            for line in stats_lines(tree.stats()) {
                let _ = writeln!(stdout, "{line}");
            }
            Ok(())
        }
        Command::Eval {
            diagram,
            policy,
            no_renormalize,
        } => {
            let parsed = load_diagram(&diagram, stderr)?;
            let text = std::fs::read_to_string(&policy)
                .map_err(|e| fail(stderr, format!("cannot read {}: {e}", policy.display())))?;
            let rules = format::parse_policy(&text, &parsed)
                .map_err(|e| fail(stderr, format!("{}: {e}", policy.display())))?;
            let value =
                evaluate_policy(&parsed, &rules, !no_renormalize).map_err(|e| fail(stderr, e))?;
            let _ = writeln!(stdout, "expected value: {value:.9}");
            Ok(())
        }
    }
}

fn stats_lines(stats: &TreeStats) -> Vec<String> {
    stats
        .per_decision
        .iter()
        .map(|d| {
            format!(
                "decision={} reachable={} singleton={} pruned={} total={}",
                d.decision, d.reachable, d.singleton, d.pruned, d.total
            )
        })
        .collect()
}

fn solution_json(
    diagram: &InfluenceDiagram,
    policy: &Policy,
    stats: &TreeStats,
    approximate: bool,
) -> Value {
    let rules: Vec<Value> = policy
        .rules
        .iter()
        .map(|rule| {
            let entries: Vec<Value> = rule
                .entries
                .iter()
                .map(|entry| {
                    let state = if entry.state.is_empty() {
                        "*".to_string()
                    } else {
                        diagram.state_label(&entry.state)
                    };
                    json!({
                        "state": state,
                        "choice": diagram.var(rule.decision).frame[entry.choice],
                        "reachable": entry.reachable,
                    })
                })
                .collect();
            json!({
                "decision": diagram.var(rule.decision).name,
                "rules": entries,
            })
        })
        .collect();
    let stats: Vec<Value> = stats
        .per_decision
        .iter()
        .map(|d| {
            json!({
                "decision": d.decision,
                "reachable": d.reachable,
                "singleton": d.singleton,
                "pruned": d.pruned,
                "total": d.total,
            })
        })
        .collect();
    json!({
        "diagram": diagram.name(),
        "optimal_value": policy.value,
        "approximate": approximate,
        "policy": rules,
        "stats": stats,
    })
}
