//! The policy text format.
//!
//! A policy lists one `decision <name>` block per decision; each line inside
//! a block assigns an alternative to one full information state:
//!
//! ```text
//! decision T2
//!   T1=tr, R1=zero -> diff
//!   T1=tr, R1=one -> nt [unreachable]
//! ```
//!
//! A bare `*` stands for the empty information state of a decision without
//! parents. The `[unreachable]` marker flags states the solver never visits;
//! it is preserved across a parse/write round trip.

use super::{column_at, meaningful, split_with_offsets, tokens_with_offsets, ParseError};
use crate::model::{DecisionRule, InfluenceDiagram, RuleEntry, VarKind};

/// Parses a policy document against the diagram it belongs to.
pub fn parse_policy(
    text: &str,
    diagram: &InfluenceDiagram,
) -> Result<Vec<DecisionRule>, ParseError> {
    let mut rules: Vec<DecisionRule> = Vec::new();
    let mut current: Option<usize> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let Some(content) = meaningful(raw) else {
            continue;
        };
        let tokens = tokens_with_offsets(content);

        if tokens.first().map(|&(_, t)| t) == Some("decision") && !content.contains("->") {
            let [_, (off, name)] = tokens.as_slice() else {
                return Err(ParseError::new(line_no, 1, "expected 'decision <name>'"));
            };
            let Some(id) = diagram.var_id(name) else {
                return Err(ParseError::new(
                    line_no,
                    column_at(content, *off),
                    format!("unknown variable '{name}'"),
                ));
            };
            if diagram.var(id).kind != VarKind::Decision {
                return Err(ParseError::new(
                    line_no,
                    column_at(content, *off),
                    format!("{name} is not a decision variable"),
                ));
            }
            if rules.iter().any(|r| r.decision == id) {
                return Err(ParseError::new(
                    line_no,
                    column_at(content, *off),
                    format!("duplicate block for decision {name}"),
                ));
            }
            rules.push(DecisionRule {
                decision: id,
                entries: Vec::new(),
            });
            current = Some(rules.len() - 1);
            continue;
        }

        let Some(rule_idx) = current else {
            return Err(ParseError::new(
                line_no,
                1,
                "rule line outside a decision block",
            ));
        };
        let decision = rules[rule_idx].decision;
        let parents = diagram.parents(decision).to_vec();

        let Some(arrow) = content.find("->") else {
            return Err(ParseError::new(
                line_no,
                1,
                "expected '<pattern> -> <alternative>'",
            ));
        };

        // Left side: a full assignment of the decision's parents.
        let mut state = diagram.empty_state();
        let lhs = &content[..arrow];
        let pieces = split_with_offsets(lhs, ',');
        let bare_star = pieces.len() == 1 && pieces[0].1 == "*";
        if !bare_star {
            for (off, piece) in pieces {
                let Some(eq) = piece.find('=') else {
                    return Err(ParseError::new(
                        line_no,
                        column_at(content, off),
                        format!("expected 'parent=outcome', found '{piece}'"),
                    ));
                };
                let var_name = piece[..eq].trim();
                let outcome = piece[eq + 1..].trim();
                let Some(var) = diagram.var_id(var_name) else {
                    return Err(ParseError::new(
                        line_no,
                        column_at(content, off),
                        format!("unknown variable '{var_name}'"),
                    ));
                };
                if !parents.contains(&var) {
                    return Err(ParseError::new(
                        line_no,
                        column_at(content, off),
                        format!(
                            "{var_name} is not a parent of {}",
                            diagram.var(decision).name
                        ),
                    ));
                }
                if state.is_assigned(var) {
                    return Err(ParseError::new(
                        line_no,
                        column_at(content, off),
                        format!("{var_name} assigned twice"),
                    ));
                }
                let o = diagram.outcome_index(var, outcome).map_err(|_| {
                    ParseError::new(
                        line_no,
                        column_at(content, off + eq + 1),
                        format!("unknown outcome '{outcome}' for variable {var_name}"),
                    )
                })?;
                state.set(var, o);
            }
        }
        if let Some(missing) = parents.iter().find(|&&p| !state.is_assigned(p)) {
            return Err(ParseError::new(
                line_no,
                1,
                format!(
                    "pattern does not assign {} (required for {})",
                    diagram.var(*missing).name,
                    diagram.var(decision).name
                ),
            ));
        }

        // Right side: the alternative, optionally marked unreachable.
        let rhs_off = arrow + 2;
        let rhs_tokens = tokens_with_offsets(&content[rhs_off..]);
        let (alt_off, alternative, reachable) = match rhs_tokens.as_slice() {
            [(off, alt)] => (*off, *alt, true),
            [(off, alt), (_, "[unreachable]")] => (*off, *alt, false),
            [] => {
                return Err(ParseError::new(
                    line_no,
                    column_at(content, rhs_off),
                    "expected an alternative after '->'",
                ))
            }
            [_, (off, extra), ..] => {
                return Err(ParseError::new(
                    line_no,
                    column_at(content, rhs_off + off),
                    format!("unexpected token '{extra}'"),
                ))
            }
        };
        let choice = diagram.outcome_index(decision, alternative).map_err(|_| {
            ParseError::new(
                line_no,
                column_at(content, rhs_off + alt_off),
                format!(
                    "unknown alternative '{alternative}' for decision {}",
                    diagram.var(decision).name
                ),
            )
        })?;
        rules[rule_idx].entries.push(RuleEntry {
            state,
            choice,
            reachable,
        });
    }

    Ok(rules)
}

/// Writes a policy in the canonical layout: blocks in the order given,
/// entries in their stored order, patterns in ascending variable order.
pub fn write_policy(rules: &[DecisionRule], diagram: &InfluenceDiagram) -> String {
    let mut out = String::new();
    for rule in rules {
        out.push_str(&format!("decision {}\n", diagram.var(rule.decision).name));
        for entry in &rule.entries {
            let pattern = if entry.state.is_empty() {
                "*".to_string()
            } else {
                diagram.state_label(&entry.state)
            };
            let marker = if entry.reachable {
                ""
            } else {
                " [unreachable]"
            };
            out.push_str(&format!(
                "  {} -> {}{}\n",
                pattern,
                diagram.var(rule.decision).frame[entry.choice],
                marker
            ));
        }
    }
    out
}
