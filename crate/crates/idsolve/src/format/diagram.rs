//! The `.id` diagram format.
//!
//! A document declares the diagram name, its variables, arcs, the decision
//! order, and one block per table:
//!
//! ```text
//! diagram coin-bet
//!
//! chance Coin : heads tails
//! decision Bet : yes no
//! value V
//!
//! parents V : Coin Bet
//! order : Bet
//!
//! cpt Coin
//!   * -> heads=0.5 tails=0.5
//! end
//!
//! valuetable V
//!   Coin=heads, Bet=yes -> 10
//!   Bet=yes -> -10
//!   * -> 0
//! end
//! ```
//!
//! Table rows pair a pattern with a payload. Patterns list `parent=outcome`
//! constraints (unlisted parents and `parent=*` match anything); a bare `*`
//! matches every configuration. Rows apply first-match-first. Declarations
//! must precede their use; semantic problems beyond name resolution are left
//! to [`InfluenceDiagram::validate`].

use std::collections::HashMap;

use super::{
    check_name, column_at, meaningful, split_with_offsets, tokens_with_offsets, ParseError,
};
use crate::model::{
    Cpt, CptRow, FramingFunction, FramingRow, InfluenceDiagram, ValueRow, ValueTable, VarId,
    VarKind, Variable,
};

/// Parses a `.id` document.
pub fn parse_diagram(text: &str) -> Result<InfluenceDiagram, ParseError> {
    let mut parser = Parser::default();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let Some(content) = meaningful(raw) else {
            continue;
        };
        parser.line(line_no, content)?;
    }
    parser.finish(last_line.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BlockKind {
    Cpt,
    ValueTable,
    Framing,
}

impl BlockKind {
    fn keyword(self) -> &'static str {
        match self {
            BlockKind::Cpt => "cpt",
            BlockKind::ValueTable => "valuetable",
            BlockKind::Framing => "framing",
        }
    }
}

struct Block {
    kind: BlockKind,
    owner: VarId,
    cpt_rows: Vec<CptRow>,
    value_rows: Vec<ValueRow>,
    framing_rows: Vec<FramingRow>,
}

#[derive(Default)]
struct Parser {
    name: Option<String>,
    variables: Vec<Variable>,
    index: HashMap<String, VarId>,
    parents: Vec<Vec<VarId>>,
    parents_declared: Vec<bool>,
    order: Option<Vec<VarId>>,
    cpts: Vec<Option<Cpt>>,
    value_tables: Vec<Option<ValueTable>>,
    framings: Vec<Option<FramingFunction>>,
    block: Option<Block>,
}

impl Parser {
    fn line(&mut self, line_no: usize, content: &str) -> Result<(), ParseError> {
        if self.block.is_some() {
            let trimmed = content.trim();
            if trimmed == "end" {
                self.close_block();
                return Ok(());
            }
            return self.block_row(line_no, content);
        }

        let tokens = tokens_with_offsets(content);
        let &(kw_off, keyword) = tokens.first().expect("meaningful line has a token");
        match keyword {
            "diagram" => self.diagram_decl(line_no, content, &tokens),
            "chance" => self.variable_decl(line_no, content, VarKind::Chance),
            "decision" => self.variable_decl(line_no, content, VarKind::Decision),
            "value" => self.value_decl(line_no, content, &tokens),
            "parents" => self.parents_decl(line_no, content),
            "order" => self.order_decl(line_no, content),
            "cpt" => self.open_block(line_no, content, &tokens, BlockKind::Cpt),
            "valuetable" => self.open_block(line_no, content, &tokens, BlockKind::ValueTable),
            "framing" => self.open_block(line_no, content, &tokens, BlockKind::Framing),
            "end" => Err(ParseError::new(
                line_no,
                column_at(content, kw_off),
                "'end' outside a block",
            )),
            other => Err(ParseError::new(
                line_no,
                column_at(content, kw_off),
                format!("unknown directive '{other}'"),
            )),
        }
    }

    fn diagram_decl(
        &mut self,
        line_no: usize,
        content: &str,
        tokens: &[(usize, &str)],
    ) -> Result<(), ParseError> {
        if self.name.is_some() {
            return Err(ParseError::new(line_no, 1, "duplicate diagram declaration"));
        }
        match tokens {
            [_, (off, name)] => {
                check_name(line_no, content, *off, name)?;
                self.name = Some(name.to_string());
                Ok(())
            }
            _ => Err(ParseError::new(line_no, 1, "expected 'diagram <name>'")),
        }
    }

    fn declare(
        &mut self,
        line_no: usize,
        content: &str,
        offset: usize,
        name: &str,
        kind: VarKind,
        frame: Vec<String>,
    ) -> Result<(), ParseError> {
        check_name(line_no, content, offset, name)?;
        if self.index.contains_key(name) {
            return Err(ParseError::new(
                line_no,
                column_at(content, offset),
                format!("duplicate variable '{name}'"),
            ));
        }
        self.index
            .insert(name.to_string(), VarId(self.variables.len()));
        self.variables.push(Variable {
            name: name.to_string(),
            kind,
            frame,
        });
        self.parents.push(Vec::new());
        self.parents_declared.push(false);
        self.cpts.push(None);
        self.value_tables.push(None);
        self.framings.push(None);
        Ok(())
    }

    fn variable_decl(
        &mut self,
        line_no: usize,
        content: &str,
        kind: VarKind,
    ) -> Result<(), ParseError> {
        let Some(colon) = content.find(':') else {
            return Err(ParseError::new(
                line_no,
                1,
                format!("expected '{kind} <name> : <outcome>…'"),
            ));
        };
        let head = tokens_with_offsets(&content[..colon]);
        let [_, (name_off, name)] = head.as_slice() else {
            return Err(ParseError::new(
                line_no,
                1,
                format!("expected '{kind} <name> : <outcome>…'"),
            ));
        };
        let tail = tokens_with_offsets(&content[colon + 1..]);
        if tail.is_empty() {
            return Err(ParseError::new(
                line_no,
                column_at(content, colon),
                format!("{kind} variable '{name}' declares no outcomes"),
            ));
        }
        let mut frame = Vec::with_capacity(tail.len());
        for (off, outcome) in tail {
            check_name(line_no, content, colon + 1 + off, outcome)?;
            frame.push(outcome.to_string());
        }
        self.declare(line_no, content, *name_off, name, kind, frame)
    }

    fn value_decl(
        &mut self,
        line_no: usize,
        content: &str,
        tokens: &[(usize, &str)],
    ) -> Result<(), ParseError> {
        if content.contains(':') {
            return Err(ParseError::new(
                line_no,
                column_at(content, content.find(':').unwrap()),
                "value variables declare no outcomes",
            ));
        }
        match tokens {
            [_, (off, name)] => {
                self.declare(line_no, content, *off, name, VarKind::Value, Vec::new())
            }
            _ => Err(ParseError::new(line_no, 1, "expected 'value <name>'")),
        }
    }

    fn lookup(
        &self,
        line_no: usize,
        content: &str,
        offset: usize,
        name: &str,
    ) -> Result<VarId, ParseError> {
        self.index.get(name).copied().ok_or_else(|| {
            ParseError::new(
                line_no,
                column_at(content, offset),
                format!("unknown variable '{name}'"),
            )
        })
    }

    fn outcome_index(
        &self,
        line_no: usize,
        content: &str,
        offset: usize,
        var: VarId,
        outcome: &str,
    ) -> Result<usize, ParseError> {
        self.variables[var.0]
            .frame
            .iter()
            .position(|label| label == outcome)
            .ok_or_else(|| {
                ParseError::new(
                    line_no,
                    column_at(content, offset),
                    format!(
                        "unknown outcome '{outcome}' for variable {}",
                        self.variables[var.0].name
                    ),
                )
            })
    }

    fn parents_decl(&mut self, line_no: usize, content: &str) -> Result<(), ParseError> {
        let Some(colon) = content.find(':') else {
            return Err(ParseError::new(
                line_no,
                1,
                "expected 'parents <name> : <parent>…'",
            ));
        };
        let head = tokens_with_offsets(&content[..colon]);
        let [_, (name_off, name)] = head.as_slice() else {
            return Err(ParseError::new(
                line_no,
                1,
                "expected 'parents <name> : <parent>…'",
            ));
        };
        let child = self.lookup(line_no, content, *name_off, name)?;
        if self.parents_declared[child.0] {
            return Err(ParseError::new(
                line_no,
                column_at(content, *name_off),
                format!("duplicate parents declaration for {name}"),
            ));
        }
        let mut parents = Vec::new();
        for (off, parent) in tokens_with_offsets(&content[colon + 1..]) {
            let id = self.lookup(line_no, content, colon + 1 + off, parent)?;
            parents.push(id);
        }
        if parents.is_empty() {
            return Err(ParseError::new(
                line_no,
                column_at(content, colon),
                format!("parents declaration for {name} lists no parents"),
            ));
        }
        self.parents[child.0] = parents;
        self.parents_declared[child.0] = true;
        Ok(())
    }

    fn order_decl(&mut self, line_no: usize, content: &str) -> Result<(), ParseError> {
        if self.order.is_some() {
            return Err(ParseError::new(line_no, 1, "duplicate order declaration"));
        }
        let Some(colon) = content.find(':') else {
            return Err(ParseError::new(
                line_no,
                1,
                "expected 'order : <decision>…'",
            ));
        };
        if tokens_with_offsets(&content[..colon]).len() != 1 {
            return Err(ParseError::new(
                line_no,
                1,
                "expected 'order : <decision>…'",
            ));
        }
        let mut order = Vec::new();
        for (off, name) in tokens_with_offsets(&content[colon + 1..]) {
            order.push(self.lookup(line_no, content, colon + 1 + off, name)?);
        }
        self.order = Some(order);
        Ok(())
    }

    fn open_block(
        &mut self,
        line_no: usize,
        content: &str,
        tokens: &[(usize, &str)],
        kind: BlockKind,
    ) -> Result<(), ParseError> {
        let [_, (off, name)] = tokens else {
            return Err(ParseError::new(
                line_no,
                1,
                format!("expected '{} <name>'", kind.keyword()),
            ));
        };
        let owner = self.lookup(line_no, content, *off, name)?;
        let already = match kind {
            BlockKind::Cpt => self.cpts[owner.0].is_some(),
            BlockKind::ValueTable => self.value_tables[owner.0].is_some(),
            BlockKind::Framing => self.framings[owner.0].is_some(),
        };
        if already {
            return Err(ParseError::new(
                line_no,
                column_at(content, *off),
                format!("duplicate {} declaration for {name}", kind.keyword()),
            ));
        }
        self.block = Some(Block {
            kind,
            owner,
            cpt_rows: Vec::new(),
            value_rows: Vec::new(),
            framing_rows: Vec::new(),
        });
        Ok(())
    }

    fn close_block(&mut self) {
        let block = self.block.take().expect("block to close");
        let owner = block.owner;
        match block.kind {
            BlockKind::Cpt => {
                self.cpts[owner.0] = Some(Cpt {
                    child: owner,
                    parents: self.parents[owner.0].clone(),
                    rows: block.cpt_rows,
                });
            }
            BlockKind::ValueTable => {
                self.value_tables[owner.0] = Some(ValueTable {
                    node: owner,
                    parents: self.parents[owner.0].clone(),
                    rows: block.value_rows,
                });
            }
            BlockKind::Framing => {
                self.framings[owner.0] = Some(FramingFunction {
                    decision: owner,
                    rows: block.framing_rows,
                });
            }
        }
    }

    /// Parses the pattern side of a table row into per-parent constraints.
    fn pattern(
        &self,
        line_no: usize,
        content: &str,
        lhs_end: usize,
        owner: VarId,
    ) -> Result<Vec<Option<usize>>, ParseError> {
        let parents = &self.parents[owner.0];
        let lhs = &content[..lhs_end];
        let mut slots: Vec<Option<usize>> = vec![None; parents.len()];
        let mut seen: Vec<bool> = vec![false; parents.len()];
        let pieces = split_with_offsets(lhs, ',');
        if pieces.len() == 1 && pieces[0].1 == "*" {
            return Ok(slots);
        }
        for (off, piece) in pieces {
            if piece.is_empty() {
                return Err(ParseError::new(
                    line_no,
                    column_at(content, off),
                    "empty pattern item",
                ));
            }
            let Some(eq) = piece.find('=') else {
                return Err(ParseError::new(
                    line_no,
                    column_at(content, off),
                    format!("expected 'parent=outcome', found '{piece}'"),
                ));
            };
            let var_name = piece[..eq].trim();
            let outcome = piece[eq + 1..].trim();
            let var = self.lookup(line_no, content, off, var_name)?;
            let Some(pos) = parents.iter().position(|&p| p == var) else {
                return Err(ParseError::new(
                    line_no,
                    column_at(content, off),
                    format!(
                        "{var_name} is not a parent of {}",
                        self.variables[owner.0].name
                    ),
                ));
            };
            if seen[pos] {
                return Err(ParseError::new(
                    line_no,
                    column_at(content, off),
                    format!("{var_name} constrained twice"),
                ));
            }
            seen[pos] = true;
            if outcome != "*" {
                slots[pos] =
                    Some(self.outcome_index(line_no, content, off + eq + 1, var, outcome)?);
            }
        }
        Ok(slots)
    }

    fn block_row(&mut self, line_no: usize, content: &str) -> Result<(), ParseError> {
        let (kind, owner) = {
            let block = self.block.as_ref().expect("inside a block");
            (block.kind, block.owner)
        };
        let Some(arrow) = content.find("->") else {
            return Err(ParseError::new(line_no, 1, "expected '<pattern> -> …'"));
        };
        let pattern = self.pattern(line_no, content, arrow, owner)?;
        let rhs_off = arrow + 2;
        let rhs = &content[rhs_off..];

        match kind {
            BlockKind::Cpt => {
                let frame_len = self.variables[owner.0].frame.len();
                let mut distribution = vec![0.0; frame_len];
                let mut seen = vec![false; frame_len];
                let entries = tokens_with_offsets(rhs);
                if entries.is_empty() {
                    return Err(ParseError::new(
                        line_no,
                        column_at(content, rhs_off),
                        "expected at least one 'outcome=probability'",
                    ));
                }
                for (off, entry) in entries {
                    let Some(eq) = entry.find('=') else {
                        return Err(ParseError::new(
                            line_no,
                            column_at(content, rhs_off + off),
                            format!("expected 'outcome=probability', found '{entry}'"),
                        ));
                    };
                    let outcome = &entry[..eq];
                    let idx =
                        self.outcome_index(line_no, content, rhs_off + off, owner, outcome)?;
                    if seen[idx] {
                        return Err(ParseError::new(
                            line_no,
                            column_at(content, rhs_off + off),
                            format!("outcome '{outcome}' listed twice"),
                        ));
                    }
                    seen[idx] = true;
                    distribution[idx] =
                        parse_number(line_no, content, rhs_off + off + eq + 1, &entry[eq + 1..])?;
                }
                self.block
                    .as_mut()
                    .expect("inside a block")
                    .cpt_rows
                    .push(CptRow {
                        pattern,
                        distribution,
                    });
            }
            BlockKind::ValueTable => {
                let entries = tokens_with_offsets(rhs);
                let [(off, token)] = entries.as_slice() else {
                    return Err(ParseError::new(
                        line_no,
                        column_at(content, rhs_off),
                        "expected a single value",
                    ));
                };
                let value = parse_number(line_no, content, rhs_off + off, token)?;
                self.block
                    .as_mut()
                    .expect("inside a block")
                    .value_rows
                    .push(ValueRow { pattern, value });
            }
            BlockKind::Framing => {
                let trimmed = rhs.trim();
                if !trimmed.starts_with('{') || !trimmed.ends_with('}') {
                    return Err(ParseError::new(
                        line_no,
                        column_at(content, rhs_off),
                        "expected '{ <alternative>… }'",
                    ));
                }
                let inner_start = rhs_off + rhs.find('{').expect("checked above") + 1;
                let inner_end = rhs_off + rhs.rfind('}').expect("checked above");
                let inner = &content[inner_start..inner_end];
                let mut allowed = Vec::new();
                for (off, alt) in tokens_with_offsets(inner) {
                    let idx =
                        self.outcome_index(line_no, content, inner_start + off, owner, alt)?;
                    if allowed.contains(&idx) {
                        return Err(ParseError::new(
                            line_no,
                            column_at(content, inner_start + off),
                            format!("alternative '{alt}' listed twice"),
                        ));
                    }
                    allowed.push(idx);
                }
                self.block
                    .as_mut()
                    .expect("inside a block")
                    .framing_rows
                    .push(FramingRow { pattern, allowed });
            }
        }
        Ok(())
    }

    fn finish(mut self, last_line: usize) -> Result<InfluenceDiagram, ParseError> {
        if let Some(block) = &self.block {
            return Err(ParseError::new(
                last_line,
                1,
                format!(
                    "missing 'end' for {} {}",
                    block.kind.keyword(),
                    self.variables[block.owner.0].name
                ),
            ));
        }
        let Some(name) = self.name.take() else {
            return Err(ParseError::new(1, 1, "missing diagram declaration"));
        };
        Ok(InfluenceDiagram::from_resolved(
            name,
            self.variables,
            self.parents,
            self.cpts,
            self.value_tables,
            self.framings,
            self.order.unwrap_or_default(),
        ))
    }
}

fn parse_number(
    line_no: usize,
    content: &str,
    offset: usize,
    token: &str,
) -> Result<f64, ParseError> {
    let token = token.trim();
    let value: f64 = token.parse().map_err(|_| {
        ParseError::new(
            line_no,
            column_at(content, offset),
            format!("invalid number '{token}'"),
        )
    })?;
    if !value.is_finite() {
        return Err(ParseError::new(
            line_no,
            column_at(content, offset),
            format!("non-finite number '{token}'"),
        ));
    }
    Ok(value)
}

/// Writes a diagram in the canonical `.id` layout.
pub fn write_diagram(diagram: &InfluenceDiagram) -> String {
    let mut out = String::new();
    out.push_str(&format!("diagram {}\n", diagram.name()));

    out.push('\n');
    for (_, var) in diagram.variables() {
        match var.kind {
            VarKind::Chance | VarKind::Decision => {
                out.push_str(&format!(
                    "{} {} : {}\n",
                    var.kind,
                    var.name,
                    var.frame.join(" ")
                ));
            }
            VarKind::Value => out.push_str(&format!("value {}\n", var.name)),
        }
    }

    let mut section = String::new();
    for id in diagram.var_ids() {
        let parents = diagram.parents(id);
        if !parents.is_empty() {
            let names: Vec<&str> = parents
                .iter()
                .map(|&p| diagram.var(p).name.as_str())
                .collect();
            section.push_str(&format!(
                "parents {} : {}\n",
                diagram.var(id).name,
                names.join(" ")
            ));
        }
    }
    if !diagram.decision_order().is_empty() {
        let names: Vec<&str> = diagram
            .decision_order()
            .iter()
            .map(|&d| diagram.var(d).name.as_str())
            .collect();
        section.push_str(&format!("order : {}\n", names.join(" ")));
    }
    if !section.is_empty() {
        out.push('\n');
        out.push_str(&section);
    }

    for id in diagram.var_ids() {
        if let Some(cpt) = diagram.cpt(id) {
            out.push('\n');
            out.push_str(&format!("cpt {}\n", diagram.var(id).name));
            for row in &cpt.rows {
                let dist = &row.distribution;
                let frame = &diagram.var(id).frame;
                let mut entries: Vec<String> = dist
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p != 0.0)
                    .map(|(i, p)| format!("{}={}", frame[i], p))
                    .collect();
                if entries.is_empty() && !frame.is_empty() {
                    entries.push(format!("{}=0", frame[0]));
                }
                out.push_str(&format!(
                    "  {} -> {}\n",
                    pattern_text(diagram, &cpt.parents, &row.pattern),
                    entries.join(" ")
                ));
            }
            out.push_str("end\n");
        }
    }

    for id in diagram.var_ids() {
        if let Some(table) = diagram.value_table(id) {
            out.push('\n');
            out.push_str(&format!("valuetable {}\n", diagram.var(id).name));
            for row in &table.rows {
                out.push_str(&format!(
                    "  {} -> {}\n",
                    pattern_text(diagram, &table.parents, &row.pattern),
                    row.value
                ));
            }
            out.push_str("end\n");
        }
    }

    for id in diagram.var_ids() {
        if let Some(framing) = diagram.framing(id) {
            out.push('\n');
            out.push_str(&format!("framing {}\n", diagram.var(id).name));
            let frame = &diagram.var(id).frame;
            for row in &framing.rows {
                let alts: Vec<&str> = row.allowed.iter().map(|&a| frame[a].as_str()).collect();
                out.push_str(&format!(
                    "  {} -> {{ {} }}\n",
                    pattern_text(diagram, diagram.parents(id), &row.pattern),
                    alts.join(" ")
                ));
            }
            out.push_str("end\n");
        }
    }

    out
}

fn pattern_text(
    diagram: &InfluenceDiagram,
    parents: &[VarId],
    pattern: &[Option<usize>],
) -> String {
    let parts: Vec<String> = parents
        .iter()
        .zip(pattern)
        .filter_map(|(&p, slot)| {
            slot.map(|o| format!("{}={}", diagram.var(p).name, diagram.var(p).frame[o]))
        })
        .collect();
    if parts.is_empty() {
        "*".to_string()
    } else {
        parts.join(", ")
    }
}
