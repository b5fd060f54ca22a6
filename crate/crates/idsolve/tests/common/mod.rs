//! Shared helpers for the integration suites: random diagram generators, a
//! brute-force joint-enumeration query oracle, an exhaustive policy
//! enumerator, and a capture harness for the CLI.

#![allow(dead_code)]

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use idsolve::cli;
use idsolve::format::{parse_diagram, parse_policy, write_policy};
use idsolve::model::{no_errors, DecisionRule, InfluenceDiagram, RuleEntry, State, VarId, VarKind};
use idsolve::solve::evaluate_policy;

pub const USED_CAR_TEXT: &str = include_str!("../../../../data/used-car.id");

pub fn used_car_path() -> String {
    format!("{}/../../data/used-car.id", env!("CARGO_MANIFEST_DIR"))
}

pub fn used_car() -> InfluenceDiagram {
    parse_diagram(USED_CAR_TEXT).expect("bundled diagram parses")
}

/// Runs the CLI with captured output; returns (exit code, stdout, stderr).
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let argv = std::iter::once("idsolve").chain(args.iter().copied());
    let code = cli::run(argv, &mut stdout, &mut stderr);
    (
        code,
        String::from_utf8(stdout).expect("utf-8 stdout"),
        String::from_utf8(stderr).expect("utf-8 stderr"),
    )
}

/// A fresh path in the system temp directory; the suffix keeps parallel test
/// binaries from colliding.
pub fn temp_path(label: &str) -> std::path::PathBuf {
    use std::sync::atomic::{AtomicUsize, Ordering};
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    std::env::temp_dir().join(format!("idsolve-test-{}-{n}-{label}", std::process::id()))
}

/// A random distribution over `k` outcomes: roughly a third of the entries
/// are exactly zero, at least one is positive, and the rest sum to one.
fn random_distribution(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut weights: Vec<f64> = (0..k)
        .map(|_| {
            if rng.random_bool(0.35) {
                0.0
            } else {
                rng.random_range(0.05..1.0)
            }
        })
        .collect();
    if weights.iter().all(|w| *w == 0.0) {
        weights[rng.random_range(0..k)] = 1.0;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

fn distribution_text(outcomes: &[String], dist: &[f64]) -> String {
    let mut parts = Vec::new();
    for (name, p) in outcomes.iter().zip(dist) {
        if *p > 0.0 {
            parts.push(format!("{name}={p}"));
        }
    }
    if parts.is_empty() {
        parts.push(format!("{}=0", outcomes[0]));
    }
    parts.join(" ")
}

/// Emits the cpt block for one variable: one row per parent configuration,
/// occasionally collapsing a suffix of configurations into a wildcard row.
fn cpt_block(
    rng: &mut ChaCha8Rng,
    out: &mut String,
    child: &str,
    outcomes: &[String],
    parents: &[(String, Vec<String>)],
) {
    writeln!(out, "\ncpt {child}").unwrap();
    let configs = parent_configs(parents);
    let specific = if parents.is_empty() {
        0
    } else if rng.random_bool(0.3) {
        rng.random_range(0..configs.len())
    } else {
        configs.len()
    };
    for config in configs.iter().take(specific) {
        let pattern: Vec<String> = config
            .iter()
            .zip(parents)
            .map(|(o, (p, frame))| format!("{p}={}", frame[*o]))
            .collect();
        let dist = random_distribution(rng, outcomes.len());
        writeln!(
            out,
            "  {} -> {}",
            pattern.join(", "),
            distribution_text(outcomes, &dist)
        )
        .unwrap();
    }
    if specific < configs.len() || parents.is_empty() {
        let dist = random_distribution(rng, outcomes.len());
        writeln!(out, "  * -> {}", distribution_text(outcomes, &dist)).unwrap();
    }
    writeln!(out, "end").unwrap();
}

/// All assignments of the given parent frames, first parent most significant.
fn parent_configs(parents: &[(String, Vec<String>)]) -> Vec<Vec<usize>> {
    let mut configs = vec![Vec::new()];
    for (_, frame) in parents {
        let mut next = Vec::with_capacity(configs.len() * frame.len());
        for config in &configs {
            for outcome in 0..frame.len() {
                let mut extended = config.clone();
                extended.push(outcome);
                next.push(extended);
            }
        }
        configs = next;
    }
    configs
}

/// A random chance-only diagram: up to ten variables with frames of two to
/// four outcomes, joint size capped at ten thousand.
pub fn random_bn(seed: u64) -> InfluenceDiagram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rng.random_range(2..=10usize);
    let mut frames: Vec<Vec<String>> = Vec::new();
    let mut joint = 1usize;
    for _ in 0..target {
        let k = rng.random_range(2..=4usize);
        if joint * k > 10_000 {
            break;
        }
        joint *= k;
        frames.push((0..k).map(|o| format!("o{o}")).collect());
    }
    let n = frames.len().max(2);
    while frames.len() < n {
        frames.push(vec!["o0".into(), "o1".into()]);
    }

    let mut text = format!("diagram bn{seed}\n");
    for (i, frame) in frames.iter().enumerate() {
        writeln!(text, "chance c{i} : {}", frame.join(" ")).unwrap();
    }
    let mut parent_sets: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let mut parents: Vec<usize> = (0..i).filter(|_| rng.random_bool(0.5)).collect();
        while parents.len() > 3 {
            let drop = rng.random_range(0..parents.len());
            parents.remove(drop);
        }
        if !parents.is_empty() {
            let names: Vec<String> = parents.iter().map(|p| format!("c{p}")).collect();
            writeln!(text, "parents c{i} : {}", names.join(" ")).unwrap();
        }
        parent_sets.push(parents);
    }
    for i in 0..n {
        let parents: Vec<(String, Vec<String>)> = parent_sets[i]
            .iter()
            .map(|&p| (format!("c{p}"), frames[p].clone()))
            .collect();
        cpt_block(&mut rng, &mut text, &format!("c{i}"), &frames[i], &parents);
    }

    let diagram = parse_diagram(&text).expect("generated network parses");
    let diagnostics = diagram.validate();
    assert!(
        no_errors(&diagnostics),
        "generated network must validate: {diagnostics:?}\n{text}"
    );
    diagram
}

/// A random decision diagram: one to three decisions in a fixed order, up to
/// four chance variables revealed between decisions, one value variable, and
/// random framing functions. Regenerates until the joint state space and the
/// number of enumerable policies are small enough for exhaustive checking.
pub fn random_decision_diagram(seed: u64) -> InfluenceDiagram {
    for attempt in 0..64 {
        let diagram = candidate_decision_diagram(seed.wrapping_mul(64).wrapping_add(attempt));
        let joint: usize = diagram
            .var_ids()
            .filter(|&v| diagram.var(v).kind != VarKind::Value)
            .map(|v| diagram.frame_size(v))
            .product();
        let policies = count_policies(&diagram);
        if joint <= 2_000
            && (1.0..=2_000.0).contains(&policies)
            && joint as f64 * policies <= 1_000_000.0
        {
            return diagram;
        }
    }
    panic!("no acceptable decision diagram for seed {seed}");
}

fn candidate_decision_diagram(seed: u64) -> InfluenceDiagram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d1a6);
    let nd = [1usize, 2, 2, 3, 3][rng.random_range(0..5)];
    let nc = rng.random_range(1..=4usize);
    let chance_frames: Vec<Vec<String>> = (0..nc)
        .map(|_| {
            let k = rng.random_range(2..=3usize);
            (0..k).map(|o| format!("o{o}")).collect()
        })
        .collect();
    let decision_frames: Vec<Vec<String>> = (0..nd)
        .map(|_| {
            let k = rng.random_range(2..=3usize);
            (0..k).map(|a| format!("a{a}")).collect()
        })
        .collect();
    let stage: Vec<usize> = (0..nc).map(|_| rng.random_range(0..=nd)).collect();

    // Interleaved construction order: chance variables of stage s precede
    // decision s; stage nd means never observed.
    let mut sequence: Vec<(bool, usize)> = Vec::new();
    for s in 0..=nd {
        for (c, &cs) in stage.iter().enumerate() {
            if cs == s {
                sequence.push((false, c));
            }
        }
        if s < nd {
            sequence.push((true, s));
        }
    }

    let mut text = format!("diagram dd{seed}\n");
    for (i, frame) in chance_frames.iter().enumerate() {
        writeln!(text, "chance c{i} : {}", frame.join(" ")).unwrap();
    }
    for (i, frame) in decision_frames.iter().enumerate() {
        writeln!(text, "decision d{i} : {}", frame.join(" ")).unwrap();
    }
    writeln!(text, "value u").unwrap();

    let mut chance_parents: Vec<Vec<(String, Vec<String>)>> = vec![Vec::new(); nc];
    let mut earlier: Vec<(String, Vec<String>)> = Vec::new();
    let mut observed: Vec<(String, Vec<String>)> = Vec::new();
    for &(is_decision, idx) in &sequence {
        if is_decision {
            let name = format!("d{idx}");
            if !observed.is_empty() {
                let names: Vec<&str> = observed.iter().map(|(n, _)| n.as_str()).collect();
                writeln!(text, "parents {name} : {}", names.join(" ")).unwrap();
            }
            observed.push((name.clone(), decision_frames[idx].clone()));
            earlier.push((name, decision_frames[idx].clone()));
        } else {
            let mut parents: Vec<(String, Vec<String>)> = earlier
                .iter()
                .filter(|_| rng.random_bool(0.4))
                .cloned()
                .collect();
            while parents.len() > 2 {
                let drop = rng.random_range(0..parents.len());
                parents.remove(drop);
            }
            if !parents.is_empty() {
                let names: Vec<&str> = parents.iter().map(|(n, _)| n.as_str()).collect();
                writeln!(text, "parents c{idx} : {}", names.join(" ")).unwrap();
            }
            chance_parents[idx] = parents;
            let entry = (format!("c{idx}"), chance_frames[idx].clone());
            observed.push(entry.clone());
            earlier.push(entry);
        }
    }

    let mut value_parents: Vec<(String, Vec<String>)> = earlier
        .iter()
        .filter(|_| rng.random_bool(0.5))
        .cloned()
        .collect();
    if value_parents.is_empty() {
        value_parents.push(earlier.last().expect("at least one variable").clone());
    }
    while value_parents.len() > 4 {
        let drop = rng.random_range(0..value_parents.len());
        value_parents.remove(drop);
    }
    let names: Vec<&str> = value_parents.iter().map(|(n, _)| n.as_str()).collect();
    writeln!(text, "parents u : {}", names.join(" ")).unwrap();

    let order: Vec<String> = (0..nd).map(|i| format!("d{i}")).collect();
    writeln!(text, "order : {}", order.join(" ")).unwrap();

    for i in 0..nc {
        cpt_block(
            &mut rng,
            &mut text,
            &format!("c{i}"),
            &chance_frames[i],
            &chance_parents[i],
        );
    }

    writeln!(text, "\nvaluetable u").unwrap();
    for config in parent_configs(&value_parents) {
        let pattern: Vec<String> = config
            .iter()
            .zip(&value_parents)
            .map(|(o, (p, frame))| format!("{p}={}", frame[*o]))
            .collect();
        let value = rng.random_range(-1000..=1000) as f64 / 100.0;
        writeln!(text, "  {} -> {value}", pattern.join(", ")).unwrap();
    }
    writeln!(text, "end").unwrap();

    let mut observed: Vec<(String, Vec<String>)> = Vec::new();
    for &(is_decision, idx) in &sequence {
        let (name, frame) = match is_decision {
            true => (format!("d{idx}"), decision_frames[idx].clone()),
            false => (format!("c{idx}"), chance_frames[idx].clone()),
        };
        if is_decision && rng.random_bool(0.6) {
            writeln!(text, "\nframing {name}").unwrap();
            let rows = if observed.is_empty() {
                0
            } else {
                rng.random_range(0..=2)
            };
            for _ in 0..rows {
                let mut constrained: Vec<(String, String)> = Vec::new();
                for (p, pf) in &observed {
                    if rng.random_bool(0.5) {
                        constrained.push((p.clone(), pf[rng.random_range(0..pf.len())].clone()));
                    }
                }
                if constrained.is_empty() {
                    continue;
                }
                let pattern: Vec<String> = constrained
                    .iter()
                    .map(|(p, o)| format!("{p}={o}"))
                    .collect();
                let allowed = random_subset(&mut rng, &decision_frames[idx]);
                writeln!(
                    text,
                    "  {} -> {{ {} }}",
                    pattern.join(", "),
                    allowed.join(" ")
                )
                .unwrap();
            }
            let allowed = random_subset(&mut rng, &decision_frames[idx]);
            writeln!(text, "  * -> {{ {} }}", allowed.join(" ")).unwrap();
            writeln!(text, "end").unwrap();
        }
        observed.push((name, frame));
    }

    let diagram = parse_diagram(&text).expect("generated diagram parses");
    let diagnostics = diagram.validate();
    assert!(
        no_errors(&diagnostics),
        "generated diagram must validate: {diagnostics:?}\n{text}"
    );
    diagram
}

fn random_subset(rng: &mut ChaCha8Rng, items: &[String]) -> Vec<String> {
    let mut chosen: Vec<String> = items
        .iter()
        .filter(|_| rng.random_bool(0.6))
        .cloned()
        .collect();
    if chosen.is_empty() {
        chosen.push(items[rng.random_range(0..items.len())].clone());
    }
    chosen
}

/// Posterior over `targets` given `evidence` by brute-force enumeration of
/// the full joint; keys assign target outcomes in ascending variable order.
/// `None` means the evidence has zero probability. Chance variables only.
pub fn brute_force_query(
    diagram: &InfluenceDiagram,
    targets: &[VarId],
    evidence: &State,
) -> Option<HashMap<Vec<usize>, f64>> {
    let vars: Vec<VarId> = diagram.chance_vars();
    let mut sorted_targets = targets.to_vec();
    sorted_targets.sort();

    let mut table: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut mass = 0.0;
    for config in diagram.enumerate_states(&vars) {
        if !config.consistent(evidence) {
            continue;
        }
        let mut weight = 1.0;
        for &v in &vars {
            let cpt = diagram.cpt(v).expect("chance variable has a cpt");
            let parent_config = diagram
                .config_of(&config, diagram.parents(v))
                .expect("full configuration");
            let dist = cpt
                .effective_distribution(&parent_config, true)
                .expect("cpt is total");
            weight *= dist[config.get(v).expect("full configuration")];
            if weight == 0.0 {
                break;
            }
        }
        if weight == 0.0 {
            continue;
        }
        mass += weight;
        let key: Vec<usize> = sorted_targets
            .iter()
            .map(|&t| config.get(t).expect("full configuration"))
            .collect();
        *table.entry(key).or_insert(0.0) += weight;
    }
    if mass == 0.0 {
        return None;
    }
    for value in table.values_mut() {
        *value /= mass;
    }
    Some(table)
}

/// Number of distinct policies respecting the framing functions: the product
/// over decisions and information states of the effective frame size.
pub fn count_policies(diagram: &InfluenceDiagram) -> f64 {
    let mut count = 1.0f64;
    for &d in diagram.decision_order() {
        for state in diagram.enumerate_states(diagram.parents(d)) {
            let frame = diagram
                .effective_frame(d, &state)
                .expect("framing is total");
            count *= frame.len() as f64;
            if count > 1e12 {
                return count;
            }
        }
    }
    count
}

/// Calls `check` with every policy that respects the framing functions.
pub fn for_each_policy(diagram: &InfluenceDiagram, mut check: impl FnMut(&[DecisionRule])) {
    let mut rules: Vec<DecisionRule> = Vec::new();
    // One slot per information state: the rule position it occupies and the
    // alternatives it may take.
    let mut slots: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    for (ri, &d) in diagram.decision_order().iter().enumerate() {
        let mut entries = Vec::new();
        for state in diagram.enumerate_states(diagram.parents(d)) {
            let frame = diagram
                .effective_frame(d, &state)
                .expect("framing is total");
            slots.push((ri, entries.len(), frame.clone()));
            entries.push(RuleEntry {
                state,
                choice: frame[0],
                reachable: true,
            });
        }
        rules.push(DecisionRule {
            decision: d,
            entries,
        });
    }

    let mut odometer = vec![0usize; slots.len()];
    loop {
        for (slot, &digit) in slots.iter().zip(&odometer) {
            rules[slot.0].entries[slot.1].choice = slot.2[digit];
        }
        check(&rules);
        let mut pos = slots.len();
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            odometer[pos] += 1;
            if odometer[pos] < slots[pos].2.len() {
                break;
            }
            odometer[pos] = 0;
        }
    }
}

/// The best achievable expected value over all enumerable policies.
pub fn exhaustive_best_value(diagram: &InfluenceDiagram) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for_each_policy(diagram, |rules| {
        let value = evaluate_policy(diagram, rules, true).expect("enumerated policy is complete");
        if value > best {
            best = value;
        }
    });
    best
}

/// Round-trips a policy through its text form; panics on any disagreement.
pub fn assert_policy_roundtrip(diagram: &InfluenceDiagram, rules: &[DecisionRule]) {
    let text = write_policy(rules, diagram);
    let parsed = parse_policy(&text, diagram).expect("written policy reparses");
    assert_eq!(parsed, rules, "policy text round-trip changed the rules");
}

/// Walks a built tree checking the structural guarantees: chance-arc
/// probabilities sum to one, pruning leaves no arc at or below the
/// threshold, and choice nodes branch exactly over the legitimate
/// alternatives. Returns the first violation found.
pub fn check_tree_invariants(
    diagram: &InfluenceDiagram,
    tree: &idsolve::treegen::DecisionTree,
    options: &idsolve::treegen::BuildOptions,
) -> Result<(), String> {
    use idsolve::treegen::TreeNode;

    return walk(diagram, &tree.root, options);

    fn walk(
        diagram: &InfluenceDiagram,
        node: &TreeNode,
        options: &idsolve::treegen::BuildOptions,
    ) -> Result<(), String> {
        match node {
            TreeNode::Chance {
                state, children, ..
            } => {
                let total: f64 = children.iter().map(|arc| arc.probability).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(format!(
                        "chance arcs after {} sum to {total}",
                        diagram.state_label(state)
                    ));
                }
                if options.prune {
                    for arc in children {
                        if arc.probability <= options.prune_epsilon {
                            return Err(format!(
                                "surviving arc of probability {} at threshold {} after {}",
                                arc.probability,
                                options.prune_epsilon,
                                diagram.state_label(state)
                            ));
                        }
                    }
                }
                for arc in children {
                    walk(diagram, &arc.child, options)?;
                }
                Ok(())
            }
            TreeNode::Choice {
                decision,
                state,
                children,
            } => {
                let var = diagram.decision_order()[*decision];
                let expected: Vec<usize> = if options.use_framing {
                    diagram
                        .effective_frame(var, state)
                        .map_err(|e| e.to_string())?
                } else {
                    (0..diagram.frame_size(var)).collect()
                };
                let actual: Vec<usize> = children.iter().map(|arc| arc.alternative).collect();
                if actual != expected {
                    return Err(format!(
                        "choice node {} branches over {actual:?}, expected {expected:?}",
                        diagram.state_label(state)
                    ));
                }
                for arc in children {
                    walk(diagram, &arc.child, options)?;
                }
                Ok(())
            }
            TreeNode::Leaf { .. } => Ok(()),
        }
    }
}
