//! Seeded random diagrams and queries for property tests and the CLI.
//!
//! Diagrams are grown layer by layer. Layer `i` holds the random and value
//! nodes created after decision `d_i` (layer 0 precedes `d_1`); their parents
//! come from the same layer, `d_i` and `π_{d_i}`. That keeps every layer
//! behind its frontier, so the result is stepwise-decomposable and smooth.
//! With `leak > 0` a node may also reach back one layer past the frontier,
//! which is how non-smooth (and occasionally non-decomposable) diagrams
//! arise; callers filter with the graph predicates.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagram::{DiagramBuilder, InfluenceDiagram};
use crate::graph;
use crate::oracle;
use crate::transform;
use crate::vpi::{self, VpiQuery};

/// A random point of the probability simplex over `card` outcomes.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, card: usize) -> Vec<f64> {
    let weights: Vec<f64> = (0..card).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// Size bounds for generated diagrams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub max_decisions: usize,
    pub max_random: usize,
    pub max_card: usize,
    /// Bound on `policies × |Ω_random|`, the brute-force oracle's work.
    pub budget: u128,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_decisions: 4,
            max_random: 8,
            max_card: 3,
            budget: 2_000_000,
        }
    }
}

/// Work the brute-force oracle does on `diagram`: policies times joint
/// configurations of the random nodes.
pub fn oracle_work(diagram: &InfluenceDiagram) -> u128 {
    let joint: u128 = diagram
        .random_nodes()
        .iter()
        .map(|&v| diagram.card(v) as u128)
        .product();
    oracle::policy_count(diagram).saturating_mul(joint)
}

#[derive(Clone)]
struct Draft {
    id: String,
    card: usize,
    parents: Vec<usize>,
}

fn frame(card: usize) -> Vec<String> {
    (0..card).map(|i| format!("s{i}")).collect()
}

fn pick<R: Rng + ?Sized>(rng: &mut R, pool: &[usize], p: f64, max: usize) -> Vec<usize> {
    let mut out: Vec<usize> = pool.iter().copied().filter(|_| rng.gen_bool(p)).collect();
    out.shuffle(rng);
    out.truncate(max);
    out.sort_unstable();
    out
}

/// One layered diagram; `leak` is the chance that a node also draws a parent
/// from the previous layer's non-frontier nodes.
fn layered<R: Rng + ?Sized>(rng: &mut R, limits: &Limits, leak: f64) -> InfluenceDiagram {
    let k = rng.gen_range(1..=limits.max_decisions);
    let n = rng.gen_range(k.min(limits.max_random)..=limits.max_random);
    // random nodes per layer 0..=k
    let mut per_layer = vec![0; k + 1];
    for _ in 0..n {
        per_layer[rng.gen_range(0..=k)] += 1;
    }

    // nodes in creation order; kinds tracked separately
    let mut randoms: Vec<Draft> = Vec::new();
    let mut decisions: Vec<Draft> = Vec::new();
    let mut values: Vec<Draft> = Vec::new();
    let mut order: Vec<(char, usize)> = Vec::new();
    let mut next = 0usize;
    let mut frontier: Vec<usize> = Vec::new();
    let mut previous_layer: Vec<usize> = Vec::new();
    let mut prev_decision: Option<usize> = None;

    for (layer, &count) in per_layer.iter().enumerate() {
        let mut pool: Vec<usize> = frontier.clone();
        pool.extend(prev_decision);
        let leaky: Vec<usize> = previous_layer
            .iter()
            .copied()
            .filter(|v| !frontier.contains(v))
            .collect();
        let mut members = Vec::new();
        for j in 0..count {
            let mut parents = pick(rng, &pool, 0.4, 3);
            if rng.gen_bool(leak) {
                if let Some(&x) = leaky.choose(rng) {
                    parents.push(x);
                    parents.sort_unstable();
                    parents.dedup();
                }
            }
            let id = next;
            next += 1;
            randoms.push(Draft {
                id: format!("x{layer}{}", (b'a' + j as u8) as char),
                card: rng.gen_range(2..=limits.max_card),
                parents,
            });
            order.push(('r', randoms.len() - 1));
            pool.push(id);
            members.push(id);
        }
        let value_count = rng.gen_range(1..=2);
        for j in 0..value_count {
            if pool.is_empty() {
                continue;
            }
            let mut parents = pick(rng, &pool, 0.5, 3);
            if parents.is_empty() {
                parents.push(*pool.choose(rng).expect("pool is not empty"));
            }
            next += 1;
            values.push(Draft {
                id: format!("u{layer}{}", (b'a' + j as u8) as char),
                card: 1,
                parents,
            });
            order.push(('v', values.len() - 1));
        }
        if layer == k {
            break;
        }
        // the next decision observes part of the pool and is reachable from
        // the previous one
        let mut parents = pick(rng, &pool, 0.5, 2);
        if let Some(d) = prev_decision {
            let reachable: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&m| randoms_parent_chain(&randoms, &order, m, d))
                .collect();
            if !parents.iter().any(|p| *p == d || reachable.contains(p)) {
                match reachable.choose(rng) {
                    Some(&r) if rng.gen_bool(0.5) => parents.push(r),
                    _ => parents.push(d),
                }
                parents.sort_unstable();
                parents.dedup();
            }
        }
        let id = next;
        next += 1;
        decisions.push(Draft {
            id: format!("d{}", layer + 1),
            card: rng.gen_range(2..=limits.max_card),
            parents: parents.clone(),
        });
        order.push(('d', decisions.len() - 1));
        frontier = parents;
        previous_layer = members;
        prev_decision = Some(id);
    }

    build(rng, &randoms, &decisions, &values, &order)
}

/// Whether random node `m` has a directed path from node `d` (both are
/// creation indices).
fn randoms_parent_chain(randoms: &[Draft], order: &[(char, usize)], m: usize, d: usize) -> bool {
    let parents_of = |v: usize| -> Vec<usize> {
        match order[v] {
            ('r', i) => randoms[i].parents.clone(),
            _ => Vec::new(),
        }
    };
    let mut stack = vec![m];
    let mut seen = vec![false; order.len()];
    while let Some(v) = stack.pop() {
        for p in parents_of(v) {
            if p == d {
                return true;
            }
            if !seen[p] {
                seen[p] = true;
                stack.push(p);
            }
        }
    }
    false
}

fn build<R: Rng + ?Sized>(
    rng: &mut R,
    randoms: &[Draft],
    decisions: &[Draft],
    values: &[Draft],
    order: &[(char, usize)],
) -> InfluenceDiagram {
    let draft = |&(kind, i): &(char, usize)| -> &Draft {
        match kind {
            'r' => &randoms[i],
            'd' => &decisions[i],
            _ => &values[i],
        }
    };
    let drafts: Vec<&Draft> = order.iter().map(draft).collect();
    let mut b = DiagramBuilder::new();
    for (&(kind, _), d) in order.iter().zip(&drafts) {
        let parent_ids: Vec<&str> = d.parents.iter().map(|&p| drafts[p].id.as_str()).collect();
        let rows: usize = d.parents.iter().map(|&p| drafts[p].card).product();
        b = match kind {
            'r' => {
                let table: Vec<f64> = (0..rows).flat_map(|_| random_distribution(rng, d.card)).collect();
                b.random(&d.id, &frame(d.card), &parent_ids, &table)
            }
            'd' => b.decision(&d.id, &frame(d.card), &parent_ids),
            _ => {
                let table: Vec<f64> = (0..rows)
                    .map(|_| (rng.gen_range(-10.0..10.0_f64) * 4.0).round() / 4.0)
                    .collect();
                b.value(&d.id, &parent_ids, &table)
            }
        };
    }
    b.build().expect("generated diagrams are well formed")
}

fn sample<F: Fn(&InfluenceDiagram) -> bool>(seed: u64, limits: &Limits, leak: f64, accept: F) -> InfluenceDiagram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let d = layered(&mut rng, limits, leak);
        if oracle_work(&d) <= limits.budget && accept(&d) {
            return d;
        }
    }
}

fn is_sdid(d: &InfluenceDiagram) -> bool {
    graph::is_stepwise_decomposable(d).unwrap_or(false)
}

fn is_smooth(d: &InfluenceDiagram) -> bool {
    graph::is_smooth(d).unwrap_or(false)
}

/// A smooth regular SDID within `limits`, determined by `seed`.
pub fn smooth_sdid(seed: u64, limits: &Limits) -> InfluenceDiagram {
    sample(seed, limits, 0.0, |d| is_sdid(d) && is_smooth(d))
}

/// A regular SDID that is not smooth but can be smoothed by arc reversal,
/// determined by `seed`. (An offending arc into a decision cannot be
/// reversed; such diagrams are skipped.)
pub fn non_smooth_sdid(seed: u64, limits: &Limits) -> InfluenceDiagram {
    sample(seed, limits, 0.6, |d| {
        is_sdid(d) && !is_smooth(d) && transform::smooth(d).is_ok_and(|s| oracle_work(&s) <= limits.budget)
    })
}

/// Every well-formed query on `diagram` whose full modified diagram stays
/// within the oracle budget, in node order.
pub fn queries(diagram: &InfluenceDiagram, limits: &Limits) -> Vec<VpiQuery> {
    let mut out = Vec::new();
    for c in diagram.random_nodes() {
        for d in diagram.decision_nodes() {
            let q = VpiQuery::new(diagram.id(c), diagram.id(d));
            if let Ok(m) = vpi::full_modified(diagram, &q) {
                if oracle_work(&m) <= limits.budget {
                    out.push(q);
                }
            }
        }
    }
    out
}

/// A random diagram of `n` random nodes with arcs drawn with probability
/// `p` along a random order; for graph-separation checks.
pub fn random_network(seed: u64, n: usize, p: f64) -> InfluenceDiagram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut b = DiagramBuilder::new();
    let ids: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
    // declare in topological order so the builder sees parents first
    for (pos, &v) in order.iter().enumerate() {
        let mut parents: Vec<usize> = order[..pos].iter().copied().filter(|_| rng.gen_bool(p)).collect();
        parents.sort_by_key(|&u| order.iter().position(|&w| w == u));
        let parent_ids: Vec<&str> = parents.iter().map(|&u| ids[u].as_str()).collect();
        let table: Vec<f64> = (0..1usize << parents.len()).flat_map(|_| [0.5, 0.5]).collect();
        b = b.random(&ids[v], &["a", "b"], &parent_ids, &table);
    }
    b.build().expect("random network is acyclic")
}
