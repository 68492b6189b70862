//! Invariants of every stage of the pipeline, checked on seeded random
//! diagrams. Each proptest case draws a seed and builds its diagram from it,
//! so a failing case shrinks to a single reproducible seed.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdid::condense::{self, condense, Condensation};
use sdid::diagram::layout::{self, Assignments};
use sdid::diagram::{decision_ordering, format, DecisionFunction, NodeKind};
use sdid::factor::{self, Factor};
use sdid::generate::{self, Limits};
use sdid::graph::{self, NodeSet};
use sdid::inference;
use sdid::mdp::{self, backward_induction};
use sdid::oracle;
use sdid::vpi::{self, Mode, StageTag};
use sdid::{transform, InfluenceDiagram, Policy};

const VALUE_TOLERANCE: f64 = 1e-9;
const ENTRY_TOLERANCE: f64 = 1e-12;

fn small() -> Limits {
    Limits {
        budget: 200_000,
        ..Limits::default()
    }
}

fn smooth(seed: u64) -> InfluenceDiagram {
    generate::smooth_sdid(seed, &small())
}

fn random_policy(d: &InfluenceDiagram, seed: u64) -> Policy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let functions = decision_ordering(d)
        .unwrap()
        .into_iter()
        .map(|dec| {
            let parents = d.parents(dec).to_vec();
            let rows = layout::size(&d.cards(&parents));
            DecisionFunction {
                decision: dec,
                parents,
                table: (0..rows).map(|_| rng.gen_range(0..d.card(dec))).collect(),
            }
        })
        .collect();
    Policy { functions }
}

fn optimum(d: &InfluenceDiagram) -> f64 {
    oracle::brute_force_optimal(d, oracle::DEFAULT_CAP).unwrap().0
}

fn kernels(c: &Condensation) -> impl Iterator<Item = &condense::Kernel> {
    std::iter::once(&c.initial).chain(c.stages.iter().filter_map(|s| s.kernel.as_ref()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // ---- diagram-core ----

    #[test]
    fn joint_under_any_policy_is_a_distribution(seed in any::<u64>()) {
        let d = smooth(seed);
        let joint = oracle::joint_distribution(&d, &random_policy(&d, seed)).unwrap();
        prop_assert!((joint.total() - 1.0).abs() <= VALUE_TOLERANCE);
    }

    #[test]
    fn serialization_round_trips(seed in any::<u64>()) {
        let d = generate::non_smooth_sdid(seed, &small());
        let text = format::serialize(&d);
        let back = format::parse(&text).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(format::serialize(&back), text);
    }

    #[test]
    fn decision_ordering_is_a_chain(seed in any::<u64>()) {
        let d = smooth(seed);
        let order = decision_ordering(&d).unwrap();
        let sorted: BTreeSet<_> = order.iter().copied().collect();
        prop_assert_eq!(sorted, d.decision_nodes().into_iter().collect::<BTreeSet<_>>());
        for pair in order.windows(2) {
            prop_assert!(d.descendants(pair[0]).contains(&pair[1]));
        }
    }

    // ---- graph-analysis ----

    #[test]
    fn frontier_splits_the_nodes(seed in any::<u64>()) {
        let d = generate::non_smooth_sdid(seed, &small());
        for dec in d.decision_nodes() {
            let down = graph::downstream(&d, dec);
            let up = graph::upstream(&d, dec);
            let parents: NodeSet = d.parents(dec).iter().copied().collect();
            prop_assert!(down.is_disjoint(&up) && down.is_disjoint(&parents) && up.is_disjoint(&parents));
            prop_assert_eq!(down.len() + up.len() + parents.len(), d.len());
        }
    }

    #[test]
    fn sections_cover_nodes_and_arcs(seed in any::<u64>()) {
        let d = smooth(seed);
        let sections = graph::extract_sections(&d).unwrap();
        let frontier: NodeSet = sections
            .iter()
            .flat_map(|s| s.entry.iter().chain(s.decision.iter()).copied())
            .collect();
        for v in 0..d.len() {
            let holders = sections
                .iter()
                .filter(|s| s.members().contains(&v) || s.value_nodes().contains(&v))
                .count();
            prop_assert!(holders >= 1, "node {} is in no section", d.id(v));
            if !frontier.contains(&v) && !sections.iter().any(|s| s.exit.iter().flatten().any(|&x| x == v)) {
                prop_assert_eq!(holders, 1, "node {} is in several sections", d.id(v));
            }
        }
        // an arc inside a frontier is dropped where the frontier is conditioned
        // on, and kept (once) in the section that produces it
        for &(a, b) in d.arcs() {
            let containing: Vec<_> = sections
                .iter()
                .filter(|s| {
                    let m = s.members();
                    m.contains(&a) && m.contains(&b)
                })
                .collect();
            let conditioned = containing.iter().all(|s| {
                let c = s.conditioners();
                c.contains(&a) && c.contains(&b)
            });
            let holders = sections.iter().filter(|s| s.arcs.contains(&(a, b))).count();
            let expected = usize::from(!conditioned);
            prop_assert_eq!(holders, expected, "arc {}->{}", d.id(a), d.id(b));
        }
    }

    // ---- transform ----

    #[test]
    fn smoothing_preserves_value_and_policies(seed in any::<u64>()) {
        let d = generate::non_smooth_sdid(seed, &small());
        let s = transform::smooth(&d).unwrap();
        prop_assert!(graph::is_smooth(&s).unwrap() && graph::is_stepwise_decomposable(&s).unwrap());
        let (vs, ps) = oracle::brute_force_optimal(&s, oracle::DEFAULT_CAP).unwrap();
        prop_assert!((optimum(&d) - vs).abs() <= VALUE_TOLERANCE);
        prop_assert!((oracle::expected_value(&d, &ps).unwrap() - vs).abs() <= VALUE_TOLERANCE);
    }

    #[test]
    fn reversal_preserves_the_joint(seed in any::<u64>()) {
        let d = smooth(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = random_policy(&d, seed);
        let before = oracle::joint_distribution(&d, &policy).unwrap();
        let candidates: Vec<_> = d
            .arcs()
            .iter()
            .copied()
            .filter(|&(a, b)| d.kind(a) == NodeKind::Random && d.kind(b) == NodeKind::Random)
            .collect();
        prop_assume!(!candidates.is_empty());
        let (a, b) = candidates[rng.gen_range(0..candidates.len())];
        let Ok(r) = transform::reverse_arc(&d, a, b) else { return Ok(()) };
        let after = oracle::joint_distribution(&r, &policy).unwrap();
        prop_assert_eq!(&before.vars, &after.vars);
        for (x, y) in before.table.iter().zip(&after.table) {
            prop_assert!((x - y).abs() <= ENTRY_TOLERANCE);
        }
        let twice = transform::reverse_arc(&r, b, a).unwrap();
        let back = twice.cpt(b).unwrap();
        let orig = d.cpt(b).unwrap();
        // the child's table may have gained parents; it must ignore them
        let again = oracle::joint_distribution(&twice, &policy).unwrap();
        for (x, y) in before.table.iter().zip(&again.table) {
            prop_assert!((x - y).abs() <= ENTRY_TOLERANCE);
        }
        prop_assert!(orig.parents.iter().all(|p| back.parents.contains(p)));
    }

    // ---- inference ----

    #[test]
    fn kernel_rows_are_distributions(seed in any::<u64>()) {
        let c = condense(&smooth(seed)).unwrap();
        for k in kernels(&c) {
            for r in 0..k.rows() {
                let sum: f64 = k.row(r).iter().sum();
                if k.uniform_rows.contains(&r) {
                    let u = 1.0 / k.row_len() as f64;
                    prop_assert!(k.row(r).iter().all(|&p| p == u));
                } else {
                    prop_assert!((sum - 1.0).abs() <= VALUE_TOLERANCE);
                }
            }
        }
    }

    #[test]
    fn chained_kernels_reproduce_frontier_marginals(seed in any::<u64>()) {
        let d = smooth(seed);
        let c = condense(&d).unwrap();
        let policy = random_policy(&d, seed ^ 1);
        let joint = oracle::joint_distribution(&d, &policy).unwrap();
        let mut mass = c.initial.row(0).to_vec();
        for (stage, f) in c.stages.iter().zip(&policy.functions) {
            let vars: Vec<usize> = stage.state.iter().map(|x| x.node).collect();
            let cards: Vec<usize> = stage.state.iter().map(|x| x.card()).collect();
            let mut marginal = vec![0.0; layout::size(&cards)];
            for (a, p) in Assignments::new(&joint.cards).zip(&joint.table) {
                let sub: Vec<usize> = vars.iter().map(|v| a[joint.vars.iter().position(|w| w == v).unwrap()]).collect();
                marginal[layout::index(&sub, &cards)] += p;
            }
            for (x, y) in mass.iter().zip(&marginal) {
                prop_assert!((x - y).abs() <= VALUE_TOLERANCE, "stage {}", stage.index);
            }
            let Some(k) = &stage.kernel else { break };
            let mut next = vec![0.0; k.row_len()];
            for (x, m) in mass.iter().enumerate() {
                for (n, p) in next.iter_mut().zip(k.row(x * stage.actions() + f.table[x])) {
                    *n += m * p;
                }
            }
            mass = next;
        }
    }

    #[test]
    fn elimination_order_does_not_matter(seed in any::<u64>()) {
        let d = smooth(seed);
        for s in graph::extract_sections(&d).unwrap() {
            let Some(exit) = s.exit.clone() else { continue };
            let factors: Vec<Factor> = s.cpts.iter().map(|c| Factor::from_cpt(c, |v| s.card(v)).unwrap()).collect();
            let mut keep: Vec<usize> = s.conditioners();
            let free: Vec<usize> = exit.iter().copied().filter(|x| !keep.contains(x)).collect();
            keep.extend(free);
            let keep: Vec<(usize, usize)> = keep.iter().map(|&v| (v, s.card(v))).collect();
            let kept: BTreeSet<usize> = keep.iter().map(|&(v, _)| v).collect();
            let doomed: Vec<usize> = factors.iter().flat_map(|f| f.vars().to_vec()).filter(|v| !kept.contains(v)).collect::<BTreeSet<_>>().into_iter().collect();
            let forward = factor::eliminate_in_order(factors.clone(), &keep, &doomed).unwrap();
            let reversed: Vec<usize> = doomed.iter().rev().copied().collect();
            let backward = factor::eliminate_in_order(factors.clone(), &keep, &reversed).unwrap();
            let min_fill = factor::eliminate(factors, &keep).unwrap();
            for ((a, b), c) in forward.table().iter().zip(backward.table()).zip(min_fill.table()) {
                prop_assert!((a - b).abs() <= ENTRY_TOLERANCE && (a - c).abs() <= ENTRY_TOLERANCE);
            }
        }
    }

    // ---- condensation ----

    #[test]
    fn condensed_optimum_is_the_true_optimum(seed in any::<u64>()) {
        let d = smooth(seed);
        let c = condense(&d).unwrap();
        let s = backward_induction(&c).unwrap();
        let best = optimum(&d);
        prop_assert!((s.value - best).abs() <= VALUE_TOLERANCE);
        let mapped = mdp::to_policy(&c, &s.policy, &d).unwrap();
        prop_assert!((oracle::expected_value(&d, &mapped).unwrap() - best).abs() <= VALUE_TOLERANCE);
    }

    #[test]
    fn rewards_add_up_over_value_nodes(seed in any::<u64>()) {
        let d = smooth(seed);
        let c = condense(&d).unwrap();
        for (stage, s) in c.stages.iter().zip(graph::extract_sections(&d).unwrap().iter().skip(1)) {
            let mut total = vec![0.0; stage.reward.len()];
            for v in s.value_nodes() {
                for (t, x) in total.iter_mut().zip(inference::value_projection(s, v).unwrap()) {
                    *t += x;
                }
            }
            for (a, b) in total.iter().zip(&stage.reward) {
                prop_assert!((a - b).abs() <= ENTRY_TOLERANCE);
            }
        }
    }

    #[test]
    fn condensation_json_round_trips(seed in any::<u64>()) {
        let c = condense(&smooth(seed)).unwrap();
        let back = condense::from_json(&condense::to_json(&c)).unwrap();
        prop_assert_eq!(back, c);
    }

    // ---- mdp-eval ----

    #[test]
    fn no_condensed_policy_beats_backward_induction(seed in any::<u64>()) {
        let d = smooth(seed);
        let c = condense(&d).unwrap();
        let best = backward_induction(&c).unwrap();
        prop_assert_eq!(&backward_induction(&c).unwrap(), &best);
        for p in mdp::enumerate(&c).take(5_000) {
            prop_assert!(mdp::evaluate_policy(&c, &p).unwrap() <= best.value + ENTRY_TOLERANCE);
        }
    }

    // ---- oracle ----

    #[test]
    fn oracle_optimum_dominates_every_policy(seed in any::<u64>()) {
        let d = generate::smooth_sdid(seed, &Limits { budget: 20_000, ..Limits::default() });
        let best = optimum(&d);
        for p in oracle::enumerate_policies(&d).unwrap() {
            prop_assert!(oracle::expected_value(&d, &p).unwrap() <= best);
        }
    }

    // ---- vpi ----

    #[test]
    fn vpi_agrees_with_scratch_and_oracle(seed in any::<u64>()) {
        let d = smooth(seed);
        for q in generate::queries(&d, &small()) {
            let r = vpi::vpi(&d, &q, None).unwrap();
            prop_assert!(r.vpi >= -VALUE_TOLERANCE);
            prop_assert_eq!(r.vpi, r.modified - r.original);
            let truth = optimum(&vpi::full_modified(&d, &q).unwrap()) - optimum(&d);
            prop_assert!((r.vpi - truth).abs() <= VALUE_TOLERANCE, "{:?}: {} vs {}", q, r.vpi, truth);
            if r.mode == Mode::Shortcut {
                prop_assert_eq!(r.vpi, 0.0);
            }
            for s in &r.stages {
                if s.tag.is_reused() {
                    prop_assert_eq!(s.counters.eliminations_performed, 0);
                }
            }
            if r.mode != Mode::Incremental {
                continue;
            }
            let base = transform::smooth(&d).unwrap();
            let p = vpi::prepare(&base, &q).unwrap();
            let orig = condense(&p.diagram).unwrap();
            let m = vpi::build_modified(&p.diagram, &q).unwrap();
            let (inc, tags) = vpi::incremental_condense(&orig, &p.diagram, &m, p.c, p.t).unwrap();
            let scratch = condense(&m).unwrap();
            prop_assert!(condense::max_difference(&inc, &scratch).unwrap() <= ENTRY_TOLERANCE);
            for t in tags.iter().filter(|t| t.tag == StageTag::Unchanged) {
                if t.stage == 0 {
                    prop_assert_eq!(&inc.initial, &orig.initial);
                    prop_assert_eq!(inc.f0.to_bits(), orig.f0.to_bits());
                } else {
                    let (a, b) = (&orig.stages[t.stage - 1], &inc.stages[t.stage - 1]);
                    prop_assert_eq!(&a.kernel, &b.kernel);
                    prop_assert_eq!(&a.reward, &b.reward);
                }
            }
        }
    }
}
