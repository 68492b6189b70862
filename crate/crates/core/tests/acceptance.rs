//! Acceptance gate: each criterion runs in isolation and prints one
//! `PASS` / `FAIL` line. The process fails if any criterion fails.

use std::collections::{BTreeSet, VecDeque};
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use sdid::condense::{self, condense};
use sdid::generate::{self, Limits};
use sdid::graph::{self, NodeSet};
use sdid::mdp::backward_induction;
use sdid::oracle::{self, brute_force_optimal, DEFAULT_CAP};
use sdid::vpi::{self, build_modified, full_modified, incremental_condense, Mode, StageTag, VpiQuery};
use sdid::{fixtures, transform, InfluenceDiagram};

const VALUE_TOLERANCE: f64 = 1e-9;
const ENTRY_TOLERANCE: f64 = 1e-12;
const NONNEGATIVE_TOLERANCE: f64 = -1e-9;
const INCREMENTAL_PAIRS: usize = 200;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn optimum(d: &InfluenceDiagram) -> f64 {
    brute_force_optimal(d, DEFAULT_CAP).expect("within oracle cap").0
}

fn oracle_vpi(d: &InfluenceDiagram, q: &VpiQuery) -> f64 {
    optimum(&full_modified(d, q).expect("valid query")) - optimum(d)
}

fn smooth_corpus(n: u64) -> Vec<(u64, InfluenceDiagram)> {
    let limits = Limits::default();
    (0..n)
        .map(|seed| (seed, generate::smooth_sdid(seed, &limits)))
        .collect()
}

fn condensation_matches_oracle() -> Outcome {
    let start = Instant::now();
    let corpus = smooth_corpus(200);
    let mut worst = 0.0_f64;
    for (seed, d) in &corpus {
        let value = backward_induction(&condense(d).map_err(|e| format!("seed {seed}: {e}"))?)
            .map_err(|e| e.to_string())?
            .value;
        let gap = (value - optimum(d)).abs();
        worst = worst.max(gap);
        ensure(gap <= VALUE_TOLERANCE, || format!("seed {seed}: gap {gap:e}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} diagrams, max gap {worst:.1e}, {:.2}s",
        corpus.len(),
        elapsed.as_secs_f64()
    ))
}

fn smoothing_is_strongly_equivalent() -> Outcome {
    let limits = Limits::default();
    let mut reversals = 0;
    for seed in 0..100 {
        let d = generate::non_smooth_sdid(10_000 + seed, &limits);
        let s = transform::smooth(&d).map_err(|e| format!("seed {seed}: {e}"))?;
        reversals += d.arcs().iter().filter(|a| !s.arcs().contains(a)).count();
        let (vd, pd) = brute_force_optimal(&d, DEFAULT_CAP).map_err(|e| e.to_string())?;
        let (vs, ps) = brute_force_optimal(&s, DEFAULT_CAP).map_err(|e| e.to_string())?;
        ensure((vd - vs).abs() <= VALUE_TOLERANCE, || {
            format!("seed {seed}: {vd} vs {vs}")
        })?;
        let cross_d = oracle::expected_value(&s, &pd).map_err(|e| e.to_string())?;
        let cross_s = oracle::expected_value(&d, &ps).map_err(|e| e.to_string())?;
        ensure(
            (cross_d - vd).abs() <= VALUE_TOLERANCE && (cross_s - vs).abs() <= VALUE_TOLERANCE,
            || format!("seed {seed}: optimal policies differ in value across the pair"),
        )?;
    }
    Ok(format!("100 diagrams, {reversals} arcs reversed"))
}

/// Every budgeted query on the smooth corpus, with what each path computed.
struct QueryRun {
    seed: u64,
    query: VpiQuery,
    report: vpi::VpiReport,
    oracle: f64,
}

/// Queries over successive smooth diagrams until enough of them take the
/// incremental path.
fn query_runs() -> Vec<QueryRun> {
    let limits = Limits::default();
    let mut out: Vec<QueryRun> = Vec::new();
    for seed in 0.. {
        if out.iter().filter(|r| r.report.mode == Mode::Incremental).count() >= INCREMENTAL_PAIRS {
            break;
        }
        let d = generate::smooth_sdid(seed, &limits);
        for query in generate::queries(&d, &limits) {
            let report = vpi::vpi(&d, &query, None).unwrap_or_else(|e| panic!("seed {seed} {query:?}: {e}"));
            let oracle = oracle_vpi(&d, &query);
            out.push(QueryRun {
                seed,
                query,
                report,
                oracle,
            });
        }
    }
    out
}

fn incremental_matches_scratch(runs: &[QueryRun]) -> Outcome {
    let limits = Limits::default();
    let mut pairs = 0;
    let mut worst = 0.0_f64;
    for run in runs.iter().filter(|r| r.report.mode != Mode::Shortcut) {
        let d = generate::smooth_sdid(run.seed, &limits);
        let gap = (run.report.vpi - run.oracle).abs();
        ensure(gap <= VALUE_TOLERANCE, || {
            format!(
                "seed {} {:?}: vpi {} vs oracle {}",
                run.seed, run.query, run.report.vpi, run.oracle
            )
        })?;
        if run.report.mode == Mode::Scratch {
            continue;
        }
        let base = transform::smooth(&d).map_err(|e| e.to_string())?;
        let prepared = vpi::prepare(&base, &run.query).map_err(|e| e.to_string())?;
        let orig = condense(&prepared.diagram).map_err(|e| e.to_string())?;
        let modified = build_modified(&prepared.diagram, &run.query).map_err(|e| e.to_string())?;
        let (inc, _) = incremental_condense(&orig, &prepared.diagram, &modified, prepared.c, prepared.t)
            .map_err(|e| format!("seed {} {:?}: {e}", run.seed, run.query))?;
        let scratch = condense(&modified).map_err(|e| e.to_string())?;
        let diff = condense::max_difference(&inc, &scratch)
            .ok_or_else(|| format!("seed {} {:?}: shapes differ", run.seed, run.query))?;
        worst = worst.max(diff);
        ensure(diff <= ENTRY_TOLERANCE, || {
            format!("seed {} {:?}: entry gap {diff:e}", run.seed, run.query)
        })?;
        pairs += 1;
    }
    ensure(pairs >= INCREMENTAL_PAIRS, || format!("only {pairs} incremental pairs"))?;
    let scratch = runs.iter().filter(|r| r.report.mode == Mode::Scratch).count();
    Ok(format!(
        "{pairs} incremental pairs, {scratch} scratch, max entry gap {worst:.1e}"
    ))
}

fn shortcut_is_sound(runs: &[QueryRun]) -> Outcome {
    let mut fired = 0;
    for run in runs.iter().filter(|r| r.report.mode == Mode::Shortcut) {
        ensure(run.report.vpi == 0.0, || {
            format!("seed {} {:?}: vpi {}", run.seed, run.query, run.report.vpi)
        })?;
        ensure(run.oracle.abs() <= VALUE_TOLERANCE, || {
            format!("seed {} {:?}: oracle {}", run.seed, run.query, run.oracle)
        })?;
        fired += 1;
    }
    ensure(fired > 0, || "shortcut never fired".into())?;
    Ok(format!("{fired} shortcut queries"))
}

fn vpi_is_nonnegative(runs: &[QueryRun]) -> Outcome {
    let lowest = runs.iter().map(|r| r.report.vpi).fold(f64::INFINITY, f64::min);
    ensure(lowest >= NONNEGATIVE_TOLERANCE, || format!("vpi {lowest}"))?;
    Ok(format!("{} queries, min vpi {lowest:.3e}", runs.len()))
}

fn umbrella_is_exact() -> Outcome {
    let d = fixtures::umbrella();
    let start = Instant::now();
    let r = vpi::vpi(&d, &VpiQuery::new("w", "d"), None).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(r.vpi == 1.0 - 0.7, || format!("vpi {}", r.vpi))?;
    ensure(elapsed < Duration::from_millis(10), || format!("took {elapsed:?}"))?;
    Ok(format!("vpi {} in {:?}", r.vpi, elapsed))
}

fn wildcatter_structure() -> Outcome {
    let d = fixtures::wildcatter(11);
    let verdict = graph::verdict(&d).map_err(|e| e.to_string())?;
    ensure(verdict == "SDID: yes, smooth: no (drill)", || verdict.clone())?;
    let s = transform::smooth(&d).map_err(|e| e.to_string())?;
    let sections = graph::extract_sections(&s).map_err(|e| e.to_string())?;
    let ids = |v: &[usize]| v.iter().map(|&n| s.id(n)).collect::<Vec<_>>();
    ensure(sections[1].entry.is_empty(), || "first frontier is not empty".into())?;
    ensure(ids(&sections[2].entry) == ["test", "test-result"], || {
        format!("{:?}", ids(&sections[2].entry))
    })?;
    ensure(
        ids(&sections[3].entry) == ["oil-produced", "market-information"],
        || format!("{:?}", ids(&sections[3].entry)),
    )?;
    let q = VpiQuery::new("market-information", "drill");
    let r = vpi::vpi(&d, &q, None).map_err(|e| e.to_string())?;
    let o = oracle_vpi(&d, &q);
    ensure((r.vpi - o).abs() <= VALUE_TOLERANCE, || {
        format!("vpi {} vs oracle {o}", r.vpi)
    })?;
    let zero = vpi::vpi(&d, &VpiQuery::new("seismic-structure", "oil-sale-policy"), None).map_err(|e| e.to_string())?;
    ensure(zero.vpi == 0.0, || format!("seismic-structure vpi {}", zero.vpi))?;
    Ok(format!("{verdict}; vpi(market-information, drill) = {:.6}", r.vpi))
}

fn wildcatter_reuse() -> Outcome {
    let d = fixtures::wildcatter(11);
    let r = vpi::vpi(&d, &VpiQuery::new("market-information", "drill"), None).map_err(|e| e.to_string())?;
    let tags: Vec<StageTag> = r.stages.iter().map(|s| s.tag).collect();
    let expected = [
        StageTag::Unchanged,
        StageTag::Entry,
        StageTag::ExitReused,
        StageTag::Unchanged,
    ];
    ensure(tags == expected, || format!("{tags:?}"))?;
    let performed: usize = r
        .stages
        .iter()
        .filter(|s| s.tag.is_reused())
        .map(|s| s.counters.eliminations_performed)
        .sum();
    ensure(performed == 0, || format!("{performed} eliminations in reused stages"))?;
    Ok(format!(
        "tags {tags:?}, {} eliminations saved",
        r.counters.eliminations_saved
    ))
}

/// Moral graph reachability by breadth-first search, written against the
/// parent lists directly.
fn separated_by_search(d: &InfluenceDiagram, x: usize, y: usize, a: &NodeSet) -> bool {
    let n = d.len();
    let mut adj = vec![BTreeSet::new(); n];
    for v in 0..n {
        let ps = d.parents(v);
        for &p in ps {
            adj[p].insert(v);
            adj[v].insert(p);
        }
        for &p in ps {
            for &q in ps {
                if p != q {
                    adj[p].insert(q);
                }
            }
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([x]);
    seen[x] = true;
    while let Some(v) = queue.pop_front() {
        if v == y {
            return false;
        }
        for &w in &adj[v] {
            if !seen[w] && !a.contains(&w) {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    true
}

fn m_separation_matches_search() -> Outcome {
    let mut triples = 0usize;
    for seed in 0..50 {
        let n = 4 + (seed as usize % 7);
        let d = generate::random_network(seed, n, 0.3);
        for x in 0..n {
            for y in 0..n {
                if x == y {
                    continue;
                }
                let others: Vec<usize> = (0..n).filter(|&v| v != x && v != y).collect();
                for mask in 0..1usize << others.len() {
                    let a: NodeSet = others
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask >> i & 1 == 1)
                        .map(|(_, &v)| v)
                        .collect();
                    let expected = separated_by_search(&d, x, y, &a);
                    ensure(graph::m_separated(&d, x, y, &a) == expected, || {
                        format!("seed {seed}: ({x}, {y}, {a:?})")
                    })?;
                    triples += 1;
                }
            }
        }
    }
    Ok(format!("50 graphs, {triples} triples"))
}

/// Exit code, stdout and stderr of one invocation.
fn run_cli(args: &[&str]) -> (i32, Vec<u8>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_sdid"))
        .args(args)
        .output()
        .expect("cli runs");
    (out.status.code().unwrap_or(-1), out.stdout, out.stderr)
}

fn cli_is_deterministic() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-cli");
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let write = |name: &str, text: &str| {
        let p = dir.join(name);
        std::fs::write(&p, text).map(|_| p.to_string_lossy().into_owned())
    };
    let wild = write(
        "wildcatter.json",
        &sdid::diagram::format::serialize(&fixtures::wildcatter(11)),
    )
    .map_err(|e| e.to_string())?;
    let umb = write(
        "umbrella.json",
        &sdid::diagram::format::serialize(&fixtures::umbrella()),
    )
    .map_err(|e| e.to_string())?;
    let queries = write(
        "queries.json",
        r#"[{"c": "market-information", "d_s": "drill"}, {"c": "seismic-structure", "d_s": "oil-sale-policy"}, {"c": "oil-underground", "d_s": "drill"}]"#,
    )
    .map_err(|e| e.to_string())?;
    let smoothed = dir.join("smoothed.json").to_string_lossy().into_owned();
    let condensed = dir.join("condensed.json").to_string_lossy().into_owned();
    let invocations: Vec<Vec<&str>> = vec![
        vec!["check", &wild],
        vec!["smooth", &wild, "--out", &smoothed],
        vec!["condense", &wild, "--out", &condensed],
        vec!["eval", &wild],
        vec!["eval", &condensed],
        vec![
            "vpi",
            &wild,
            "--c",
            "market-information",
            "--ds",
            "drill",
            "--cache",
            &condensed,
        ],
        vec!["eval", &umb],
        vec!["vpi", &umb, "--c", "w", "--ds", "d"],
        vec![
            "vpi",
            &wild,
            "--c",
            "market-information",
            "--ds",
            "drill",
            "--format",
            "tsv",
        ],
        vec!["vpi-batch", &wild, "--queries", &queries],
        vec!["vpi-batch", &wild, "--queries", &queries, "--format", "tsv"],
        vec!["oracle", &umb],
        vec!["generate", "--seed", "7"],
    ];
    for args in &invocations {
        let first = run_cli(args);
        let first_files: Vec<Vec<u8>> = [&smoothed, &condensed]
            .iter()
            .map(|p| std::fs::read(p).unwrap_or_default())
            .collect();
        let second = run_cli(args);
        let second_files: Vec<Vec<u8>> = [&smoothed, &condensed]
            .iter()
            .map(|p| std::fs::read(p).unwrap_or_default())
            .collect();
        ensure(first == second && first_files == second_files, || {
            format!("`{}` differs between runs", args.join(" "))
        })?;
        let writes_file = args.contains(&"--out");
        ensure(first.0 == 0 && (writes_file || !first.1.is_empty()), || {
            format!("`{}` failed: {}", args.join(" "), String::from_utf8_lossy(&first.2))
        })?;
    }
    Ok(format!("{} invocations byte-identical", invocations.len()))
}

fn guarded<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    })
}

fn main() {
    // the query corpus feeds three criteria; a failure building it fails all three
    let runs = guarded(|| Ok(query_runs())).map_err(|e| format!("query corpus: {e}"));
    let runs = &runs;
    let on_runs = |f: fn(&[QueryRun]) -> Outcome| -> Box<dyn FnOnce() -> Outcome> {
        Box::new(move || f(runs.as_ref().map_err(Clone::clone)?))
    };
    let criteria: Vec<Criterion> = vec![
        (
            "condensed optimum equals brute force",
            Box::new(condensation_matches_oracle),
        ),
        (
            "smoothing preserves optimal value and policies",
            Box::new(smoothing_is_strongly_equivalent),
        ),
        (
            "incremental condensation equals scratch",
            on_runs(incremental_matches_scratch),
        ),
        ("zero-value shortcut is sound", on_runs(shortcut_is_sound)),
        ("vpi is nonnegative", on_runs(vpi_is_nonnegative)),
        ("umbrella vpi is exactly 0.3", Box::new(umbrella_is_exact)),
        ("wildcatter structure and values", Box::new(wildcatter_structure)),
        ("wildcatter reuse accounting", Box::new(wildcatter_reuse)),
        (
            "m-separation agrees with path search",
            Box::new(m_separation_matches_search),
        ),
        ("cli output is deterministic", Box::new(cli_is_deterministic)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        match guarded(check) {
            Ok(detail) => println!(
                "criterion {:>2} PASS  {name} ({detail}) [{:.2}s]",
                i + 1,
                start.elapsed().as_secs_f64()
            ),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
