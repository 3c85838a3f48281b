//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL line, even when all pass.

use std::collections::BTreeMap;
use std::fs;
use std::panic;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use derivtree::calculus::finite_difference;
use derivtree::curriculum::{
    build_curriculum, export_problems, generate_dataset, level_rng, GeneratorConfig,
};
use derivtree::decompose::{build_tree, render_table, verify, Rule};
use derivtree::expr::{eval_at, parse, Expr};
use derivtree::problem::Problem;
use derivtree::reward::{accuracy_by_level, grade_base, grade_extended, GradedResponse, Tenths};
use derivtree::rl::{clipped_surrogate, group_advantages, kl_penalty, GroupSample};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn dataset(seed: u64, per_level: usize) -> Vec<Problem> {
    generate_dataset(&GeneratorConfig::with_per_level(seed, per_level)).expect("generator")
}

fn derivtree(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_derivtree"))
        .args(args)
        .env_remove("DERIVTREE_SEED")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every emitted edge of every tree re-verifies from scratch.
fn verification_by_construction() -> Outcome {
    let start = Instant::now();
    let problems = dataset(1, 100);
    ensure(problems.len() == 500, || format!("generated {} problems", problems.len()))?;
    let (mut trees, mut edges, mut failed) = (0, 0, Vec::new());
    for p in problems.iter().filter(|p| p.depth >= 2) {
        let tree = build_tree(p).map_err(|e| e.to_string())?;
        trees += 1;
        for e in &tree.edges {
            edges += 1;
            let (parent, child) = (&tree.nodes[e.parent].expr, &tree.nodes[e.child].expr);
            let report = verify(parent, child);
            if !(report.overall && e.report.overall && report.v3 == Some(e.rule)) {
                failed.push(format!("{parent} -> {child}"));
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(failed.is_empty(), || {
        format!("{} of {edges} edges failed, first {}", failed.len(), failed[0])
    })?;
    ensure(edges > 0, || "no edges emitted".into())?;
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("{trees} trees, {edges}/{edges} edges verified in {:.1}s", elapsed.as_secs_f64()))
}

fn golden_table() -> Outcome {
    let tree = build_tree(&Problem::new("t2", parse("sin(cos(tan(x^2)))").unwrap()))
        .map_err(|e| e.to_string())?;
    let levels: Vec<usize> = tree.nodes.iter().map(|n| n.level).collect();
    ensure(levels == [4, 3, 2, 1], || format!("levels {levels:?}"))?;
    ensure(tree.edges.len() == 3, || format!("{} edges", tree.edges.len()))?;
    for (i, e) in tree.edges.iter().enumerate() {
        ensure((e.parent, e.child) == (i, i + 1), || {
            format!("edge {i} is {}->{}", e.parent, e.child)
        })?;
        ensure(e.rule == Rule::Chain, || format!("edge {i} rule {}", e.rule))?;
        ensure(e.report.v1 && e.report.v2 && e.report.v3 == Some(Rule::Chain), || {
            format!("edge {i} report {:?}", e.report)
        })?;
    }
    let golden = include_str!("../../core/tests/data/table_sin_cos_tan.txt");
    let rendered = render_table(&tree);
    ensure(rendered == golden, || format!("table differs:\n{rendered}"))?;
    Ok(format!("4-node chain, table matches golden ({} bytes)", golden.len()))
}

fn depth_bound() -> Outcome {
    let problems = dataset(3, 100);
    ensure(problems.len() >= 400, || format!("only {} problems", problems.len()))?;
    let (mut violations, mut chain_edges) = (Vec::new(), 0);
    for p in &problems {
        let tree = match build_tree(p) {
            Ok(t) => t,
            Err(e) => {
                violations.push(e.to_string());
                continue;
            }
        };
        if p.depth >= 1 && tree.depth() > p.depth - 1 {
            violations.push(format!("{}: depth {} > {}", p.expr, tree.depth(), p.depth - 1));
        }
        for e in tree.edges.iter().filter(|e| e.rule == Rule::Chain) {
            chain_edges += 1;
            let (pd, cd) = (tree.nodes[e.parent].depth, tree.nodes[e.child].depth);
            if pd != cd + 1 {
                violations.push(format!(
                    "chain {} -> {}: {pd} vs {cd}",
                    tree.nodes[e.parent].expr, tree.nodes[e.child].expr
                ));
            }
        }
    }
    ensure(violations.is_empty(), || {
        format!("{} violations, first {}", violations.len(), violations[0])
    })?;
    Ok(format!("{} problems, 0 depth violations, {chain_edges} chain edges exact", problems.len()))
}

const FD_STEP: f64 = 1e-5;
const FD_POINTS: usize = 16;
const FD_MAX_TRIES: usize = 512;

/// A point where the central difference is trustworthy: defined on the
/// stencil and with small Richardson truncation estimates. Only `f` is
/// consulted, never the symbolic derivative.
fn admissible_fd(f: &Expr, x: f64) -> Option<f64> {
    let fd = finite_difference(f, x, FD_STEP).ok()?;
    let fd2 = finite_difference(f, x, 2.0 * FD_STEP).ok()?;
    let fdh = finite_difference(f, x, FD_STEP / 2.0).ok()?;
    let tol = 1e-7 * (1.0 + fd.abs());
    let coarse = (fd2 - fd).abs() / 3.0;
    let fine = 4.0 * (fd - fdh).abs() / 3.0;
    (fd.is_finite() && coarse <= tol && fine <= tol).then_some(fd)
}

fn derivative_oracle() -> Outcome {
    let problems = dataset(4, 40);
    ensure(problems.len() == 200, || format!("generated {} problems", problems.len()))?;
    let mut rng = level_rng(4, 99);
    let (mut checked, mut failures, mut worst) = (0, Vec::new(), 0.0f64);
    for p in &problems {
        let (mut points, mut tries) = (0, 0);
        while points < FD_POINTS && tries < FD_MAX_TRIES {
            tries += 1;
            let x = rng.gen_range(0.15..2.5);
            let Some(fd) = admissible_fd(&p.expr, x) else { continue };
            points += 1;
            match eval_at(&p.solution, x) {
                Ok(sym) => {
                    let err = (sym - fd).abs();
                    worst = worst.max(err / (1.0 + fd.abs()));
                    if err > 1e-6 * (1.0 + fd.abs()) {
                        failures.push(format!("{} at {x}: {sym} vs {fd}", p.expr));
                    }
                }
                Err(e) => failures.push(format!("{} at {x}: {e}", p.expr)),
            }
        }
        if points < FD_POINTS {
            failures.push(format!("{}: only {points} admissible points", p.expr));
        }
        checked += points;
    }
    ensure(failures.is_empty(), || format!("{} failures, first {}", failures.len(), failures[0]))?;
    Ok(format!(
        "{} problems x {FD_POINTS} points = {checked} checks, worst scaled error {worst:.1e}",
        problems.len()
    ))
}

fn reward_table() -> Outcome {
    let p = Problem::new("sq", parse("x^2").unwrap());
    let fixture: [(&str, u32); 12] = [
        ("\\boxed{2*x}", 11),
        ("so the derivative is \\boxed{x*2}", 11),
        ("\\boxed{x + x}", 11),
        ("The derivative is 2*x", 10),
        ("d/dx[x^2] = 2*x.", 10),
        ("answer: x*2", 10),
        ("\\boxed{x^2}", 1),
        ("\\boxed{2}", 1),
        ("\\boxed{2 x}", 1),
        ("I do not know", 0),
        ("The derivative is x", 0),
        ("", 0),
    ];
    for (response, tenths) in fixture {
        let got = grade_base(&p, response).breakdown.base_total();
        ensure(got == Tenths(tenths), || format!("{response:?}: {got} != {}", Tenths(tenths)))?;
        ensure(got.as_f64() == f64::from(tenths) / 10.0, || {
            format!("{response:?}: float mismatch")
        })?;
    }

    let q = Problem::new("nest", parse("sin(cos(x^2))").unwrap());
    let tree = build_tree(&q).map_err(|e| e.to_string())?;
    let answer = "\\boxed{-2*x*sin(x^2)*cos(cos(x^2))}";
    let cases: [(String, [u32; 3]); 4] = [
        (answer.to_string(), [0, 0, 0]),
        (format!("Apply the chain rule. {answer}"), [2, 0, 0]),
        (format!("\\boxed{{-2*x*sin(x^2)}} {answer}"), [0, 3, 1]),
        (format!("By the chain rule \\boxed{{2*x}} \\boxed{{-sin(x^2)*2*x}} {answer}"), [2, 3, 2]),
    ];
    for (response, [rule, child, step]) in &cases {
        let b = grade_extended(&q, response, &tree).breakdown;
        let got = [b.rule_bonus.0, b.child_bonus.0, b.step_bonus.0];
        ensure(got == [*rule, *child, *step], || format!("{response:?}: bonuses {got:?}"))?;
        ensure(b.base_total() == Tenths(11), || format!("{response:?}: base {}", b.base_total()))?;
        ensure(b.extended_total() == Tenths(11 + rule + child + step), || {
            format!("{response:?}: total")
        })?;
    }
    Ok("12-case base fixture exact; bonuses 0.2 / 0.3 / 0.1*k exact".into())
}

/// `sum p log(p/q)` and the Monte-Carlo mean of the sampled estimator with
/// draws from `p`.
fn kl_check(p: &[f64], q: &[f64], draws: usize, seed: u64) -> (f64, f64) {
    let exact: f64 = p.iter().zip(q).map(|(a, b)| a * (a / b).ln()).sum();
    let mut rng = level_rng(seed, 0);
    let mut acc = 0.0;
    for _ in 0..draws {
        let u: f64 = rng.gen();
        let mut k = 0;
        let mut cdf = p[0];
        while u >= cdf && k + 1 < p.len() {
            k += 1;
            cdf += p[k];
        }
        let s = GroupSample { reward: 0.0, logp: p[k].ln(), logp_ref: q[k].ln() };
        acc += kl_penalty(&s).unwrap().value;
    }
    (exact, acc / draws as f64)
}

fn grpo_math() -> Outcome {
    let mut rng = level_rng(6, 0);
    let mut worst_mean = 0.0f64;
    for i in 0..1000 {
        let rewards: Vec<f64> = (0..4)
            .map(|_| match i % 2 {
                0 => [0.0, 0.1, 1.0, 1.1][rng.gen_range(0..4)],
                _ => rng.gen_range(-2.0..2.0),
            })
            .collect();
        let adv = group_advantages(&rewards, 1e-8).map_err(|e| e.to_string())?;
        let mean = adv.iter().sum::<f64>() / 4.0;
        let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
        ensure(mean.abs() <= 1e-12, || format!("{rewards:?}: mean {mean}"))?;
        ensure(std <= 1.0, || format!("{rewards:?}: std {std}"))?;
        worst_mean = worst_mean.max(mean.abs());
    }

    let surrogate = |r, a, e| clipped_surrogate(r, a, e).map_err(|e| e.to_string());
    for (r, a, e, want) in [(1.0, 0.7, 0.2, 0.7), (1.5, 1.0, 0.2, 1.2), (0.5, -1.0, 0.2, -0.8)] {
        let got = surrogate(r, a, e)?;
        ensure((got - want).abs() <= 1e-15, || format!("surrogate({r}, {a}, {e}) = {got}"))?;
    }

    let pairs = [([0.5, 0.3, 0.2], [0.25, 0.25, 0.5]), ([0.1, 0.6, 0.3], [0.4, 0.4, 0.2])];
    let mut rel = Vec::new();
    for (i, (p, q)) in pairs.iter().enumerate() {
        let (exact, mc) = kl_check(p, q, 200_000, 60 + i as u64);
        let r = (mc - exact).abs() / exact;
        ensure(r <= 0.02, || format!("KL pair {i}: exact {exact}, MC {mc}"))?;
        rel.push(format!("{:.2}%", r * 100.0));
    }
    Ok(format!(
        "1000 groups max |mean| {worst_mean:.1e}; 3 surrogate fixtures; KL MC error {}",
        rel.join(", ")
    ))
}

fn curriculum_ordering() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut total = 0;
    for seed in 0..10u64 {
        let cfg = GeneratorConfig {
            per_level: BTreeMap::from([(4, 25), (5, 25)]),
            ..GeneratorConfig::with_per_level(seed, 0)
        };
        let targets = generate_dataset(&cfg).map_err(|e| e.to_string())?;
        ensure(targets.len() == 50, || format!("seed {seed}: {} targets", targets.len()))?;
        let c = build_curriculum(&targets).map_err(|e| e.to_string())?;
        c.check().map_err(|e| format!("seed {seed}: {e}"))?;
        for (ci, pi, _) in c.edges() {
            ensure(ci < pi, || format!("seed {seed}: child {ci} after parent {pi}"))?;
        }
        for w in c.entries.windows(2) {
            ensure(w[0].problem.level <= w[1].problem.level, || {
                format!("seed {seed}: level drop")
            })?;
        }
        total += c.len();

        let tpath = dir.path().join(format!("targets-{seed}.jsonl"));
        let cpath = dir.path().join(format!("curriculum-{seed}.jsonl"));
        fs::write(&tpath, export_problems(&targets)).map_err(|e| e.to_string())?;
        let out = derivtree(&[
            "curriculum",
            "--targets",
            path_str(&tpath),
            "--out",
            path_str(&cpath),
            "--check",
        ]);
        ensure(out.status.success(), || {
            format!(
                "seed {seed}: --check exited {:?}: {}",
                out.status.code(),
                String::from_utf8_lossy(&out.stderr)
            )
        })?;
    }
    Ok(format!("10 seeds x 50 targets, {total} entries ordered; --check exits 0"))
}

fn graded(id: &str, correct: bool) -> GradedResponse {
    let p = Problem::new(id, parse("x^2").unwrap());
    grade_base(&p, if correct { "\\boxed{2*x}" } else { "\\boxed{x}" })
}

fn metrics_arithmetic() -> Outcome {
    // (level, size, base correct, trained correct)
    let plan =
        [(1, 120, 96, 110), (2, 110, 77, 95), (3, 100, 55, 80), (4, 80, 30, 55), (5, 50, 16, 34)];
    let (mut problems, mut base, mut trained) = (Vec::new(), Vec::new(), Vec::new());
    for (level, size, b, t) in plan {
        for i in 0..size {
            let id = format!("L{level}-{i}");
            let mut p = Problem::new(&id, parse("x^2").unwrap());
            p.level = level;
            problems.push(p);
            base.push(graded(&id, i < b));
            trained.push(graded(&id, i < t));
        }
    }
    let report = accuracy_by_level(&trained, &problems, Some(&base)).map_err(|e| e.to_string())?;
    let d5 = report.levels[&5].delta_pct.ok_or("no delta at level 5")?;
    let l5 = &report.levels[&5];
    ensure(l5.baseline == Some(0.32) && l5.accuracy == 0.68, || {
        format!("D5 accuracies {:?} / {}", l5.baseline, l5.accuracy)
    })?;
    ensure((d5 - 112.5).abs() <= 1e-9, || format!("delta_5 = {d5}"))?;
    let n: usize = plan.iter().map(|r| r.1).sum();
    let weighted: f64 =
        report.levels.values().map(|l| l.total as f64 * l.accuracy).sum::<f64>() / n as f64;
    ensure((report.overall - weighted).abs() <= 1e-12, || {
        format!("overall {} vs {weighted}", report.overall)
    })?;
    Ok(format!("delta_5 = +{d5}%, overall {:.6} equals weighted mean", report.overall))
}

fn determinism() -> Outcome {
    let mut outputs = Vec::new();
    for _ in 0..2 {
        // same relative paths in a fresh directory, so stdout is comparable too
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let run = |args: &[&str]| {
            Command::new(env!("CARGO_BIN_EXE_derivtree"))
                .args(args)
                .current_dir(dir.path())
                .env_remove("DERIVTREE_SEED")
                .output()
                .expect("binary runs")
        };
        let g = run(&["gen", "--per-level", "20", "--seed", "9", "--out", "gen.jsonl"]);
        ensure(g.status.success(), || String::from_utf8_lossy(&g.stderr).into_owned())?;
        let c = run(&["curriculum", "--targets", "gen.jsonl", "--out", "cur.jsonl"]);
        ensure(c.status.success(), || String::from_utf8_lossy(&c.stderr).into_owned())?;
        let read = |name: &str| fs::read(dir.path().join(name)).map_err(|e| e.to_string());
        outputs.push((read("gen.jsonl")?, read("cur.jsonl")?, g.stdout, c.stdout));
    }
    ensure(outputs[0] == outputs[1], || "runs differ".into())?;
    Ok(format!(
        "gen ({} bytes), curriculum ({} bytes) and stdout identical across runs",
        outputs[0].0.len(),
        outputs[0].1.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("verification by construction", verification_by_construction),
        ("golden decomposition table", golden_table),
        ("tree depth bound", depth_bound),
        ("derivative oracle", derivative_oracle),
        ("reward table", reward_table),
        ("GRPO math", grpo_math),
        ("curriculum ordering", curriculum_ordering),
        ("metrics arithmetic", metrics_arithmetic),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned();
            Err(msg.or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
