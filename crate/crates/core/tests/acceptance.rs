//! Acceptance gate. Runs every criterion, prints one line per criterion and
//! exits non-zero if any fails.

mod common;

use qad::{
    build_graph, cost_estimate, error_bounds, oracle_eval, oracle_fixed_trace, parse, run,
    CostTable, FixedPointFormat, GateKind, NodeKind, RegisterMachine, ResetMode, RunConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

/// Criteria 3 and 4 run on the same randomized suite.
const SUITE_SEED: u64 = 0x5eed_0003;

const X_COS_LOG_X: &str = "x * cos(log(x))";

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fmt(b: u32) -> FixedPointFormat {
    FixedPointFormat::new(8, b).unwrap()
}

/// Value and derivative of x·cos(log x) at 32 fractional bits.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let g = build_graph(&parse(X_COS_LOG_X).unwrap());
    let f = fmt(32);
    let mut worst = 0.0f64;
    for x0 in [0.5, 1.0, 2.0, 3.0] {
        let res = match run(&g, &RunConfig::new(x0, f)) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("x0={x0}: {e}")),
        };
        let report = error_bounds(&g, x0, f).unwrap();
        let ln = f64::ln(x0);
        let want_v = x0 * ln.cos();
        let want_d = ln.cos() - ln.sin();
        let err_d = (res.derivative - want_d).abs();
        let err_v = (res.value - want_v).abs();
        worst = worst.max(err_d);
        if err_d > report.bound_deriv || err_d > 2f64.powi(-24) {
            return outcome(
                false,
                format!(
                    "x0={x0}: derivative error {err_d:e} bound {:e}",
                    report.bound_deriv
                ),
            );
        }
        if err_v > report.bound_value || err_v > 2f64.powi(-24) {
            return outcome(
                false,
                format!(
                    "x0={x0}: value error {err_v:e} bound {:e}",
                    report.bound_value
                ),
            );
        }
    }
    let elapsed = start.elapsed();
    outcome(
        elapsed < Duration::from_secs(1),
        format!("max derivative error {worst:e}, {elapsed:?}"),
    )
}

/// Product rule on the second worked example.
fn criterion_2() -> Outcome {
    let start = Instant::now();
    let g = build_graph(&parse("x*x*sin(log(x))").unwrap());
    let exact = oracle_eval::<f64>(&g, 1.0).unwrap();
    if exact.v != 0.0 || exact.d != 1.0 {
        return outcome(
            false,
            format!("oracle at 1 gave ({}, {})", exact.v, exact.d),
        );
    }
    let mut worst = 0.0f64;
    for x0 in [1.0f64, 2.0] {
        let (val1, der1) = (x0 * x0, 2.0 * x0);
        let (val2, der2) = (x0.ln().sin(), x0.ln().cos() / x0);
        let want = val1 * der2 + val2 * der1;
        let res = match run(&g, &RunConfig::new(x0, fmt(32))) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("x0={x0}: {e}")),
        };
        let err = (res.derivative - want).abs();
        worst = worst.max(err);
        if err > 2f64.powi(-20) {
            return outcome(false, format!("x0={x0}: derivative error {err:e}"));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        elapsed < Duration::from_secs(1),
        format!("max derivative error {worst:e}, oracle(1) = (0, 1), {elapsed:?}"),
    )
}

/// Bit-exact agreement between the register engine and the classical twin.
fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    let mut covered = BTreeSet::new();
    let mut mismatches = Vec::new();
    let mut runs = 0;
    for case in 0..200 {
        let (g, x0) = common::random_case(&mut rng, 6, None);
        covered.extend(common::ops_used(&g));
        for b in [8, 16, 32] {
            runs += 1;
            let f = fmt(b);
            let engine = run(&g, &RunConfig::new(x0, f));
            let twin = oracle_fixed_trace(&g, x0, f);
            let agree = match (&engine, &twin) {
                (Ok(r), Ok(t)) => {
                    r.per_node.len() == g.r()
                        && r.per_node.iter().all(|n| t[n.node] == (n.v_bits, n.d_bits))
                        && (r.value_bits, r.derivative_bits) == t[g.output()]
                }
                (Err(a), Err(b)) => a.kind() == b.kind() && a.node() == b.node(),
                _ => false,
            };
            if !agree {
                mismatches.push(format!("case {case} b={b} x0={x0}"));
            }
        }
    }
    let missing: Vec<_> = common::all_ops().difference(&covered).cloned().collect();
    let elapsed = start.elapsed();
    let pass = mismatches.is_empty() && missing.is_empty() && elapsed < Duration::from_secs(30);
    outcome(
        pass,
        format!(
            "{runs} runs, {} mismatches {:?}, uncovered ops {missing:?}, {elapsed:?}",
            mismatches.len(),
            mismatches.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

/// Both reset modes produce the same numbers; only swap consumes ancillas.
fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    let mut checked = 0;
    for case in 0..200 {
        let (g, x0) = common::random_case(&mut rng, 6, None);
        for b in [8, 16, 32] {
            let f = fmt(b);
            let swap = run(&g, &RunConfig::new(x0, f).reset_mode(ResetMode::Swap));
            let hybrid = run(&g, &RunConfig::new(x0, f).reset_mode(ResetMode::Hybrid));
            match (swap, hybrid) {
                (Ok(s), Ok(h)) => {
                    let same = s.per_node == h.per_node
                        && s.value_bits == h.value_bits
                        && s.derivative_bits == h.derivative_bits;
                    let want_anc = g.primitive_nodes() * f.width();
                    if !same || s.ancilla_used != want_anc || h.ancilla_used != 0 {
                        return outcome(
                            false,
                            format!(
                                "case {case} b={b}: same={same} swap ancillas {} (want {want_anc}) hybrid {}",
                                s.ancilla_used, h.ancilla_used
                            ),
                        );
                    }
                    checked += 1;
                }
                (Err(a), Err(b)) if a.kind() == b.kind() && a.node() == b.node() => {}
                _ => {
                    return outcome(
                        false,
                        format!("case {case} b={b}: modes disagree on failure"),
                    )
                }
            }
        }
    }
    outcome(true, format!("{checked} runs agree"))
}

/// Observed errors sit inside twice the first-order bound, and the bound
/// halves with each extra fractional bit.
fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let mut inside = 0usize;
    let mut considered = 0usize;
    let mut halving_checked = 0usize;
    for case in 0..200 {
        let (g, x0) = common::random_case(&mut rng, 6, Some(8));
        for b in [16u32, 24, 32] {
            let f = fmt(b);
            let report = error_bounds(&g, x0, f).unwrap();
            if report.max_sensitivity >= 1e3 {
                continue;
            }
            let Ok(res) = run(&g, &RunConfig::new(x0, f)) else {
                continue;
            };
            let exact = oracle_eval::<f64>(&g, x0).unwrap();
            considered += 1;
            let observed = (res.derivative - exact.d).abs();
            if observed <= 2.0 * report.bound_deriv {
                inside += 1;
            } else {
                return outcome(
                    false,
                    format!(
                        "case {case} b={b}: observed {observed:e} > 2 x bound {:e}",
                        report.bound_deriv
                    ),
                );
            }

            let next = error_bounds(&g, x0, fmt(b + 1)).unwrap();
            if report.bound_deriv > 0.0 {
                let bf = b as f64;
                let rho = (2.0 + (bf + 1.0).log2()) / (2.0 + bf.log2());
                let ratio = next.bound_deriv / report.bound_deriv;
                let tol = 1e-12;
                if ratio < 0.5 - tol || ratio > 0.5 * rho + tol {
                    return outcome(
                        false,
                        format!(
                            "case {case} b={b}: bound ratio {ratio} outside [0.5, {}]",
                            0.5 * rho
                        ),
                    );
                }
                halving_checked += 1;
            }
        }
    }
    outcome(
        considered > 0 && inside == considered,
        format!("{inside}/{considered} inside 2x bound, {halving_checked} halving checks"),
    )
}

/// Transfer and reset on random basis states.
fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    for trial in 0..1000 {
        let width = rng.gen_range(1..=64usize);
        let mask = if width == 64 {
            u64::MAX
        } else {
            (1u64 << width) - 1
        };
        let bits = rng.gen::<u64>() & mask;
        let init: String = (0..width)
            .rev()
            .map(|i| if bits >> i & 1 == 1 { '1' } else { '0' })
            .collect();

        let mut m = RegisterMachine::new(width, false);
        let src = m.alloc_register(width, &init).unwrap();
        let dst = m.alloc_zeroed(width).unwrap();
        m.apply_transfer(src, dst).unwrap();
        if m.bits(dst).unwrap() != bits || m.bits(src).unwrap() != bits {
            return outcome(false, format!("trial {trial}: transfer did not copy"));
        }
        for i in 0..width {
            m.cnot((src, i), (dst, i)).unwrap();
        }
        if !m.is_zero(dst).unwrap() {
            return outcome(
                false,
                format!("trial {trial}: second fan-out did not clear"),
            );
        }

        let a = m.alloc_register(width, &init).unwrap();
        m.reset_swap(a).unwrap();
        let b = m.alloc_register(width, &init).unwrap();
        let measured = m.reset_hybrid(b).unwrap();
        if !m.is_zero(a).unwrap() || !m.is_zero(b).unwrap() {
            return outcome(false, format!("trial {trial}: reset left bits set"));
        }
        if measured != init {
            return outcome(
                false,
                format!("trial {trial}: measured {measured} but register held {init}"),
            );
        }
    }
    outcome(true, "1000 basis states")
}

/// Cost bound and per-block CNOT counts.
fn criterion_7() -> Outcome {
    let g = build_graph(&parse(X_COS_LOG_X).unwrap());
    let costs = CostTable::default();
    let report = cost_estimate(&g, &costs);
    if report.r != 3 || report.total > report.bound {
        return outcome(false, format!("{report:?}"));
    }
    let f = fmt(16);
    let res = run(&g, &RunConfig::new(2.0, f)).unwrap();
    let mut blocks = 0;
    for block in &res.blocks {
        if !matches!(g.node(block.node).kind, NodeKind::Primitive(_)) {
            continue;
        }
        blocks += 1;
        let cnots = block.gates.get(&GateKind::Cnot).copied().unwrap_or(0);
        if cnots != f.width() as u64 {
            return outcome(
                false,
                format!("node {}: {cnots} CNOTs, width {}", block.node, f.width()),
            );
        }
    }
    outcome(
        blocks == 2,
        format!(
            "total {} <= r*c_max = {}*{} = {}, {blocks} blocks with {} CNOTs each",
            report.total,
            report.r,
            report.c_max,
            report.bound,
            f.width()
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let criteria: [(u32, fn() -> Outcome); 7] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
    ];
    let mut all = true;
    for (n, f) in criteria {
        let o = f();
        all &= o.pass;
        println!(
            "criterion {n}: {} - {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    let total = start.elapsed();
    let fast = total < Duration::from_secs(60);
    all &= fast;
    println!(
        "criterion 8: {} - full suite in {total:?}",
        if fast { "PASS" } else { "FAIL" }
    );
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
