//! Acceptance criteria, one PASS/FAIL line each. Expected values are computed here from closed
//! forms, independently of the library's own derivations.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fiatloan::game::{
    build_gamma1, build_gamma2, build_gamma3, build_gamma3_unchecked, default_grid, honest_profile, is_spe,
    quarter_grid, solve_spe, GameTree, NodeKind,
};
use fiatloan::model::{int, ratio, LoanParams, Price, PricePath, Rational};
use fiatloan::protocols::{
    chunk_principal, rho_b, rho_l, run_trace, scale_trace, settle, settle_pi2, step, LoanEvent, Phase,
    Protocol, TimedEvent, TraceBuilder,
};
use fiatloan::utxo::{build_chunked_collateral, realize_pi1_settlement, redistribute_chunks};

/// Criteria whose failure is the documented outcome: the first half of 6 states an inequality
/// that does not hold on the stated price band.
const EXPECTED_FAILURES: &[u32] = &[6];

const THEOREM1_BUDGET: Duration = Duration::from_secs(1);
const THEOREM2_BUDGET: Duration = Duration::from_secs(1);
const THEOREM3_BUDGET: Duration = Duration::from_secs(5);

fn price(n: i64, d: i64) -> Price {
    Price::new(ratio(n, d)).unwrap()
}

fn params(p0: Price, eps: Rational) -> LoanParams {
    LoanParams::new(p0, eps)
}

fn leaf_values(tree: &GameTree, labels: &[&str]) -> [Rational; 2] {
    let id = tree.follow(labels).unwrap_or_else(|| panic!("no node at {labels:?}"));
    match &tree.node(id).kind {
        NodeKind::Leaf { utilities, .. } => utilities.clone(),
        _ => panic!("{labels:?} is not a leaf"),
    }
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn ok(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn criterion1() -> Verdict {
    let start = Instant::now();
    let mut trees = 0;
    let mut bad = Vec::new();
    for eps in [ratio(1, 100), ratio(1, 10), ratio(1, 4)] {
        for delta in [ratio(1, 10), int(1), int(5)] {
            let ps = params(price(2, 1), eps.clone()).with_delta(delta.clone());
            for grid in [default_grid(&ps), quarter_grid(&ps)] {
                let tree = build_gamma1(&ps, &grid).unwrap();
                let v = is_spe(&tree, &honest_profile(&tree, &ps)).unwrap();
                trees += 1;
                if !v.is_spe || !v.witnesses.is_empty() || v.root_value != [int(0), int(0)] {
                    bad.push(format!("eps={eps} delta={delta} grid={}", grid.len()));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ok(bad.is_empty() && elapsed < THEOREM1_BUDGET, format!("{trees} trees, {elapsed:.2?}, failures {bad:?}"))
}

fn criterion2() -> Verdict {
    let start = Instant::now();
    let mut bad = Vec::new();
    let base = params(price(2, 1), ratio(1, 10)).with_delta(int(2));
    let y = int(1);
    for pt in [price(3, 2), price(5, 4), price(9, 8)] {
        let path = PricePath::evenly_spaced(vec![pt.clone()], &base.timeline);
        let tree = build_gamma2(&base, &path, &default_grid(&base)).unwrap();
        let sigma = honest_profile(&tree, &base);
        let v = is_spe(&tree, &sigma).unwrap();
        let expected = [int(0), &y * pt.value() - int(2)];
        let solved = solve_spe(&tree).unwrap();
        if !v.is_spe || v.root_value != expected || !solved.contains(&sigma) {
            bad.push(format!("p_t={pt}"));
        }
    }
    let ps = base.clone().with_queries(2);
    for pi in [price(9, 10), price(3, 4), price(1, 2)] {
        let path = PricePath::evenly_spaced(vec![price(2, 1), pi.clone()], &ps.timeline);
        let tree = build_gamma2(&ps, &path, &default_grid(&ps)).unwrap();
        let leaf = leaf_values(&tree, &["lend", "correct", "p=2", &format!("p={pi}")]);
        let v = is_spe(&tree, &honest_profile(&tree, &ps)).unwrap();
        let expected = [&y * pi.value() - int(1), int(1) - &y * pi.value()];
        if leaf != expected || !v.is_spe {
            bad.push(format!("E_L p_i={pi}"));
        }
    }
    let elapsed = start.elapsed();
    ok(bad.is_empty() && elapsed < THEOREM2_BUDGET, format!("{elapsed:.2?}, failures {bad:?}"))
}

fn criterion3() -> Verdict {
    let start = Instant::now();
    let ps = params(price(2, 1), ratio(1, 10));
    let rl = ps.p0.value() / (Rational::one() + &ps.epsilon * ps.p0.value());
    let rb = ps.p0.value() / (Rational::one() - &ps.epsilon * ps.p0.value());
    let p = |n, d| price(n, d);
    // (label, path) per profile family
    let cases: Vec<(&str, Vec<Price>)> = vec![
        ("no-event", vec![p(2, 1)]),
        ("no-event", vec![p(2, 1), p(2, 1), p(2, 1)]),
        ("no-event", vec![p(2, 1), p(9, 5), p(2, 1)]),
        ("E_L", vec![p(5, 3)]),
        ("E_L", vec![p(3, 2)]),
        ("E_L", vec![p(3, 2), p(3, 2), p(3, 2)]),
        ("E_B end>=rho_B", vec![p(5, 2)]),
        ("E_B end>=rho_B", vec![p(3, 1)]),
        ("E_B end>=rho_B", vec![p(5, 2), p(5, 2), p(5, 2)]),
        ("E_B end<rho_B", vec![p(5, 2), p(12, 5), p(12, 5)]),
    ];
    let mut bad = Vec::new();
    for (label, path) in &cases {
        let first = path[0].value();
        let last = path.last().unwrap().value();
        let shape_ok = match *label {
            "no-event" => path.iter().all(|x| x.value() > &rl && x.value() < &rb),
            "E_L" => first <= &rl,
            "E_B end>=rho_B" => first >= &rb && last >= &rb,
            _ => first >= &rb && last < &rb,
        };
        let tree = build_gamma3(&ps, path, path.len(), &default_grid(&ps)).unwrap();
        let sigma = honest_profile(&tree, &ps);
        let v = is_spe(&tree, &sigma).unwrap();
        let solved_ok = path.len() > 1 || solve_spe(&tree).unwrap().contains(&sigma);
        if !shape_ok || !v.is_spe || !solved_ok {
            bad.push(format!("{label} {:?}", path.iter().map(|x| x.to_string()).collect::<Vec<_>>()));
        }
    }
    let elapsed = start.elapsed();
    ok(bad.is_empty() && elapsed < THEOREM3_BUDGET, format!("{} trees, {elapsed:.2?}, failures {bad:?}", cases.len()))
}

fn criterion4() -> Verdict {
    let ps = params(price(2, 1), ratio(3, 4));
    let bound = Rational::one() / (int(2) * ps.p0.value());
    let rejected = build_gamma3(&ps, &[price(2, 1)], 1, &default_grid(&ps)).is_err();
    let tree = build_gamma3_unchecked(&ps, &[price(2, 1)], 1, &default_grid(&ps)).unwrap();
    let v = is_spe(&tree, &honest_profile(&tree, &ps)).unwrap();
    let w = v.witnesses.first().map(|w| format!("{} -> {} gains {}", w.player.name(), w.action, w.gain));
    ok(ps.epsilon > bound && rejected && !v.witnesses.is_empty(), format!("{} witnesses, first {w:?}", v.witnesses.len()))
}

fn random_pair(rng: &mut ChaCha8Rng) -> (Price, Rational) {
    let p0 = ratio(rng.gen_range(1..=60), rng.gen_range(1..=12));
    // 0 < eps * p0 < 1 and eps < 1
    let cap = if p0 > int(1) { Rational::one() / &p0 } else { int(1) };
    let eps = cap * ratio(rng.gen_range(1..=99), 100);
    (Price::new(p0).unwrap(), eps)
}

fn criterion5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad = 0;
    for _ in 0..50 {
        let (p0, eps) = random_pair(&mut rng);
        let ps = params(p0.clone(), eps.clone());
        let y = int(2) / p0.value();
        let rb = rho_b(&ps).unwrap();
        let rl = rho_l(&ps);
        let borrower = Rational::one() + (&y / int(2) - &eps) * rb.value();
        let lender = (&y / int(2) + &eps) * rl.value();
        if borrower != int(2) || lender != int(1) {
            bad += 1;
        }
    }
    ok(bad == 0, format!("50 pairs, {bad} mismatches"))
}

fn criterion6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut stated_fail = 0;
    let mut lender_side_fail = 0;
    let mut example = None;
    for _ in 0..10 {
        let (p0, eps) = random_pair(&mut rng);
        let y = int(2) / p0.value();
        let rl = p0.value() / (Rational::one() + &eps * p0.value());
        let rb = p0.value() / (Rational::one() - &eps * p0.value());
        for j in 1..=200 {
            let pi = &rl + (&rb - &rl) * ratio(j, 201);
            let lhs = Rational::one() + (&y / int(2) - &eps) * &pi;
            if lhs >= &y * &rl {
                stated_fail += 1;
                example.get_or_insert_with(|| format!("p0={p0} eps={eps} p_i={pi}"));
            }
            if lhs >= &y * &pi {
                lender_side_fail += 1;
            }
        }
    }
    // Observation 2 on oracle paths
    let ps = params(price(2, 1), ratio(1, 10));
    let y = int(2) / ps.p0.value();
    let mut alpha_fail = 0;
    let mut samples = 0;
    for path in fiatloan::scenario::random_paths(&ps, 6, 500) {
        for (_, p) in path.samples() {
            let v = &y * p.value();
            if v > int(1) && v < int(2) {
                samples += 1;
                if &y / int(2) * p.value() - int(1) <= ratio(-1, 2) {
                    alpha_fail += 1;
                }
            }
        }
    }
    ok(
        stated_fail == 0 && alpha_fail == 0,
        format!(
            "stated inequality fails at {stated_fail}/2000 points (e.g. {}); 1 + (y/2 - e)p_i < y p_i fails at {lender_side_fail}; alpha > -1/2 fails at {alpha_fail}/{samples}",
            example.unwrap_or_default()
        ),
    )
}

fn honest_p2_trace(ps: &LoanParams, path: &PricePath) -> Vec<TimedEvent> {
    let mut b = TraceBuilder::new(ps).opened();
    for (t, p) in path.samples() {
        if p.value() * int(2) < *ps.p0.value() {
            return b.query(t.clone(), p.clone()).build();
        }
        if ps.tau.as_ref().is_some_and(|tau| p >= tau) {
            b = b.spike(t.clone(), p.clone());
            return b.repay(ps.principal().clone()).lender_open().build();
        }
        b = b.query(t.clone(), p.clone());
    }
    b.repay(ps.principal().clone()).lender_open().build()
}

fn criterion7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bad = 0;
    let mut queries = 0;
    for _ in 0..1000 {
        let q = rng.gen_range(1..=12);
        let mut ps = params(price(2, 1), ratio(1, 10)).with_queries(q);
        if rng.gen_bool(0.3) {
            ps = ps.with_tau(price(rng.gen_range(9..=16), 4));
        }
        let prices = (0..q).map(|_| price(rng.gen_range(1..=60), 10)).collect();
        let path = PricePath::evenly_spaced(prices, &ps.timeline);
        let trace = honest_p2_trace(&ps, &path);
        let mut s = run_trace(Protocol::P2, &[], &ps).unwrap();
        let cap = int(2) * ps.principal();
        for ev in &trace {
            s = match step(&s, ev, &ps) {
                Ok(n) => n,
                Err(_) => {
                    bad += 1;
                    break;
                }
            };
            if let LoanEvent::OracleQuery(p) = &ev.event {
                queries += 1;
                if &s.contract_btc * p.value() > cap {
                    bad += 1;
                }
            }
            if !(s.fiat_total().is_zero() && s.btc_total().is_zero()) {
                bad += 1;
            }
        }
        if !s.phase.is_terminal() {
            bad += 1;
        }
    }
    ok(bad == 0, format!("1000 paths, {queries} queries, {bad} violations"))
}

fn check_leaves(tree: &GameTree, ps: &LoanParams, path: Option<&PricePath>) -> (usize, usize) {
    let mut n = 0;
    let mut bad = 0;
    for leaf in tree.leaves() {
        let NodeKind::Leaf { utilities, outcome, trace } = &leaf.kind else { continue };
        n += 1;
        let s = match (tree.protocol.unwrap(), path) {
            (Protocol::P2, Some(p)) => settle_pi2(trace, p, ps),
            (proto, _) => settle(proto, trace, ps),
        };
        match s {
            Ok(s) => {
                let (l, b) = s.game_utilities(ps);
                if [l, b] != *utilities || s.outcome != *outcome {
                    bad += 1;
                }
            }
            Err(_) => bad += 1,
        }
    }
    (n, bad)
}

fn criterion8() -> Verdict {
    let ps = params(price(2, 1), ratio(1, 10));
    let mut leaves = 0;
    let mut bad = 0;
    let mut utxo_bad = 0;
    for grid in [default_grid(&ps), quarter_grid(&ps)] {
        let t = build_gamma1(&ps, &grid).unwrap();
        let (n, b) = check_leaves(&t, &ps, None);
        leaves += n;
        bad += b;
        for leaf in t.leaves() {
            if let NodeKind::Leaf { trace, .. } = &leaf.kind {
                if !realize_pi1_settlement(trace, &ps).map(|r| r.matches()).unwrap_or(false) {
                    utxo_bad += 1;
                }
            }
        }
        for prices in [vec![price(2, 1)], vec![price(3, 2), price(9, 10)], vec![price(9, 4), price(2, 1), price(5, 4)]] {
            let p2 = ps.clone().with_queries(prices.len() as u32);
            let path = PricePath::evenly_spaced(prices, &p2.timeline);
            let t = build_gamma2(&p2, &path, &grid).unwrap();
            let (n, b) = check_leaves(&t, &p2, Some(&path));
            leaves += n;
            bad += b;
        }
        let spiked = ps.clone().with_tau(price(3, 1)).with_queries(2);
        let path = PricePath::evenly_spaced(vec![price(3, 1), price(2, 1)], &spiked.timeline);
        let t = build_gamma2(&spiked, &path, &grid).unwrap();
        let (n, b) = check_leaves(&t, &spiked, Some(&path));
        leaves += n;
        bad += b;
        for path in [vec![price(2, 1)], vec![price(3, 2)], vec![price(5, 2), price(12, 5), price(12, 5)]] {
            let t = build_gamma3(&ps, &path, path.len(), &grid).unwrap();
            let (n, b) = check_leaves(&t, &ps, None);
            leaves += n;
            bad += b;
        }
    }
    ok(bad == 0 && utxo_bad == 0, format!("{leaves} leaves, {bad} settlement mismatches, {utxo_bad} utxo mismatches"))
}

fn sum3(a: &mut [Rational; 3], b: &[Rational; 3]) {
    for i in 0..3 {
        a[i] += &b[i];
    }
}

fn criterion9() -> Verdict {
    let ps = params(price(2, 1), ratio(1, 10));
    let mut traces: Vec<(Protocol, Vec<TimedEvent>)> = Vec::new();
    let t1 = build_gamma1(&ps, &quarter_grid(&ps)).unwrap();
    for leaf in t1.leaves() {
        if let NodeKind::Leaf { trace, .. } = &leaf.kind {
            traces.push((Protocol::P1, trace.clone()));
        }
    }
    let t3 = build_gamma3(&ps, &[price(3, 2)], 1, &quarter_grid(&ps)).unwrap();
    for leaf in t3.leaves() {
        if let NodeKind::Leaf { trace, .. } = &leaf.kind {
            traces.push((Protocol::P3, trace.clone()));
        }
    }
    let mut linear_bad = 0;
    for k in [1u32, 2, 4] {
        let chunks = chunk_principal(&ps, k).unwrap();
        for (proto, trace) in &traces {
            let whole = settle(*proto, trace, &ps).unwrap();
            let scaled = scale_trace(trace, k);
            let mut fiat = [int(0), int(0), int(0)];
            let mut btc = [int(0), int(0), int(0)];
            let mut util = [int(0), int(0), int(0)];
            for c in &chunks {
                let s = settle(*proto, &scaled, c).unwrap();
                sum3(&mut fiat, &s.fiat);
                sum3(&mut btc, &s.btc);
                sum3(&mut util, &s.utilities);
            }
            if fiat != whole.fiat || btc != whole.btc || util != whole.utilities {
                linear_bad += 1;
            }
        }
    }

    // chunked redistribution against the exact one, query by query
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut gap_bad = 0;
    let mut checked = 0;
    for k in [2usize, 4] {
        for _ in 0..100 {
            let q = rng.gen_range(1..=12);
            let pq = ps.clone().with_queries(q);
            let mut state = run_trace(Protocol::P2, &TraceBuilder::new(&pq).opened().build(), &pq).unwrap();
            let mut main = build_chunked_collateral(&pq.y(), k).unwrap();
            let mut temp = Vec::new();
            let chunk = pq.y().0 / int(k as i64);
            for i in 0..q {
                let p = price(rng.gen_range(11..=60), 10);
                let t = &pq.timeline.t_star + int(12) * ratio(i as i64 + 1, q as i64);
                state = step(&state, &TimedEvent::new(t, LoanEvent::OracleQuery(p.clone())), &pq).unwrap();
                (main, temp) = redistribute_chunks(&main, &temp, &p, &pq).unwrap();
                if state.phase != Phase::Active && state.phase != Phase::Repayment {
                    break;
                }
                let chunked: Rational = main.iter().map(|o| o.value.value().clone()).sum();
                checked += 1;
                if (&state.contract_btc - chunked).abs() > chunk {
                    gap_bad += 1;
                }
            }
        }
    }
    ok(
        linear_bad == 0 && gap_bad == 0,
        format!("{} traces x k in {{1,2,4}}: {linear_bad} mismatches; {checked} queries: {gap_bad} outside y/k", traces.len()),
    )
}

fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn criterion10() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_fiatloan");
    let mut files: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    let mut bad = Vec::new();
    for f in &files {
        for format in ["text", "csv", "json"] {
            let run = || {
                Command::new(bin)
                    .args(["verify", "--scenario"])
                    .arg(f)
                    .args(["--format", format])
                    .env("NO_COLOR", "1")
                    .output()
                    .unwrap()
            };
            let (a, b) = (run(), run());
            if a.stdout != b.stdout || a.status.code() != b.status.code() {
                bad.push(format!("{} {format}: nondeterministic", f.display()));
            }
            if format == "csv" {
                let text = String::from_utf8_lossy(&a.stdout);
                let failed = text.lines().any(|l| l.starts_with("check,") && l.split(',').nth(2) == Some("FAIL"));
                if failed != (a.status.code() != Some(0)) {
                    bad.push(format!("{}: exit {:?} vs failed={failed}", f.display(), a.status.code()));
                }
            }
        }
    }
    let invalid = std::env::temp_dir().join("fiatloan_invalid_scenario.json");
    std::fs::write(&invalid, r#"{"name":"x","protocol":"P1","params":{"p0":"1/0","epsilon":"1/10"}}"#).unwrap();
    let out = Command::new(bin).args(["simulate", "--scenario"]).arg(&invalid).output().unwrap();
    if out.status.success() {
        bad.push("invalid rational accepted".into());
    }
    ok(bad.is_empty() && files.len() >= 5, format!("{} scenarios, issues {bad:?}", files.len()))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 10] = [
        (1, "flat-rate equilibrium", criterion1),
        (2, "oracle equilibrium", criterion2),
        (3, "oracle-free equilibrium", criterion3),
        (4, "epsilon hypothesis is load-bearing", criterion4),
        (5, "threshold identities", criterion5),
        (6, "corollary and alpha sweeps", criterion6),
        (7, "collateral cap and conservation", criterion7),
        (8, "leaves equal settlements", criterion8),
        (9, "chunking linearity", criterion9),
        (10, "cli determinism and exit codes", criterion10),
    ];
    let mut unexpected = Vec::new();
    for (n, name, f) in criteria {
        let o = f();
        println!("criterion {n:>2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if o.pass == EXPECTED_FAILURES.contains(&n) {
            unexpected.push(n);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected results for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
