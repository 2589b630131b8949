use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::game::{
    build_gamma1, build_gamma2, build_gamma3, build_gamma3_unchecked, export_dot, honest_profile, is_spe,
    BuildError, GameTree, NodeKind, SolveError, SpeVerdict, StrategyProfile,
};
use crate::model::{fmt_rational, int, ratio, LoanParams, Price, PricePath, Rational};
use crate::protocols::{
    rho_b, rho_l, run_trace, settle, settle_pi2, step, LoanEvent, Outcome, Party, Phase, Protocol, SettleError,
    Settlement, ThresholdError, TimedEvent, TraceBuilder,
};
use crate::utxo::{realize_pi1_settlement, spend_matrix, RealizeError};

use super::file::{validate_checks, Check, Scenario, ScenarioError};
use super::report::{CheckOutcome, Report, Table};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("game construction failed: {0}")]
    Build(#[from] BuildError),
    #[error("solver failed: {0}")]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Settle(#[from] SettleError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error("utxo replay failed: {0}")]
    Realize(#[from] RealizeError),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Checks to run instead of those listed in the scenario.
    pub checks: Option<Vec<Check>>,
    /// Adds a randomized price-path sweep to the `observations` check.
    pub seed: Option<u64>,
}

fn pair(v: &[Rational; 2]) -> String {
    format!("({}, {})", fmt_rational(&v[0]), fmt_rational(&v[1]))
}

pub fn thresholds(params: &LoanParams) -> Result<Table, ThresholdError> {
    let rb = rho_b(params)?;
    let rl = rho_l(params);
    let y = params.y().0;
    let mut t = Table::new("thresholds", &["name", "value"]);
    t.row(&["pi2_liquidation_price", &fmt_rational(&(params.p0.value() / int(2)))]);
    t.row(&["rho_l", &rl.to_string()]);
    t.row(&["rho_b", &rb.to_string()]);
    t.row(&["tau", &params.tau.as_ref().map_or("unset".to_string(), |p| p.to_string())]);
    let delta_bound = int(2) * (rl.value() * &y / int(2) - params.principal());
    t.row(&["delta_bound", &fmt_rational(&delta_bound)]);
    t.row(&["epsilon_bound", &fmt_rational(&(Rational::one() / (int(2) * params.p0.value())))]);
    Ok(t)
}

fn params_table(sc: &Scenario) -> Table {
    let p = &sc.params;
    let mut t = Table::new("parameters", &["name", "value"]);
    t.row(&["principal", &fmt_rational(p.principal())]);
    t.row(&["p0", &p.p0.to_string()]);
    t.row(&["y", &fmt_rational(&p.y().0)]);
    t.row(&["epsilon", &fmt_rational(&p.epsilon)]);
    t.row(&["epsilon_prime", &p.epsilon_prime.as_ref().map_or("default".to_string(), fmt_rational)]);
    t.row(&["delta", &fmt_rational(&p.delta)]);
    t.row(&["queries", &p.q.to_string()]);
    let path: Vec<String> = sc.prices.iter().map(|x| x.to_string()).collect();
    t.row(&["price_path", &path.join(" ")]);
    t
}

/// The game tree a scenario induces.
pub fn scenario_tree(sc: &Scenario) -> Result<GameTree, RunError> {
    Ok(match sc.protocol {
        Protocol::P1 => build_gamma1(&sc.params, &sc.grid)?,
        Protocol::P2 => build_gamma2(&sc.params, &sc.oracle_path(), &sc.grid)?,
        Protocol::P3 => build_gamma3_unchecked(&sc.params, &sc.prices, sc.prices.len(), &sc.grid)?,
    })
}

/// Leaf reached when everyone follows `profile` (Nature takes its most likely edge).
pub fn play(tree: &GameTree, profile: &StrategyProfile) -> Result<usize, SolveError> {
    let mut id = tree.root;
    loop {
        match &tree.node(id).kind {
            NodeKind::Leaf { .. } => return Ok(id),
            NodeKind::Nature { edges } => {
                let mut best = &edges[0];
                for e in edges {
                    if e.1 > best.1 {
                        best = e;
                    }
                }
                id = best.2;
            }
            NodeKind::Decision { info_set, actions, .. } => {
                let label = profile.get(info_set).ok_or(SolveError::IncompleteProfile(*info_set))?;
                id = actions
                    .iter()
                    .find(|a| &a.0 == label)
                    .ok_or(SolveError::IncompleteProfile(*info_set))?
                    .1;
            }
        }
    }
}

fn settle_scenario(sc: &Scenario, trace: &[TimedEvent]) -> Result<Settlement, SettleError> {
    match sc.protocol {
        Protocol::P2 => settle_pi2(trace, &sc.oracle_path(), &sc.params),
        p => settle(p, trace, &sc.params),
    }
}

fn settlement_tables(sc: &Scenario, trace: &[TimedEvent], s: &Settlement) -> Vec<Table> {
    let mut ev = Table::new("trace", &["time", "event"]);
    for e in trace {
        let line = e.to_string();
        let (_, rest) = line.split_once(' ').unwrap_or(("", &line));
        ev.row(&[fmt_rational(&e.time), rest.to_string()]);
    }
    let mut t = Table::new("settlement", &["party", "fiat", "btc", "gross", "utility"]);
    for p in Party::ALL {
        let i = p.index();
        t.row(&[
            p.name().to_string(),
            fmt_rational(&s.fiat[i]),
            fmt_rational(&s.btc[i]),
            fmt_rational(&s.gross[i]),
            fmt_rational(&s.utilities[i]),
        ]);
    }
    let (ul, ub) = s.game_utilities(&sc.params);
    let mut o = Table::new("outcome", &["name", "value"]);
    o.row(&["outcome", &s.outcome.to_string()]);
    o.row(&["terminal_price", &s.terminal_price.to_string()]);
    o.row(&["baseline_price", &s.baseline_price.to_string()]);
    o.row(&["game_utilities", &pair(&[ul, ub])]);
    vec![ev, t, o]
}

/// Parameters, thresholds and the settlement of the scenario's trace (or of the prescribed play).
pub fn simulate(sc: &Scenario) -> Result<Report, RunError> {
    let mut r = Report::new(&sc.name, &sc.protocol.to_string());
    r.tables.push(params_table(sc));
    match thresholds(&sc.params) {
        Ok(t) => r.tables.push(t),
        Err(e) => {
            let mut t = Table::new("thresholds", &["name", "value"]);
            t.row(&["error", &e.to_string()]);
            r.tables.push(t);
        }
    }
    let trace = match &sc.trace {
        Some(t) => t.clone(),
        None => {
            let tree = scenario_tree(sc)?;
            let leaf = play(&tree, &honest_profile(&tree, &sc.params))?;
            match &tree.node(leaf).kind {
                NodeKind::Leaf { trace, .. } => trace.clone(),
                _ => unreachable!("play ends at a leaf"),
            }
        }
    };
    let s = settle_scenario(sc, &trace)?;
    r.tables.extend(settlement_tables(sc, &trace, &s));
    Ok(r)
}

/// [`simulate`] plus the requested checks.
pub fn run(sc: &Scenario, opts: &RunOptions) -> Result<Report, RunError> {
    let checks = opts.checks.clone().unwrap_or_else(|| sc.checks.clone());
    validate_checks(&checks, sc.protocol)?;
    let mut r = simulate(sc)?;
    for c in checks {
        r.checks.push(run_check(sc, c, opts.seed)?);
    }
    Ok(r)
}

pub fn run_check(sc: &Scenario, check: Check, seed: Option<u64>) -> Result<CheckOutcome, RunError> {
    Ok(match check {
        Check::Theorem1 => {
            let tree = build_gamma1(&sc.params, &sc.grid)?;
            let v = is_spe(&tree, &honest_profile(&tree, &sc.params))?;
            let root_ok = v.root_value == [Rational::zero(), Rational::zero()];
            spe_outcome(check, v.is_spe && root_ok, &tree, &v)
        }
        Check::Theorem2 => {
            let tree = build_gamma2(&sc.params, &sc.oracle_path(), &sc.grid)?;
            let v = is_spe(&tree, &honest_profile(&tree, &sc.params))?;
            spe_outcome(check, v.is_spe, &tree, &v)
        }
        Check::Theorem3 => match build_gamma3(&sc.params, &sc.prices, sc.prices.len(), &sc.grid) {
            Ok(tree) => {
                let v = is_spe(&tree, &honest_profile(&tree, &sc.params))?;
                spe_outcome(check, v.is_spe, &tree, &v)
            }
            Err(BuildError::Params(e)) => {
                let tree = build_gamma3_unchecked(&sc.params, &sc.prices, sc.prices.len(), &sc.grid)?;
                let v = is_spe(&tree, &honest_profile(&tree, &sc.params))?;
                spe_outcome(check, false, &tree, &v).detail("hypothesis", e)
            }
            Err(e) => return Err(e.into()),
        },
        Check::Corollary1 => corollary1(&sc.params, 200)?,
        Check::Observations => observations(&sc.params, &sc.oracle_path(), seed),
        Check::UtxoEquivalence => {
            let tree = build_gamma1(&sc.params, &sc.grid)?;
            let mut leaves = 0;
            let mut mismatches = 0;
            for leaf in tree.leaves() {
                if let NodeKind::Leaf { trace, .. } = &leaf.kind {
                    leaves += 1;
                    if !realize_pi1_settlement(trace, &sc.params)?.matches() {
                        mismatches += 1;
                    }
                }
            }
            CheckOutcome::new(check.name(), mismatches == 0)
                .detail("leaves", leaves)
                .detail("mismatches", mismatches)
        }
    })
}

fn spe_outcome(check: Check, pass: bool, tree: &GameTree, v: &SpeVerdict) -> CheckOutcome {
    let mut c = CheckOutcome::new(check.name(), pass)
        .detail("nodes", tree.len())
        .detail("is_spe", v.is_spe)
        .detail("root_value", pair(&v.root_value))
        .detail("witnesses", v.witnesses.len());
    for w in v.witnesses.iter().take(5) {
        c = c.detail(
            "witness",
            format!("node {} {} -> {} gains {}", w.subgame_root, w.player.name(), w.action, fmt_rational(&w.gain)),
        );
    }
    c
}

/// Checks `1 + (y/2 - e) p < y rho_L` on `n` evenly spaced prices strictly between `rho_L` and
/// `rho_B`, alongside the lender-side form `1 + (y/2 - e) p < y p`.
pub fn corollary1(params: &LoanParams, n: i64) -> Result<CheckOutcome, ThresholdError> {
    let rl = rho_l(params).into_value();
    let rb = rho_b(params)?.into_value();
    let y = params.y().0;
    let e = params.penalty();
    let principal = params.principal();
    let mut stated = 0;
    let mut lender_side = 0;
    let mut first_violation = None;
    for j in 1..=n {
        let p = &rl + (&rb - &rl) * ratio(j, n + 1);
        let lhs = principal + (&y / int(2) - &e) * &p;
        if lhs < &y * &rl {
            stated += 1;
        } else if first_violation.is_none() {
            first_violation = Some(p.clone());
        }
        if lhs < &y * &p {
            lender_side += 1;
        }
    }
    let mut c = CheckOutcome::new(Check::Corollary1.name(), stated == n)
        .detail("grid_points", n)
        .detail("stated_form_holds", stated)
        .detail("lender_side_form_holds", lender_side);
    if let Some(p) = first_violation {
        c = c.detail("first_violation_price", fmt_rational(&p));
    }
    Ok(c)
}

/// Result of replaying one oracle path through the P2 machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathObservation {
    /// Contract value never exceeded `2P` after a query.
    pub capped: bool,
    /// `alpha > -P/2` whenever `P < y p < 2P`.
    pub alpha_bounded: bool,
    /// Liquidation happened exactly when a query fell below `p0/2` while the loan was active.
    pub liquidation_consistent: bool,
    pub conserved: bool,
}

pub fn observe_path(params: &LoanParams, path: &PricePath) -> PathObservation {
    let params = &params.clone().with_queries(path.len() as u32);
    let trace = TraceBuilder::new(params).opened().build();
    let mut s = run_trace(Protocol::P2, &trace, params).expect("opening trace is admissible");
    let y = params.y().0;
    let principal = params.principal();
    let cap = principal * int(2);
    let mut obs = PathObservation { capped: true, alpha_bounded: true, liquidation_consistent: true, conserved: true };
    for (t, p) in path.samples() {
        let v = &y * p.value();
        if &v > principal && v < cap {
            let alpha = &y / int(2) * p.value() - principal;
            obs.alpha_bounded &= alpha > -(principal / int(2));
        }
        if s.phase != Phase::Active {
            continue;
        }
        let below = p.value() * int(2) < *params.p0.value();
        match step(&s, &TimedEvent::new(t.clone(), LoanEvent::OracleQuery(p.clone())), params) {
            Ok(next) => s = next,
            Err(_) => {
                obs.conserved = false;
                break;
            }
        }
        obs.capped &= &s.contract_btc * p.value() <= cap;
        obs.conserved &= s.fiat_total().is_zero() && s.btc_total().is_zero();
        let liquidated = matches!(s.outcome, Some(Outcome::LenderLiquidation { .. }));
        obs.liquidation_consistent &= liquidated == below;
    }
    obs
}

/// Random oracle paths with up to 12 queries and prices between `p0/10` and `3 p0`.
pub fn random_paths(params: &LoanParams, seed: u64, count: usize) -> Vec<PricePath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let q = rng.gen_range(1..=12);
            let prices = (0..q)
                .map(|_| Price::new(params.p0.value() * ratio(rng.gen_range(1..=60), 20)).expect("positive"))
                .collect();
            PricePath::evenly_spaced(prices, &params.timeline)
        })
        .collect()
}

fn observations(params: &LoanParams, path: &PricePath, seed: Option<u64>) -> CheckOutcome {
    let mut paths = vec![path.clone()];
    if let Some(s) = seed {
        paths.extend(random_paths(params, s, 200));
    }
    let obs: Vec<PathObservation> = paths.iter().map(|p| observe_path(params, p)).collect();
    let count = |f: fn(&PathObservation) -> bool| obs.iter().filter(|o| f(o)).count();
    let capped = count(|o| o.capped);
    let alpha = count(|o| o.alpha_bounded);
    let liq = count(|o| o.liquidation_consistent);
    let conserved = count(|o| o.conserved);
    let n = obs.len();
    let threshold_ok = params.y().0 * params.p0.value() / int(2) == *params.principal();
    CheckOutcome::new(Check::Observations.name(), [capped, alpha, liq, conserved].iter().all(|&c| c == n) && threshold_ok)
        .detail("paths", n)
        .detail("value_capped", capped)
        .detail("alpha_bounded", alpha)
        .detail("liquidation_at_half_p0", liq)
        .detail("conserved", conserved)
        .detail("collateral_worth_principal_at_half_p0", threshold_ok)
}

/// DOT rendering of the scenario's game with the prescribed profile highlighted, and a summary.
pub fn game_export(sc: &Scenario) -> Result<(String, Report), RunError> {
    let tree = scenario_tree(sc)?;
    let profile = honest_profile(&tree, &sc.params);
    let dot = export_dot(&tree, Some(&profile));
    let mut r = Report::new(&sc.name, &sc.protocol.to_string());
    let mut t = Table::new("game", &["name", "value"]);
    t.row(&["nodes", &tree.len().to_string()]);
    t.row(&["edges", &tree.edge_count().to_string()]);
    t.row(&["leaves", &tree.leaves().count().to_string()]);
    t.row(&["info_sets", &tree.info_sets().len().to_string()]);
    let v = is_spe(&tree, &profile)?;
    t.row(&["profile_is_spe", &v.is_spe.to_string()]);
    t.row(&["root_value", &pair(&v.root_value)]);
    r.tables.push(t);
    Ok((dot, r))
}

pub fn tx_matrix(sc: &Scenario) -> Report {
    let (header, rows) = spend_matrix(&sc.params);
    let mut r = Report::new(&sc.name, &sc.protocol.to_string());
    let head: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut t = Table::new("spend_matrix", &head);
    for row in rows {
        t.row(&row);
    }
    r.tables.push(t);
    r
}
