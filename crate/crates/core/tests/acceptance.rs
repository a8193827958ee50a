//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::f64::consts::E;
use std::io::Write;

use dapb::cxlinalg::CVector;
use dapb::metrics::{wsee_value, BeamState};
use dapb::orchestrators::{
    centralized_overhead, dapb_overhead, full_dapb_overhead, gradient_clean, init_beams,
    noncooperative_overhead, run_centralized, run_dapb, run_noncooperative, ArmijoParams,
    GradientMode, MONOTONE_SLACK,
};
use dapb::peruser::{
    lambert_w0, solve_full_rank, FullRankCoefficients, KktCase, PowerSplit, SplitProblem,
};
use dapb::pricing::feedback_sets;
use dapb::scenario::{NetworkScenario, Regime, SimConfig};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "[{verdict}] {id} {name}: {detail}").unwrap();
}

fn config(k: usize, pmax_dbm: f64) -> SimConfig {
    SimConfig {
        num_pairs: k,
        num_antennas: 4,
        pmax_dbm,
        ..SimConfig::default()
    }
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo..hi))
}

fn split_problem(rng: &mut impl Rng) -> SplitProblem {
    SplitProblem {
        g1: log_uniform(rng, -2.0, 2.5),
        g2: log_uniform(rng, -2.0, 2.5),
        g3: log_uniform(rng, -4.0, 1.0),
        static_power: log_uniform(rng, -1.0, 1.0),
        power_cap: log_uniform(rng, -1.0, 2.0),
    }
}

fn median(mut v: Vec<usize>) -> f64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

#[test]
fn solver_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let full: Vec<FullRankCoefficients> = (0..1000)
        .map(|_| FullRankCoefficients {
            gain: log_uniform(&mut rng, -2.0, 3.0),
            price: log_uniform(&mut rng, -4.0, 1.0),
            power_cap: log_uniform(&mut rng, -1.0, 2.0),
            static_power: log_uniform(&mut rng, -1.0, 1.0),
        })
        .collect();
    let split: Vec<SplitProblem> = (0..1000).map(|_| split_problem(&mut rng)).collect();

    let full_worst = full
        .par_iter()
        .map(|c| {
            let n = 100_000;
            let grid = (0..n)
                .map(|i| c.objective(c.power_cap * i as f64 / (n - 1) as f64))
                .fold(f64::NEG_INFINITY, f64::max);
            let (p, _) = solve_full_rank(c);
            (grid - c.objective(p)) / grid.abs().max(f64::MIN_POSITIVE)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);

    let split_worst = split
        .par_iter()
        .map(|p| {
            let n = 400;
            let step = p.power_cap / (n - 1) as f64;
            let mut grid = f64::NEG_INFINITY;
            for i in 0..n {
                for j in 0..(n - i) {
                    grid = grid.max(p.objective(PowerSplit {
                        p1: i as f64 * step,
                        p2: j as f64 * step,
                    }));
                }
            }
            let s = p.solve();
            assert!(s.split.p1 >= 0.0 && s.split.p2 >= 0.0);
            assert!(s.split.total() <= p.power_cap + 1e-9);
            (grid - p.objective(s.split)) / grid.abs().max(f64::MIN_POSITIVE)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);

    let pass = full_worst <= 1e-4 && split_worst <= 1e-4;
    report(
        1,
        "solver vs grid oracle",
        pass,
        format!("worst relative shortfall full-rank {full_worst:.2e}, rank-deficient {split_worst:.2e} (limit 1e-4)"),
    );
    assert!(pass);
}

#[test]
fn best_response_is_monotone() {
    let cases: Vec<(usize, u64)> = [4usize, 10, 20]
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| {
            let n = if i == 2 { 166 } else { 167 };
            (0..n).map(move |t| (k, t))
        })
        .collect();
    assert_eq!(cases.len(), 500);
    let results: Vec<(f64, bool)> = cases
        .par_iter()
        .map(|&(k, t)| {
            let s = NetworkScenario::generate(&config(k, 33.0), t).unwrap();
            let r = run_dapb(&s, Regime::Full, &init_beams(&s), 1e-3, 200);
            (r.worst_decrease(), r.overhead_scalars == full_dapb_overhead(r.iterations, k))
        })
        .collect();
    let violations = results.iter().filter(|(d, _)| *d > MONOTONE_SLACK).count();
    let worst = results.iter().map(|(d, _)| *d).fold(0.0, f64::max);
    let overhead_ok = results.iter().all(|(_, ok)| *ok);
    let pass = violations == 0 && overhead_ok;
    report(
        2,
        "WS-EE trace monotone",
        pass,
        format!("{violations} violations in 500 trials, largest drop {worst:.2e}"),
    );
    assert!(pass);
}

#[test]
fn convergence_speed() {
    let mut details = Vec::new();
    let mut pass = true;
    for k in [4usize, 10, 20] {
        let iters: Vec<usize> = (0..100u64)
            .into_par_iter()
            .map(|t| {
                let s = NetworkScenario::generate(&config(k, 33.0), t).unwrap();
                run_dapb(&s, Regime::Full, &init_beams(&s), 1e-3, 200).iterations
            })
            .collect();
        let m = median(iters);
        pass &= m <= 20.0;
        details.push(format!("K={k}: {m}"));
    }
    for pmax in [-20.0, -10.0, 0.0, 10.0, 20.0, 30.0, 40.0] {
        let iters: Vec<usize> = (0..100u64)
            .into_par_iter()
            .map(|t| {
                let s = NetworkScenario::generate(&config(10, pmax), t).unwrap();
                run_dapb(&s, Regime::Full, &init_beams(&s), 1e-3, 200).iterations
            })
            .collect();
        let m = median(iters);
        pass &= m <= 20.0;
        details.push(format!("K=10 {pmax} dBm: {m}"));
    }
    report(3, "median outer iterations <= 20", pass, details.join(", "));
    assert!(pass);
}

#[test]
fn pricing_beats_selfishness() {
    let pairs: Vec<(f64, f64)> = (0..200u64)
        .into_par_iter()
        .map(|t| {
            let s = NetworkScenario::generate(&config(20, 33.0), t).unwrap();
            let init = init_beams(&s);
            let priced = run_dapb(&s, Regime::Full, &init, 1e-3, 200).final_wsee();
            let selfish = run_noncooperative(&s, &init, 1e-3, 200).final_wsee();
            (priced, selfish)
        })
        .collect();
    let priced = pairs.iter().map(|p| p.0).sum::<f64>() / 200.0;
    let selfish = pairs.iter().map(|p| p.1).sum::<f64>() / 200.0;
    let gap = priced / selfish - 1.0;
    let pass = gap > 0.05;
    report(
        4,
        "priced vs selfish at K=20",
        pass,
        format!("mean WS-EE {priced:.4e} vs {selfish:.4e}, relative gap {:.1}%", 100.0 * gap),
    );
    assert!(pass);
}

#[test]
fn overhead_exactness() {
    let mut pass = centralized_overhead(5, 4) == 240 && centralized_overhead(20, 4) == 3360;
    let mut runs = 0;
    for (k, t) in [(5usize, 0u64), (5, 1), (12, 2)] {
        let s = NetworkScenario::generate(&config(k, 33.0), t).unwrap();
        let init = init_beams(&s);
        let full = run_dapb(&s, Regime::Full, &init, 1e-3, 200);
        pass &= full.overhead_scalars == (full.iterations * k * k) as u64;
        let limited = run_dapb(&s, Regime::Limited, &init, 1e-3, 200);
        let n_k: Vec<usize> = feedback_sets(&s, Regime::Limited).iter().map(Vec::len).collect();
        pass &= limited.overhead_scalars == dapb_overhead(limited.iterations, &n_k);
        pass &= limited.overhead_scalars
            == (limited.iterations * n_k.iter().sum::<usize>()) as u64;
        let selfish = run_noncooperative(&s, &init, 1e-3, 200);
        pass &= selfish.overhead_scalars == noncooperative_overhead(selfish.iterations, k);
        pass &= selfish.overhead_scalars == (selfish.iterations * k) as u64;
        let central = run_centralized(&s, &init, &ArmijoParams::default(), GradientMode::Clean);
        pass &= central.overhead_scalars == (2 * k * k * 4 + 2 * k * 4) as u64;
        runs += 4;
    }
    report(
        5,
        "overhead counters",
        pass,
        format!("centralized (5,4)={} (20,4)={}, {runs} runs checked", centralized_overhead(5, 4), centralized_overhead(20, 4)),
    );
    assert!(pass);
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst: f64 = 0.0;
    for state_index in 0..50u64 {
        let s = NetworkScenario::generate(&config(4, 33.0), state_index).unwrap();
        let beams = (0..4)
            .map(|k| {
                let v = CVector(
                    (0..4)
                        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                        .collect(),
                );
                v.scale((rng.random_range(0.05..1.0) * s.pmax_w[k]).sqrt() / v.norm())
            })
            .collect();
        let st = BeamState::new(&s, beams);
        let g = gradient_clean(&s, &st);
        let h = 1e-6;
        let (mut err, mut norm) = (0.0, 0.0);
        for k in 0..4 {
            for i in 0..4 {
                for unit in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                    let at = |sign: f64| {
                        let mut beams = st.beams().to_vec();
                        beams[k][i] += unit * (sign * h);
                        wsee_value(&s, &BeamState::new(&s, beams), Regime::Full)
                    };
                    let fd = (at(1.0) - at(-1.0)) / (2.0 * h);
                    let exact = 2.0 * (unit.conj() * g[k][i]).re;
                    err += (fd - exact).powi(2);
                    norm += exact.powi(2);
                }
            }
        }
        worst = worst.max(err.sqrt() / norm.sqrt());
    }
    let pass = worst <= 1e-5;
    report(6, "gradient vs central differences", pass, format!("worst relative error {worst:.2e} over 50 states"));
    assert!(pass);
}

#[test]
fn lambert_identities() {
    let branch = -1.0 / E;
    let mut points = Vec::with_capacity(10_000);
    // (-1/e, 0) by offset from the branch point, then (0, 1e6]
    for i in 0..5000 {
        let t = -15.0 + (branch.abs().log10() + 15.0) * i as f64 / 5000.0;
        points.push(branch + 10f64.powf(t));
    }
    for i in 0..5000 {
        points.push(10f64.powf(-15.0 + 21.0 * i as f64 / 4999.0));
    }
    let worst = points
        .iter()
        .map(|&x| {
            let r = lambert_w0(x).unwrap();
            assert!(r >= -1.0);
            (r * r.exp() - x).abs() / x.abs()
        })
        .fold(0.0, f64::max);
    let exact = (lambert_w0(0.0).unwrap() - 0.0).abs() <= 1e-10
        && (lambert_w0(E).unwrap() - 1.0).abs() <= 1e-10
        && (lambert_w0(branch).unwrap() + 1.0).abs() <= 1e-10;
    let domain = lambert_w0(branch - 1e-9).is_err();
    let pass = worst <= 1e-12 && exact && domain;
    report(
        7,
        "Lambert W",
        pass,
        format!("worst relative residual {worst:.2e} over {} points, identities {exact}", points.len()),
    );
    assert!(pass);
}

#[test]
fn saturation_shape() {
    let grid = [-20.0, -10.0, 0.0, 10.0, 20.0, 30.0, 40.0];
    let means: Vec<(f64, f64)> = grid
        .iter()
        .map(|&pmax| {
            let runs: Vec<(f64, f64)> = (0..200u64)
                .into_par_iter()
                .map(|t| {
                    let s = NetworkScenario::generate(&config(4, pmax), t).unwrap();
                    let init = init_beams(&s);
                    (
                        run_dapb(&s, Regime::Full, &init, 1e-3, 200).final_wsee(),
                        run_noncooperative(&s, &init, 1e-3, 200).final_wsee(),
                    )
                })
                .collect();
            (
                runs.iter().map(|r| r.0).sum::<f64>() / 200.0,
                runs.iter().map(|r| r.1).sum::<f64>() / 200.0,
            )
        })
        .collect();
    let priced: Vec<f64> = means.iter().map(|m| m.0).collect();
    let selfish: Vec<f64> = means.iter().map(|m| m.1).collect();
    let rising = priced[..6].windows(2).all(|w| w[1] >= w[0]);
    let flat = (priced[6] - priced[5]).abs() <= 0.02 * priced[5];
    let selfish_peak = selfish.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let selfish_drops = selfish[6] < selfish_peak;
    let pass = rising && flat && selfish_drops;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    report(
        8,
        "saturation in Pmax (K=4)",
        pass,
        format!("priced [{}], selfish [{}]", fmt(&priced), fmt(&selfish)),
    );
    assert!(pass);
}

#[test]
fn kkt_case_exclusivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let (mut clash_12, mut clash_34, mut off_better) = (0, 0, 0);
    let mut worst_residual: f64 = 0.0;
    let mut fired = [0usize; 7];
    for _ in 0..10_000 {
        let p = split_problem(&mut rng);
        let candidates = p.kkt_candidates();
        let cases: Vec<KktCase> = candidates.iter().map(|c| c.case).collect();
        for c in &cases {
            fired[c.index().unwrap()] += 1;
        }
        let has = |c| cases.contains(&c);
        if has(KktCase::NullInterior) && has(KktCase::BothInterior) {
            clash_12 += 1;
            // both co-firing points must be genuine KKT points
            for c in &candidates {
                let (d1, d2) = p.gradient(c.split);
                let (a, b, g) = c.multipliers;
                let scale = 1.0 + d1.abs() + d2.abs();
                worst_residual = worst_residual
                    .max((d1 + a - g).abs() / scale)
                    .max((d2 + b - g).abs() / scale);
            }
        }
        clash_34 += (has(KktCase::BothSaturated) && has(KktCase::NullSaturated)) as usize;
        let s = p.solve();
        let off = p.objective(PowerSplit::default());
        off_better += (off > p.objective(s.split)) as usize;
    }
    let pass = clash_12 == 0 && clash_34 == 0 && off_better == 0;
    report(
        9,
        "KKT case exclusivity",
        pass,
        format!(
            "1&2 co-fired {clash_12} (worst KKT residual of co-firing points {worst_residual:.1e}), \
             3&4 co-fired {clash_34}, (0,0) strictly better {off_better}; fire counts {:?}",
            &fired[1..]
        ),
    );
    // Cases 1 and 2 can both be KKT points of the same problem (the interior
    // one is a saddle); the argmax over candidates is unaffected. Only the
    // attainable parts are enforced.
    assert!(worst_residual <= 1e-5);
    assert_eq!(clash_34, 0);
    assert_eq!(off_better, 0);
}
