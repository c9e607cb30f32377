//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the summary is always
//! printed. Exits nonzero when any hard criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use asyvr::bench::thread_sweep;
use asyvr::check::finite_difference_check;
use asyvr::io::{gen_synthetic, SyntheticKind, SyntheticSpec};
use asyvr::solver::{
    run, run_sequential, simulate, solve_high_accuracy, vr_block_gradient, DelayInjection, GammaChoice,
    SequentialStepper, SimulationOptions, SolverConfig,
};
use asyvr::theory::{gamma_bound, theta1, theta2, theta_prime, GammaBound, TheoryParams};
use asyvr::{estimate_closed_form, BlockPartition, CompositeProblem, DatasetMatrix, Loss, Problem, Regularizer};

struct Outcome {
    passed: bool,
    /// Soft criteria are reported but never fail the run.
    soft: bool,
    detail: String,
}

impl Outcome {
    fn hard(passed: bool, detail: String) -> Self {
        Outcome {
            passed,
            soft: false,
            detail,
        }
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn synthetic_problem(spec: SyntheticSpec, reg: Regularizer<f64>, k: usize) -> Problem {
    let s = gen_synthetic::<f64>(&spec).unwrap();
    let n = s.data.dim();
    CompositeProblem::new(s.data, spec.kind.loss(), reg, BlockPartition::contiguous(n, k).unwrap())
        .unwrap()
        .with_ridge(s.ridge)
        .unwrap()
}

/// Least-squares slope and R² of `y` against `0, 1, 2, ...`.
fn linear_fit(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (i, &v) in y.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (v - my);
        sxx += dx * dx;
        syy += (v - my) * (v - my);
    }
    (sxy / sxx, sxy * sxy / (sxx * syy))
}

fn c1_unbiasedness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let rows: Vec<Vec<f64>> = (0..5).map(|_| (0..6).map(|_| gauss(&mut rng)).collect()).collect();
    let labels = (0..5).map(|_| gauss(&mut rng)).collect();
    let data = DatasetMatrix::from_dense(&rows, labels).unwrap();
    let p = CompositeProblem::new(data, Loss::Squared, Regularizer::Zero, BlockPartition::contiguous(6, 3).unwrap())
        .unwrap()
        .with_ridge(0.3)
        .unwrap();
    let x_hat: Vec<f64> = (0..6).map(|_| gauss(&mut rng)).collect();
    let snap: Vec<f64> = (0..6).map(|_| gauss(&mut rng)).collect();
    let mu = p.grad_full(&snap).unwrap();
    let (l, k) = (5, 3);
    let mut mean = vec![0.0; 6];
    for i in 0..l {
        for j in 0..k {
            let v = vr_block_gradient(&p, &[i], j, &x_hat, &snap, &mu).unwrap();
            for (&c, &g) in p.partition().block(j).iter().zip(&v) {
                // uniform block choice: scale the scattered block by k
                mean[c] += k as f64 * g / (l * k) as f64;
            }
        }
    }
    let truth = p.grad_full(&x_hat).unwrap();
    let err = mean.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Outcome::hard(err <= 1e-12, format!("max |E v̂ − ∇f(x̂)| = {err:.2e} over 15 pairs"))
}

/// Brute-force `argmin step·g(u) + ½‖u − v‖²`: grid, then compass search.
fn brute_prox(reg: &Regularizer<f64>, v: &[f64], step: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let h = |u: &[f64]| step * reg.value(u) + 0.5 * u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let d = v.len();
    // the minimizer is at most one subgradient step plus |v| away from v
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let radius = step * reg_scale(reg) * (d as f64).sqrt() + vmax + 1e-3;
    let steps = 20usize;
    let mut best = vec![0.0; d];
    let mut best_val = h(&best);
    let mut idx = vec![0usize; d];
    loop {
        let u: Vec<f64> = (0..d)
            .map(|c| v[c] - radius + 2.0 * radius * idx[c] as f64 / steps as f64)
            .collect();
        let val = h(&u);
        if val < best_val {
            best_val = val;
            best = u;
        }
        let mut c = 0;
        while c < d && idx[c] == steps {
            idx[c] = 0;
            c += 1;
        }
        if c == d {
            break;
        }
        idx[c] += 1;
    }
    // poll set: coordinate axes, the direction of v, and random directions
    let unit = |w: Vec<f64>| {
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        w.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let mut dirs: Vec<Vec<f64>> = (0..d).map(|c| (0..d).map(|r| f64::from(u8::from(r == c))).collect()).collect();
    if v.iter().any(|&x| x != 0.0) {
        dirs.push(unit(v.to_vec()));
    }
    for _ in 0..16 {
        dirs.push(unit((0..d).map(|_| gauss(rng)).collect()));
    }
    let mut delta = 2.0 * radius / steps as f64;
    while delta > 1e-13 {
        let mut improved = false;
        for dir in &dirs {
            for s in [-1.0, 1.0] {
                let u: Vec<f64> = best.iter().zip(dir).map(|(b, e)| b + s * delta * e).collect();
                let val = h(&u);
                if val < best_val {
                    best_val = val;
                    best = u;
                    improved = true;
                }
            }
        }
        if !improved {
            delta *= 0.5;
        }
    }
    best
}

fn reg_scale(reg: &Regularizer<f64>) -> f64 {
    match *reg {
        Regularizer::Zero => 0.0,
        Regularizer::L1 { lambda } | Regularizer::GroupL2 { lambda } => lambda,
        Regularizer::ElasticNet { l1, .. } => l1,
    }
}

fn c2_prox_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for kind in 0..3 {
        for _ in 0..100 {
            let lambda = rng.random_range(0.01..2.0);
            let step = rng.random_range(0.05..2.0);
            let reg = match kind {
                0 => Regularizer::L1 { lambda },
                1 => Regularizer::GroupL2 { lambda },
                _ => Regularizer::ElasticNet {
                    l1: lambda,
                    l2: rng.random_range(0.0..1.5),
                },
            };
            let v: Vec<f64> = (0..3).map(|_| 2.0 * gauss(&mut rng)).collect();
            let part = BlockPartition::contiguous(3, 1).unwrap();
            let data = DatasetMatrix::from_dense(&[vec![0.0; 3]], vec![0.0]).unwrap();
            let p = CompositeProblem::new(data, Loss::Squared, reg, part).unwrap();
            let u = p.prox_block(0, &v, step).unwrap();
            let b = brute_prox(&reg, &v, step, &mut rng);
            let err = u.iter().zip(&b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
            worst = worst.max(err);
        }
    }
    Outcome::hard(worst <= 1e-6, format!("max |prox − brute force| = {worst:.2e} over 300 draws"))
}

fn c3_gradients() -> Outcome {
    let mut worst: f64 = 0.0;
    for kind in [SyntheticKind::Lasso, SyntheticKind::Logistic] {
        let p = synthetic_problem(
            SyntheticSpec {
                n: 30,
                l: 40,
                density: 0.4,
                kind,
                seed: 3,
                ridge: Some(0.05),
                ..Default::default()
            },
            Regularizer::Zero,
            5,
        );
        let r = finite_difference_check(&p, 200, 33).unwrap();
        worst = worst.max(r.max_rel_error);
    }
    Outcome::hard(worst <= 1e-5, format!("max relative error {worst:.2e} (200 checks per loss)"))
}

fn c4_single_thread_equivalence() -> Outcome {
    let p = synthetic_problem(
        SyntheticSpec {
            n: 100,
            l: 50,
            seed: 4,
            ..Default::default()
        },
        Regularizer::L1 { lambda: 0.05 },
        20,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut ok = true;
    for _ in 0..5 {
        let seed: u64 = rng.random();
        let cfg = SolverConfig {
            epochs: 8,
            inner_iters: 400,
            gamma: GammaChoice::Fixed(0.2),
            seed,
            ..Default::default()
        };
        let a = run(&p, &cfg).unwrap();
        let b = run_sequential(&p, &cfg).unwrap();
        let same_bits = a.solution.iter().zip(&b.solution).all(|(x, y)| x.to_bits() == y.to_bits());
        ok &= a.trace.same_trajectory(&b.trace) && same_bits;

        // hand-stepped replay of the same recursion
        let step = 0.2 / a.lipschitz.l_max;
        let mut st = SequentialStepper::new(&p, vec![0.0; 100], step, 1, seed).unwrap();
        for e in 0..cfg.epochs {
            if e > 0 {
                st.next_epoch().unwrap();
            }
            for _ in 0..cfg.inner_iters {
                st.step().unwrap();
            }
        }
        ok &= st.x().iter().zip(&a.solution).all(|(x, y)| x.to_bits() == y.to_bits());
    }
    Outcome::hard(ok, "5 seeds, 50×100 Lasso: traces and solutions bit-identical".into())
}

fn c5_theory() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rho: f64 = rng.random_range(1.0001..10.0);
        let tau = rng.random_range(0..=50usize);
        let m = rng.random_range(1..=200usize);
        let direct1: f64 = (1..=tau).map(|t| rho.powf(t as f64 / 2.0)).sum();
        let direct2: f64 = (1..m).map(|t| rho.powf(t as f64 / 2.0)).sum();
        let directp: f64 = (1..=tau).map(|t| rho.powi(t as i32)).sum();
        for (closed, direct) in [
            (theta1(rho, tau).unwrap(), direct1),
            (theta2(rho, m).unwrap(), direct2),
            (theta_prime(rho, tau).unwrap(), directp),
        ] {
            worst = worst.max((closed - direct).abs() / direct.abs().max(1.0));
        }
    }
    let params = |k: usize| TheoryParams {
        rho: 2.0,
        tau: 1,
        m: 2,
        k,
        lambda_res: 1.0,
        lambda_nor: 1.0,
        l_osc: 0.0,
        l_max: 1.0,
    };
    let worked = gamma_bound(&params(100)).unwrap().gamma().unwrap_or(f64::NAN);
    let worked_ok = (worked - 0.051_776_695_296_636_88).abs() <= 1e-6;
    let boundary_ok = (1..=400).all(|k| {
        let infeasible = matches!(gamma_bound(&params(k)).unwrap(), GammaBound::Infeasible);
        infeasible == (k <= 64)
    });
    Outcome::hard(
        worst <= 1e-12 && worked_ok && boundary_ok,
        format!(
            "geometric sums rel err {worst:.2e}; gamma_max = {worked}; infeasible exactly for k <= 64: {boundary_ok}"
        ),
    )
}

fn c6_linear_convergence() -> Outcome {
    let p = synthetic_problem(
        SyntheticSpec {
            n: 200,
            l: 500,
            kind: SyntheticKind::StronglyConvex,
            seed: 6,
            ..Default::default()
        },
        Regularizer::L1 { lambda: 0.01 },
        100,
    );
    let f_star = solve_high_accuracy(&p).unwrap().f_star;
    let cfg = SolverConfig {
        epochs: 30,
        inner_iters: 10_000,
        gamma: GammaChoice::Fixed(0.2),
        seed: 6,
        ..Default::default()
    };
    let r = run(&p, &cfg).unwrap();
    let gaps: Vec<f64> = r.trace.records.iter().map(|t| t.objective - f_star).collect();
    let logs: Vec<f64> = gaps.iter().map(|g| g.max(1e-300).log10()).collect();
    let (slope, r2) = linear_fit(&logs);
    let last = *gaps.last().unwrap();
    Outcome::hard(
        slope < 0.0 && r2 >= 0.95 && last <= 1e-6,
        format!("log10-gap slope {slope:.3}/epoch, R² = {r2:.4}, final gap {last:.2e}"),
    )
}

fn c7_sublinear_convergence() -> Outcome {
    let mut gaps = [0.0f64; 41];
    for seed in 0..5u64 {
        let p = synthetic_problem(
            SyntheticSpec {
                n: 200,
                l: 100,
                kind: SyntheticKind::Lasso,
                seed: 70 + seed,
                ..Default::default()
            },
            Regularizer::L1 { lambda: 0.05 },
            100,
        );
        let f_star = solve_high_accuracy(&p).unwrap().f_star;
        let cfg = SolverConfig {
            epochs: 40,
            inner_iters: 2_000,
            gamma: GammaChoice::Fixed(0.2),
            seed,
            ..Default::default()
        };
        let r = run(&p, &cfg).unwrap();
        for rec in &r.trace.records {
            gaps[rec.epoch] += (rec.objective - f_star) / 5.0;
        }
    }
    let r5 = gaps[20] / gaps[5];
    let r10 = gaps[40] / gaps[10];
    Outcome::hard(
        r5 <= 0.6 && r10 <= 0.6,
        format!("gap(20)/gap(5) = {r5:.3e}, gap(40)/gap(10) = {r10:.3e} (5-seed mean)"),
    )
}

fn c8_monotone_descent() -> Outcome {
    let p = synthetic_problem(
        SyntheticSpec {
            n: 400,
            l: 300,
            density: 0.02,
            seed: 8,
            ..Default::default()
        },
        Regularizer::L1 { lambda: 0.01 },
        400,
    );
    let est = estimate_closed_form(&p).unwrap();
    let m = 8;
    let params = TheoryParams {
        rho: 2.0,
        tau: 0,
        m,
        k: 400,
        lambda_res: est.lambda_res,
        lambda_nor: est.lambda_nor,
        l_osc: 0.0,
        l_max: est.l_max,
    };
    let Some(gamma) = gamma_bound(&params).unwrap().gamma() else {
        return Outcome::hard(false, "theory bound infeasible for the test instance".into());
    };
    let epochs = 40;
    let seeds = 20;
    let mut avg = vec![0.0; epochs + 1];
    for seed in 0..seeds {
        let cfg = SolverConfig {
            epochs,
            inner_iters: m,
            gamma: GammaChoice::Fixed(gamma),
            seed,
            ..Default::default()
        };
        let r = run(&p, &cfg).unwrap();
        avg[0] += r.trace.initial_objective / seeds as f64;
        for rec in &r.trace.records {
            avg[rec.epoch] += rec.objective / seeds as f64;
        }
    }
    let worst_rise = avg
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0].abs())
        .fold(f64::NEG_INFINITY, f64::max);
    Outcome::hard(
        worst_rise <= 1e-3,
        format!(
            "gamma = {gamma:.3e}; mean F {:.6} -> {:.6}; largest relative rise {worst_rise:.2e}",
            avg[0], avg[epochs]
        ),
    )
}

fn c9_staleness() -> Outcome {
    let p = synthetic_problem(
        SyntheticSpec {
            n: 60,
            l: 80,
            density: 0.2,
            seed: 9,
            ..Default::default()
        },
        Regularizer::L1 { lambda: 0.02 },
        15,
    );
    let mut ok = true;
    let mut notes = Vec::new();
    for threads in [1usize, 4] {
        for extra in [0usize, 4, 16] {
            let cfg = SolverConfig {
                threads,
                epochs: 3,
                inner_iters: 1500,
                gamma: GammaChoice::Fixed(0.05),
                seed: 90,
                delay: Some(DelayInjection {
                    max_extra_staleness: extra,
                }),
                ..Default::default()
            };
            let sim = simulate(
                &p,
                &cfg,
                SimulationOptions {
                    schedule_seed: 91,
                    record_log: true,
                },
            )
            .unwrap();
            let bound = threads - 1 + extra;
            let observed = sim.run.staleness.max_observed;
            let mut k_bound = 0usize;
            let mut replay_ok = true;
            for log in &sim.log {
                for read in &log.reads {
                    for cr in &read.cells {
                        // the value read is the latest write to the cell before the read
                        let latest = log
                            .writes
                            .iter()
                            .filter(|w| w.cell == cr.cell && w.seq < cr.seq)
                            .next_back()
                            .map_or(log.initial[cr.cell], |w| w.value);
                        replay_ok &= latest.to_bits() == cr.value.to_bits();
                    }
                    // K(t): earlier iterations whose writes to read cells land after the read
                    let k_min = log
                        .writes
                        .iter()
                        .filter(|w| {
                            w.iteration < read.iteration
                                && read.cells.iter().any(|cr| cr.cell == w.cell && w.seq > cr.seq)
                        })
                        .map(|w| w.iteration)
                        .min();
                    if let Some(km) = k_min {
                        k_bound = k_bound.max(read.iteration - km);
                    }
                }
            }
            let within = observed <= bound && k_bound <= bound && replay_ok;
            let exact_zero = threads > 1 || observed == 0;
            let injected = threads == 1 || extra == 0 || observed > threads - 1;
            ok &= within && exact_zero && injected;
            notes.push(format!("p={threads} extra={extra}: max {observed} (t−min K {k_bound}) ≤ {bound}"));
        }
    }
    let real = run(
        &p,
        &SolverConfig {
            epochs: 2,
            inner_iters: 500,
            gamma: GammaChoice::Fixed(0.05),
            ..Default::default()
        },
    )
    .unwrap();
    ok &= real.staleness.max_observed == 0;
    notes.push(format!("threaded p=1: {}", real.staleness.max_observed));
    Outcome::hard(ok, notes.join("; "))
}

fn c10_block_kkt() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for (reg, k) in [(Regularizer::GroupL2 { lambda: 0.1 }, 10), (Regularizer::L1 { lambda: 0.05 }, 30)] {
        let p = synthetic_problem(
            SyntheticSpec {
                n: 30,
                l: 60,
                density: 0.5,
                seed: 10,
                ..Default::default()
            },
            reg,
            k,
        );
        let est = estimate_closed_form(&p).unwrap();
        let gamma = 0.3;
        let step = gamma / est.l_max;
        let mut st = SequentialStepper::new(&p, vec![0.0; 30], step, 2, 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1000);
        for it in 0..100 {
            if it == 50 {
                st.next_epoch().unwrap();
            }
            let bs = st.step().unwrap().clone();
            let u = &bs.updated;
            for _ in 0..100 {
                let z: Vec<f64> = u.iter().map(|&ui| ui + gauss(&mut rng)).collect();
                let mut inner = 0.0;
                for o in 0..u.len() {
                    let g = bs.v_hat[o] + (u[o] - bs.x_hat_block[o]) / step;
                    inner += g * (u[o] - z[o]);
                }
                let lhs = inner + reg.value(u) - reg.value(&z);
                worst = worst.max(lhs);
            }
        }
    }
    Outcome::hard(worst <= 1e-9, format!("max KKT residual {worst:.2e} over 2×100 steps × 100 probes"))
}

fn c11_speedup() -> Outcome {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let dedicated = std::env::var("ASYVR_DEDICATED_RUNNER").is_ok_and(|v| v == "1");
    let p = synthetic_problem(
        SyntheticSpec {
            n: 10_000,
            l: 10_000,
            density: 1e-3,
            seed: 11,
            ..Default::default()
        },
        Regularizer::L1 { lambda: 1e-3 },
        1000,
    );
    let cfg = SolverConfig {
        epochs: 5,
        inner_iters: 200_000,
        gamma: GammaChoice::Fixed(0.1),
        seed: 11,
        ..Default::default()
    };
    let rows = thread_sweep(&p, &cfg, &[1, 4]).unwrap();
    let speedup = rows[1].speedup;
    let table: Vec<String> = rows
        .iter()
        .map(|r| format!("p={} {:.2} ms/epoch", r.threads, r.epoch_ms))
        .collect();
    Outcome {
        passed: speedup >= 2.0,
        soft: !dedicated,
        detail: format!(
            "{}; speedup {speedup:.2}x at p=4 on {cores} available core(s){}",
            table.join(", "),
            if dedicated { "" } else { " (recorded, not asserted)" }
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 11] = [
        ("unbiased variance-reduced gradient", c1_unbiasedness, Some(Duration::from_secs(1))),
        ("prox matches brute-force minimizer", c2_prox_oracle, Some(Duration::from_secs(10))),
        ("gradient finite differences", c3_gradients, None),
        ("single-thread structural equivalence", c4_single_thread_equivalence, None),
        ("theory arithmetic", c5_theory, None),
        ("linear convergence, strongly convex", c6_linear_convergence, Some(Duration::from_secs(30))),
        ("sublinear convergence, general convex", c7_sublinear_convergence, None),
        ("monotone expected descent", c8_monotone_descent, None),
        ("staleness contract", c9_staleness, None),
        ("per-block KKT inequality", c10_block_kkt, None),
        ("thread speedup", c11_speedup, None),
    ];
    let mut hard_failures = 0;
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut out = f();
        let took = start.elapsed();
        if let Some(limit) = limit {
            if took > *limit {
                out.passed = false;
                out.detail.push_str(&format!("; runtime {took:.2?} exceeds {limit:.0?}"));
            }
        }
        let verdict = match (out.passed, out.soft) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (soft)",
        };
        if !out.passed && !out.soft {
            hard_failures += 1;
        }
        println!("criterion {:>2} {verdict}: {name} [{took:.2?}] {}", i + 1, out.detail);
    }
    if hard_failures > 0 {
        println!("{hard_failures} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
