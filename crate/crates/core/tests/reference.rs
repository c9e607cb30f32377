use asyvr::io::{gen_synthetic, load_libsvm, write_libsvm, SyntheticKind, SyntheticSpec};
use asyvr::solver::{run, run_sequential, simulate, DelayInjection, GammaChoice, SequentialStepper, SimulationOptions};
use asyvr::{
    estimate_closed_form, solve_high_accuracy, BlockPartition, CompositeProblem, DatasetMatrix, Loss, Problem,
    Regularizer, SolverConfig,
};

fn lasso(n: usize, l: usize, k: usize, lambda: f64, seed: u64) -> Problem {
    let s = gen_synthetic::<f64>(&SyntheticSpec {
        n,
        l,
        seed,
        ..Default::default()
    })
    .unwrap();
    CompositeProblem::new(
        s.data,
        Loss::Squared,
        Regularizer::L1 { lambda },
        BlockPartition::contiguous(n, k).unwrap(),
    )
    .unwrap()
}

#[test]
fn libsvm_round_trip_is_exact() {
    for kind in [SyntheticKind::Lasso, SyntheticKind::Logistic] {
        let s = gen_synthetic::<f64>(&SyntheticSpec {
            n: 50,
            l: 70,
            density: 0.3,
            kind,
            seed: 31,
            ..Default::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.svm");
        write_libsvm(&s.data, &path).unwrap();
        let back: DatasetMatrix<f64> = load_libsvm(&path, Some(50)).unwrap();
        assert_eq!(back.num_rows(), s.data.num_rows());
        for (a, b) in back.rows().iter().zip(s.data.rows()) {
            assert_eq!(a.indices, b.indices);
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() <= 1e-15);
            }
        }
        assert_eq!(back.labels(), s.data.labels());
    }
}

#[test]
fn noiseless_planted_solution_is_recovered() {
    let s = gen_synthetic::<f64>(&SyntheticSpec {
        n: 20,
        l: 80,
        noise: 0.0,
        seed: 32,
        ..Default::default()
    })
    .unwrap();
    let p = CompositeProblem::new(
        s.data,
        Loss::Squared,
        Regularizer::L1 { lambda: 0.0 },
        BlockPartition::contiguous(20, 5).unwrap(),
    )
    .unwrap();
    let r = run(
        &p,
        &SolverConfig {
            epochs: 40,
            inner_iters: 1000,
            gamma: GammaChoice::Fixed(0.3),
            seed: 3,
            ..Default::default()
        },
    )
    .unwrap();
    let err = r
        .solution
        .iter()
        .zip(&s.planted)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-6, "max error {err:.3e}");
}

/// One block holding every coordinate and a full minibatch turns a step
/// into deterministic proximal gradient descent.
#[test]
fn single_block_full_batch_is_proximal_gradient() {
    let p = lasso(15, 25, 1, 0.05, 33);
    let est = estimate_closed_form(&p).unwrap();
    let step = 0.5 / est.l_max;
    let mut st = SequentialStepper::new(&p, vec![0.0; 15], step, 25, 9).unwrap();
    let mut x = vec![0.0; 15];
    for _ in 0..50 {
        // snapshot refresh every step keeps the correction exact
        st.next_epoch().unwrap();
        st.step().unwrap();
        let g = p.grad_full(&x).unwrap();
        let v: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        x = p.regularizer().prox(&v, step).unwrap();
        let diff = st.x().iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-12, "{diff:.3e}");
    }
}

#[test]
fn duplicated_rows_leave_the_optimum_unchanged() {
    let s = gen_synthetic::<f64>(&SyntheticSpec {
        n: 10,
        l: 30,
        seed: 34,
        ..Default::default()
    })
    .unwrap();
    let part = BlockPartition::contiguous(10, 5).unwrap();
    let reg = Regularizer::L1 { lambda: 0.03 };
    let once = CompositeProblem::new(s.data.clone(), Loss::Squared, reg, part.clone()).unwrap();
    let mut rows = s.data.rows().to_vec();
    rows.extend_from_slice(s.data.rows());
    let mut labels = s.data.labels().to_vec();
    labels.extend_from_slice(s.data.labels());
    let twice = CompositeProblem::new(DatasetMatrix::new(rows, labels, 10).unwrap(), Loss::Squared, reg, part).unwrap();
    let a = solve_high_accuracy(&once).unwrap().f_star;
    let b = solve_high_accuracy(&twice).unwrap().f_star;
    assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
}

#[test]
fn long_runs_reach_the_reference_optimum() {
    let p = lasso(30, 60, 10, 0.02, 35);
    let f_star = solve_high_accuracy(&p).unwrap().f_star;
    let r = run_sequential(
        &p,
        &SolverConfig {
            epochs: 60,
            inner_iters: 1200,
            gamma: GammaChoice::Fixed(0.3),
            ..Default::default()
        },
    )
    .unwrap();
    assert!((r.f_star - f_star).abs() <= 1e-8 * f_star.abs().max(1.0), "{} vs {f_star}", r.f_star);
}

#[test]
fn injected_delay_is_observed_and_bounded() {
    let p = lasso(40, 50, 20, 0.02, 36);
    let cfg = SolverConfig {
        threads: 2,
        epochs: 5,
        inner_iters: 2000,
        gamma: GammaChoice::Fixed(0.05),
        seed: 1,
        delay: Some(DelayInjection {
            max_extra_staleness: 8,
        }),
        ..Default::default()
    };
    let sim = simulate(
        &p,
        &cfg,
        SimulationOptions {
            schedule_seed: 2,
            record_log: false,
        },
    )
    .unwrap();
    assert_eq!(sim.run.staleness.iterations(), 10_000);
    assert!(sim.run.staleness.max_observed >= 1);
    assert!(sim.run.staleness.max_observed <= 9);
}

#[test]
fn heavy_delay_slows_progress() {
    let p = lasso(40, 50, 4, 0.02, 37);
    let f_star = solve_high_accuracy(&p).unwrap().f_star;
    let gap = |extra: usize| {
        let cfg = SolverConfig {
            threads: 4,
            epochs: 4,
            inner_iters: 800,
            gamma: GammaChoice::Fixed(0.5),
            seed: 1,
            delay: Some(DelayInjection {
                max_extra_staleness: extra,
            }),
            ..Default::default()
        };
        let opts = SimulationOptions {
            schedule_seed: 3,
            record_log: false,
        };
        let r = simulate(&p, &cfg, opts).unwrap().run;
        r.trace.last_objective().unwrap_or(f64::INFINITY) - f_star
    };
    let fresh = gap(0);
    let stale = gap(200);
    assert!(stale > fresh, "stale {stale:.3e} vs fresh {fresh:.3e}");
}
