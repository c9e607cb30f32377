//! Epoch driver and lock-free worker loop.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::{resolve_gamma, ResolvedGamma, SolverConfig};
use super::shared::SharedVector;
use super::step::{compute_block_step, delay_rng, draw_sample, worker_rng, BlockStep, EpochContext, ReadBuffer, Sample};
use super::trace::{StalenessCounter, StalenessReport, Trace, TraceRecord};
use crate::error::{Error, Result};
use crate::lipschitz::{estimate_closed_form, LipschitzEstimates};
use crate::problem::CompositeProblem;
use crate::scalar::{dist, Scalar};

/// An epoch-boundary objective above this multiple of
/// `max(|F(x⁰)|, 1)` aborts the run.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct RunResult<T> {
    pub solution: Vec<T>,
    pub trace: Trace,
    pub staleness: StalenessReport,
    pub gamma: ResolvedGamma<T>,
    pub lipschitz: LipschitzEstimates<T>,
}

/// Runs the asynchronous solver with `config.threads` lock-free workers.
///
/// Each epoch takes a snapshot at a barrier, computes the full gradient in
/// parallel, then lets the workers run their share of the inner
/// iterations concurrently against the shared vector. With one thread and
/// a fixed seed the result is bit-identical across runs.
pub fn run<T: Scalar>(problem: &CompositeProblem<T>, config: &SolverConfig<T>) -> Result<RunResult<T>> {
    drive(problem, config)
}

/// Per-worker buffers reused across epochs.
pub(crate) struct WorkerScratch<T> {
    pub sample: Sample,
    pub buf: ReadBuffer<T>,
    pub step: BlockStep<T>,
    pub staleness: StalenessCounter,
}

impl<T: Scalar> WorkerScratch<T> {
    pub fn new(problem: &CompositeProblem<T>) -> Self {
        WorkerScratch {
            sample: Sample {
                batch: Vec::new(),
                block: 0,
            },
            buf: ReadBuffer::new(problem.dim()),
            step: BlockStep {
                block: 0,
                x_hat_block: Vec::new(),
                v_hat: Vec::new(),
                updated: Vec::new(),
            },
            staleness: StalenessCounter::new(),
        }
    }
}

/// Setup shared by every engine.
pub(crate) struct Prepared<T> {
    pub est: LipschitzEstimates<T>,
    pub gamma: ResolvedGamma<T>,
    pub step: T,
    pub x0: Vec<T>,
    pub f0: T,
}

pub(crate) fn prepare<T: Scalar>(problem: &CompositeProblem<T>, config: &SolverConfig<T>) -> Result<Prepared<T>> {
    config.validate(problem)?;
    let est = match config.lipschitz {
        Some(e) => e,
        None => estimate_closed_form(problem)?,
    };
    let gamma = resolve_gamma(problem, config, &est)?;
    let step = gamma.gamma / est.l_max;
    let x0 = config.x0.clone().unwrap_or_else(|| vec![T::zero(); problem.dim()]);
    let f0 = problem.objective(&x0)?;
    if !f0.is_finite() {
        return Err(Error::InvalidConfig("objective at the starting point is not finite".into()));
    }
    Ok(Prepared {
        est,
        gamma,
        step,
        x0,
        f0,
    })
}

/// Epoch-boundary bookkeeping shared by every engine.
pub(crate) struct Recorder<'a, T> {
    problem: &'a CompositeProblem<T>,
    config: &'a SolverConfig<T>,
    start: Instant,
    f0: f64,
    pub trace: Trace,
    pub staleness: StalenessReport,
    pub inner_done: usize,
}

impl<'a, T: Scalar> Recorder<'a, T> {
    pub fn new(problem: &'a CompositeProblem<T>, config: &'a SolverConfig<T>, f0: T) -> Self {
        Recorder {
            problem,
            config,
            start: Instant::now(),
            f0: f0.to_f64_lossy(),
            trace: Trace {
                initial_objective: f0.to_f64_lossy(),
                records: Vec::new(),
            },
            staleness: StalenessReport::default(),
            inner_done: 0,
        }
    }

    /// Records the end of epoch `s` (0-based) given the barrier copy `x`.
    pub fn end_epoch(&mut self, s: usize, x: &[T], counters: &[StalenessCounter], iters: usize) -> Result<()> {
        let epoch_max = self.staleness.merge_epoch(counters);
        self.inner_done += iters;
        let obj = self.problem.objective(x)?.to_f64_lossy();
        if !obj.is_finite() || obj > DIVERGENCE_FACTOR * self.f0.abs().max(1.0) {
            return Err(Error::Divergence {
                epoch: s + 1,
                objective: obj,
                initial: self.f0,
            });
        }
        if (s + 1) % self.config.trace_every == 0 || s + 1 == self.config.epochs {
            let distance = self
                .config
                .reference_point
                .as_ref()
                .map(|r| dist(x, r).to_f64_lossy());
            self.trace.records.push(TraceRecord {
                epoch: s + 1,
                inner_iter: self.inner_done,
                time_ms: self.start.elapsed().as_secs_f64() * 1e3,
                objective: obj,
                distance,
                max_staleness: epoch_max,
            });
        }
        Ok(())
    }
}

fn drive<T: Scalar>(problem: &CompositeProblem<T>, config: &SolverConfig<T>) -> Result<RunResult<T>> {
    let prep = prepare(problem, config)?;
    let p = config.threads;
    let shared = SharedVector::new(&prep.x0);
    let mut rec = Recorder::new(problem, config, prep.f0);
    let mut scratch: Vec<WorkerScratch<T>> = (0..p).map(|_| WorkerScratch::new(problem)).collect();

    for s in 0..config.epochs {
        let snapshot = shared.inconsistent_read();
        let ctx = EpochContext::new(problem, snapshot, prep.step, config.minibatch, p)?;
        let clock = AtomicUsize::new(0);
        let active = AtomicUsize::new(p);
        let abort = AtomicBool::new(false);
        let env = WorkerEnv {
            ctx: &ctx,
            shared: &shared,
            clock: &clock,
            active: &active,
            abort: &abort,
        };
        scratch.iter_mut().for_each(|w| w.staleness.reset());

        let results: Vec<Result<()>> = if p == 1 {
            vec![env.worker_epoch(0, s, config, &mut scratch[0])]
        } else {
            std::thread::scope(|sc| {
                let handles: Vec<_> = scratch
                    .iter_mut()
                    .enumerate()
                    .map(|(w, ws)| {
                        let env = &env;
                        sc.spawn(move || env.worker_epoch(w, s, config, ws))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("solver worker panicked"))
                    .collect()
            })
        };
        for r in results {
            r?;
        }

        let x = shared.inconsistent_read();
        let counters: Vec<StalenessCounter> = scratch.iter().map(|w| w.staleness.clone()).collect();
        rec.end_epoch(s, &x, &counters, clock.load(Ordering::Acquire))?;
    }

    Ok(RunResult {
        solution: shared.inconsistent_read(),
        trace: rec.trace,
        staleness: rec.staleness,
        gamma: prep.gamma,
        lipschitz: prep.est,
    })
}

struct WorkerEnv<'a, 'p, T: Scalar> {
    ctx: &'a EpochContext<'p, T>,
    shared: &'a SharedVector<T>,
    /// Counts claimed writes in the current epoch; a worker's iteration
    /// index is the value it claims.
    clock: &'a AtomicUsize,
    active: &'a AtomicUsize,
    abort: &'a AtomicBool,
}

struct ActiveGuard<'a>(&'a AtomicUsize);

impl Drop for ActiveGuard<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::AcqRel);
    }
}

impl<T: Scalar> WorkerEnv<'_, '_, T> {
    /// Read → compute → update, `config.iters_for_worker(w)` times.
    fn worker_epoch(&self, w: usize, epoch: usize, config: &SolverConfig<T>, ws: &mut WorkerScratch<T>) -> Result<()> {
        let _guard = ActiveGuard(self.active);
        let problem = self.ctx.problem;
        let (l, k) = (problem.num_components(), problem.num_blocks());
        let mut rng = worker_rng(config.seed, w, epoch);
        let mut delay: Option<(usize, ChaCha8Rng)> = config
            .delay
            .filter(|d| d.max_extra_staleness > 0)
            .map(|d| (d.max_extra_staleness, delay_rng(config.seed, w, epoch)));

        for _ in 0..config.iters_for_worker(w) {
            if self.abort.load(Ordering::Relaxed) {
                break;
            }
            draw_sample(&mut rng, l, k, self.ctx.minibatch, &mut ws.sample);
            ws.buf.plan(problem, &ws.sample);
            let t_read = self.clock.load(Ordering::Acquire);
            self.shared.read_into(&ws.buf.cells, &mut ws.buf.values);

            if let Some((max_extra, drng)) = delay.as_mut() {
                let hold = drng.random_range(0..=*max_extra);
                self.inject_delay(t_read, hold);
            }

            if let Err(e) = compute_block_step(self.ctx, &ws.sample, &ws.buf, &mut ws.step) {
                self.abort.store(true, Ordering::Relaxed);
                return Err(e);
            }
            let t = self.clock.fetch_add(1, Ordering::AcqRel);
            ws.staleness.record(t - t_read);
            for (&c, &v) in problem.partition().block(ws.step.block).iter().zip(&ws.step.updated) {
                self.shared.store(c, v);
            }
        }
        Ok(())
    }

    /// Holds the read buffer until `hold` writes by other workers have been
    /// claimed since `t_read`, or no other worker is left to write.
    fn inject_delay(&self, t_read: usize, hold: usize) {
        while self.clock.load(Ordering::Acquire) < t_read + hold
            && self.active.load(Ordering::Acquire) > 1
            && !self.abort.load(Ordering::Relaxed)
        {
            std::thread::yield_now();
        }
    }
}
