//! Deterministic simulation of `p` asynchronous workers with controlled
//! staleness.
//!
//! Time advances in rounds. In every round each active worker performs one
//! phase of its current iteration: a *read* of all the cells it needs, or a
//! *write* of its block. The cell operations of all workers acting in a
//! round are randomly interleaved, so a read can observe a block write
//! half-applied, exactly as with real lock-free threads. Between read and
//! write a worker may *hold* its read buffer until up to
//! `max_extra_staleness` writes by other workers have been claimed.
//!
//! A worker claims its iteration index at the start of its write round.
//! Staleness is the number of claims made between the start of the
//! worker's read round and its own claim, which this schedule bounds by
//! `(p − 1) + max_extra_staleness`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::SolverConfig;
use super::engine::{prepare, Recorder, RunResult, WorkerScratch};
use super::step::{compute_block_step, delay_rng, draw_sample, stream_rng, worker_rng, EpochContext};
use super::trace::StalenessCounter;
use crate::error::Result;
use crate::problem::CompositeProblem;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimulationOptions {
    /// Seeds the interleaving of cell operations.
    pub schedule_seed: u64,
    /// Keep the per-cell read/write history.
    pub record_log: bool,
}

/// One cell observed by a read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRead<T> {
    pub cell: usize,
    pub value: T,
    /// Global operation sequence number within the epoch.
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadRecord<T> {
    /// Iteration index `t` (claim order) of the iteration that made this read.
    pub iteration: usize,
    pub worker: usize,
    /// Claims made before the read round began.
    pub read_stamp: usize,
    pub cells: Vec<CellRead<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WriteEvent<T> {
    pub iteration: usize,
    pub cell: usize,
    pub value: T,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog<T> {
    /// Shared vector at the start of the epoch.
    pub initial: Vec<T>,
    pub reads: Vec<ReadRecord<T>>,
    pub writes: Vec<WriteEvent<T>>,
}

#[derive(Debug, Clone)]
pub struct SimulationResult<T> {
    pub run: RunResult<T>,
    /// One entry per epoch when `record_log` is set.
    pub log: Vec<EpochLog<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Read,
    Hold,
    Write,
    Done,
}

struct VirtualWorker<T> {
    rng: ChaCha8Rng,
    delay: Option<(usize, ChaCha8Rng)>,
    remaining: usize,
    phase: Phase,
    read_stamp: usize,
    hold: usize,
    claim: usize,
    pending: Vec<CellRead<T>>,
    scratch: WorkerScratch<T>,
}

/// Runs the solver on virtual workers with cell-level interleaving and
/// injected delays.
pub fn simulate<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &SolverConfig<T>,
    options: SimulationOptions,
) -> Result<SimulationResult<T>> {
    let prep = prepare(problem, config)?;
    let p = config.threads;
    let (l, k) = (problem.num_components(), problem.num_blocks());
    let mut mem = prep.x0.clone();
    let mut rec = Recorder::new(problem, config, prep.f0);
    let mut logs = Vec::new();

    for s in 0..config.epochs {
        let ctx = EpochContext::new(problem, mem.clone(), prep.step, config.minibatch, 1)?;
        let mut sched = stream_rng(options.schedule_seed, 0, s, 2);
        let mut log = EpochLog {
            initial: mem.clone(),
            reads: Vec::new(),
            writes: Vec::new(),
        };
        let mut claims = 0usize;
        let mut seq = 0u64;

        let mut workers: Vec<VirtualWorker<T>> = (0..p)
            .map(|w| VirtualWorker {
                rng: worker_rng(config.seed, w, s),
                delay: config
                    .delay
                    .filter(|d| d.max_extra_staleness > 0)
                    .map(|d| (d.max_extra_staleness, delay_rng(config.seed, w, s))),
                remaining: config.iters_for_worker(w),
                phase: Phase::Done,
                read_stamp: 0,
                hold: 0,
                claim: 0,
                pending: Vec::new(),
                scratch: WorkerScratch::new(problem),
            })
            .collect();
        for w in workers.iter_mut() {
            begin_iteration(w, problem, &ctx, l, k, claims);
        }

        while workers.iter().any(|w| w.phase != Phase::Done) {
            // claims, in random order among this round's writers
            let mut writers: Vec<usize> = (0..p).filter(|&w| workers[w].phase == Phase::Write).collect();
            writers.shuffle(&mut sched);
            for &w in &writers {
                let vw = &mut workers[w];
                vw.claim = claims;
                claims += 1;
                vw.scratch.staleness.record(vw.claim - vw.read_stamp);
                if options.record_log {
                    log.reads.push(ReadRecord {
                        iteration: vw.claim,
                        worker: w,
                        read_stamp: vw.read_stamp,
                        cells: std::mem::take(&mut vw.pending),
                    });
                }
            }

            // interleave the cell operations of everyone acting this round
            let acting: Vec<usize> = (0..p)
                .filter(|&w| matches!(workers[w].phase, Phase::Read | Phase::Write))
                .collect();
            let mut cursor = vec![0usize; p];
            let len_of = |vw: &VirtualWorker<T>| match vw.phase {
                Phase::Read => vw.scratch.buf.cells.len(),
                _ => vw.scratch.step.updated.len(),
            };
            let mut live: Vec<usize> = acting.iter().copied().filter(|&w| len_of(&workers[w]) > 0).collect();
            while !live.is_empty() {
                let pick = sched.random_range(0..live.len());
                let w = live[pick];
                let vw = &mut workers[w];
                let pos = cursor[w];
                if vw.phase == Phase::Read {
                    let c = vw.scratch.buf.cells[pos];
                    let v = mem[c];
                    vw.scratch.buf.values[c] = v;
                    if options.record_log {
                        vw.pending.push(CellRead { cell: c, value: v, seq });
                    }
                } else {
                    let c = problem.partition().block(vw.scratch.step.block)[pos];
                    let v = vw.scratch.step.updated[pos];
                    mem[c] = v;
                    if options.record_log {
                        log.writes.push(WriteEvent {
                            iteration: vw.claim,
                            cell: c,
                            value: v,
                            seq,
                        });
                    }
                }
                seq += 1;
                cursor[w] += 1;
                if cursor[w] == len_of(vw) {
                    live.swap_remove(pick);
                }
            }

            // phase transitions
            for &w in &acting {
                let vw = &mut workers[w];
                match vw.phase {
                    Phase::Read => {
                        vw.hold = match vw.delay.as_mut() {
                            Some((max_extra, drng)) => drng.random_range(0..=*max_extra),
                            None => 0,
                        };
                        vw.phase = Phase::Hold;
                    }
                    Phase::Write => {
                        vw.remaining -= 1;
                        begin_iteration(vw, problem, &ctx, l, k, claims);
                    }
                    _ => unreachable!(),
                }
            }
            let mut released = false;
            for vw in workers.iter_mut() {
                if vw.phase == Phase::Hold && claims - vw.read_stamp >= vw.hold {
                    release(vw, &ctx)?;
                    released = true;
                }
            }
            let busy = workers.iter().any(|w| matches!(w.phase, Phase::Read | Phase::Write));
            if !busy && !released {
                // nobody else can write: free the oldest held read
                if let Some(vw) = workers
                    .iter_mut()
                    .filter(|w| w.phase == Phase::Hold)
                    .min_by_key(|w| w.read_stamp)
                {
                    release(vw, &ctx)?;
                }
            }
        }

        let counters: Vec<StalenessCounter> = workers.iter().map(|w| w.scratch.staleness.clone()).collect();
        rec.end_epoch(s, &mem, &counters, claims)?;
        if options.record_log {
            logs.push(log);
        }
    }

    Ok(SimulationResult {
        run: RunResult {
            solution: mem,
            trace: rec.trace,
            staleness: rec.staleness,
            gamma: prep.gamma,
            lipschitz: prep.est,
        },
        log: logs,
    })
}

fn begin_iteration<T: Scalar>(
    vw: &mut VirtualWorker<T>,
    problem: &CompositeProblem<T>,
    ctx: &EpochContext<'_, T>,
    l: usize,
    k: usize,
    claims: usize,
) {
    if vw.remaining == 0 {
        vw.phase = Phase::Done;
        return;
    }
    draw_sample(&mut vw.rng, l, k, ctx.minibatch, &mut vw.scratch.sample);
    vw.scratch.buf.plan(problem, &vw.scratch.sample);
    vw.read_stamp = claims;
    vw.pending.clear();
    vw.phase = Phase::Read;
}

fn release<T: Scalar>(vw: &mut VirtualWorker<T>, ctx: &EpochContext<'_, T>) -> Result<()> {
    compute_block_step(ctx, &vw.scratch.sample, &vw.scratch.buf, &mut vw.scratch.step)?;
    vw.phase = Phase::Write;
    Ok(())
}
