//! Thread-count sweeps.

use crate::error::{Error, Result};
use crate::problem::CompositeProblem;
use crate::scalar::Scalar;
use crate::solver::{run, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub threads: usize,
    /// Median wall time of one epoch, including the barrier objective.
    pub epoch_ms: f64,
    /// `epoch_ms` at the first thread count divided by this row's.
    pub speedup: f64,
    pub final_objective: f64,
    pub max_staleness: usize,
}

/// Runs `base` once per thread count with everything else fixed.
pub fn thread_sweep<T: Scalar>(
    problem: &CompositeProblem<T>,
    base: &SolverConfig<T>,
    threads: &[usize],
) -> Result<Vec<BenchRow>> {
    if threads.is_empty() {
        return Err(Error::InvalidConfig("no thread counts given".into()));
    }
    let mut rows: Vec<BenchRow> = Vec::with_capacity(threads.len());
    for &p in threads {
        let cfg = SolverConfig {
            threads: p,
            trace_every: 1,
            ..base.clone()
        };
        let r = run(problem, &cfg)?;
        let mut prev = 0.0;
        let mut per_epoch: Vec<f64> = r
            .trace
            .records
            .iter()
            .map(|rec| {
                let d = rec.time_ms - prev;
                prev = rec.time_ms;
                d
            })
            .collect();
        per_epoch.sort_by(f64::total_cmp);
        let epoch_ms = per_epoch[per_epoch.len() / 2];
        let base_ms = rows.first().map_or(epoch_ms, |b| b.epoch_ms);
        rows.push(BenchRow {
            threads: p,
            epoch_ms,
            speedup: base_ms / epoch_ms,
            final_objective: r.trace.last_objective().unwrap_or(f64::NAN),
            max_staleness: r.staleness.max_observed,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{gen_synthetic, SyntheticSpec};
    use crate::partition::BlockPartition;
    use crate::problem::{Loss, Regularizer};
    use crate::solver::GammaChoice;

    #[test]
    fn sweep_reports_each_thread_count() {
        let s = gen_synthetic::<f64>(&SyntheticSpec {
            n: 40,
            l: 60,
            density: 0.2,
            ..Default::default()
        })
        .unwrap();
        let p = CompositeProblem::new(
            s.data,
            Loss::Squared,
            Regularizer::L1 { lambda: 0.01 },
            BlockPartition::contiguous(40, 10).unwrap(),
        )
        .unwrap();
        let cfg = SolverConfig {
            epochs: 3,
            inner_iters: 200,
            gamma: GammaChoice::Fixed(0.3),
            ..Default::default()
        };
        let rows = thread_sweep(&p, &cfg, &[1, 2]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].speedup, 1.0);
        assert!(rows.iter().all(|r| r.epoch_ms > 0.0 && r.speedup.is_finite()));
        assert!(thread_sweep(&p, &cfg, &[]).is_err());
    }
}
