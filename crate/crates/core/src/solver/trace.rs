//! Convergence trace and staleness instrumentation.

/// Staleness values at or above this land in the last histogram bucket.
pub const HISTOGRAM_BUCKETS: usize = 64;

/// One row of the convergence trace, taken at an epoch barrier.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Epochs completed.
    pub epoch: usize,
    /// Inner iterations completed since the start of the run.
    pub inner_iter: usize,
    pub time_ms: f64,
    pub objective: f64,
    pub distance: Option<f64>,
    /// Largest staleness seen during this epoch.
    pub max_staleness: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    /// `F(x⁰)`.
    pub initial_objective: f64,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn last_objective(&self) -> Option<f64> {
        self.records.last().map(|r| r.objective)
    }

    /// Bitwise equality of everything except wall-clock time.
    pub fn same_trajectory(&self, other: &Trace) -> bool {
        self.initial_objective.to_bits() == other.initial_objective.to_bits()
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.inner_iter == b.inner_iter
                    && a.objective.to_bits() == b.objective.to_bits()
                    && a.distance.map(f64::to_bits) == b.distance.map(f64::to_bits)
                    && a.max_staleness == b.max_staleness
            })
    }
}

/// Read-to-write delays, in inner iterations, across a run.
#[derive(Debug, Clone, PartialEq)]
pub struct StalenessReport {
    pub max_observed: usize,
    pub per_epoch_max: Vec<usize>,
    /// `histogram[s]` counts iterations with staleness `s`; the last bucket
    /// collects everything `>= HISTOGRAM_BUCKETS - 1`.
    pub histogram: Vec<u64>,
}

impl Default for StalenessReport {
    fn default() -> Self {
        StalenessReport {
            max_observed: 0,
            per_epoch_max: Vec::new(),
            histogram: vec![0; HISTOGRAM_BUCKETS],
        }
    }
}

impl StalenessReport {
    pub fn iterations(&self) -> u64 {
        self.histogram.iter().sum()
    }

    pub(crate) fn merge_epoch(&mut self, workers: &[StalenessCounter]) -> usize {
        let mut epoch_max = 0;
        for w in workers {
            epoch_max = epoch_max.max(w.max);
            for (h, &c) in self.histogram.iter_mut().zip(&w.histogram) {
                *h += c;
            }
        }
        self.per_epoch_max.push(epoch_max);
        self.max_observed = self.max_observed.max(epoch_max);
        epoch_max
    }
}

/// Per-worker accumulator, merged at the epoch barrier.
#[derive(Debug, Clone)]
pub(crate) struct StalenessCounter {
    pub max: usize,
    pub histogram: Vec<u64>,
}

impl StalenessCounter {
    pub fn new() -> Self {
        StalenessCounter {
            max: 0,
            histogram: vec![0; HISTOGRAM_BUCKETS],
        }
    }

    #[inline]
    pub fn record(&mut self, staleness: usize) {
        self.max = self.max.max(staleness);
        self.histogram[staleness.min(HISTOGRAM_BUCKETS - 1)] += 1;
    }

    pub fn reset(&mut self) {
        self.max = 0;
        self.histogram.iter_mut().for_each(|h| *h = 0);
    }
}
