//! Per-sweep records and the sink abstraction the engine writes them to.

use crate::error::Result;

/// Acceptance-rate summary carried on every record (cumulative rates).
#[derive(Clone, Debug, Default)]
pub struct AcceptanceSummary {
    pub theta: f64,
    pub beta: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub moves: [f64; 3],
}

/// Snapshot of one archived sweep. Labels in `z` are 0-based in memory and
/// rendered 1-based on file. `theta`, `psi` and the cluster parameter blocks
/// cover every instantiated label (active plus potential).
#[derive(Clone, Debug, Default)]
pub struct SweepRecord {
    pub sweep: usize,
    pub z: Vec<u32>,
    pub alpha: f64,
    pub n_clusters: usize,
    pub theta: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub rho: Vec<f64>,
    pub zeta: Vec<f64>,
    pub psi: Vec<f64>,
    pub phi: Option<Vec<Vec<Vec<f64>>>>,
    pub mu: Option<Vec<Vec<f64>>>,
    pub sigma: Option<Vec<Vec<f64>>>,
    pub gamma: Option<Vec<Vec<u8>>>,
    pub log_marg_model_post: f64,
    pub accept: AcceptanceSummary,
}

/// Consumer of archived sweeps. The engine performs no file I/O itself; the
/// caller decides whether records land in memory, on disk, or both.
pub trait SweepSink {
    fn accept(&mut self, record: &SweepRecord) -> Result<()>;
}

/// In-memory archive of every record.
#[derive(Clone, Debug, Default)]
pub struct MemoryArchive {
    pub records: Vec<SweepRecord>,
}

impl MemoryArchive {
    pub fn new() -> Self {
        MemoryArchive::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_individuals(&self) -> usize {
        self.records.first().map(|r| r.z.len()).unwrap_or(0)
    }
}

impl SweepSink for MemoryArchive {
    fn accept(&mut self, record: &SweepRecord) -> Result<()> {
        self.records.push(record.clone());
        Ok(())
    }
}

/// Discards everything (burn-in style runs and tests).
pub struct NullSink;

impl SweepSink for NullSink {
    fn accept(&mut self, _record: &SweepRecord) -> Result<()> {
        Ok(())
    }
}

/// Fans a record out to several sinks.
pub struct TeeSink<'a> {
    pub sinks: Vec<&'a mut dyn SweepSink>,
}

impl SweepSink for TeeSink<'_> {
    fn accept(&mut self, record: &SweepRecord) -> Result<()> {
        for s in self.sinks.iter_mut() {
            s.accept(record)?;
        }
        Ok(())
    }
}
