use serde::Serialize;

use crate::analysis::{coherence_norm, GroupSpec, GroupedPopulations};
use crate::error::Result;
use crate::linalg::{anti_hermiticity, CMatrix};
use crate::structure::SocBasis;
use crate::units::au_to_fs;

use super::{Recorder, Snapshot, StepStats};

/// Observables at one output time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableRecord {
    pub t_fs: f64,
    pub trace: f64,
    pub groups: Option<GroupedPopulations>,
    /// SOC-state populations of the selected states.
    pub selected: Vec<f64>,
    pub coherence_norm: f64,
    pub max_anti_hermiticity: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub records: Vec<ObservableRecord>,
    pub snapshots: Vec<Snapshot>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn times_fs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t_fs).collect()
    }
}

/// Collects observables and, every `snapshot_stride` records, the full ρ.
pub struct ObservableRecorder<'a> {
    grouping: Option<(&'a SocBasis, &'a GroupSpec)>,
    selected: Vec<usize>,
    snapshot_stride: Option<usize>,
    trajectory: Trajectory,
}

impl<'a> ObservableRecorder<'a> {
    pub fn new(grouping: Option<(&'a SocBasis, &'a GroupSpec)>, selected: Vec<usize>, snapshot_stride: Option<usize>) -> Self {
        Self {
            grouping,
            selected,
            snapshot_stride: snapshot_stride.filter(|&s| s > 0),
            trajectory: Trajectory::default(),
        }
    }

    pub fn finish(mut self, stats: StepStats) -> Trajectory {
        self.trajectory.stats = stats;
        self.trajectory
    }
}

impl Recorder for ObservableRecorder<'_> {
    fn record(&mut self, t: f64, rho: &CMatrix) -> Result<()> {
        let t_fs = au_to_fs(t);
        let n = rho.nrows();
        let groups = match self.grouping {
            Some((soc, spec)) => Some(spec.evaluate(rho, soc)?),
            None => None,
        };
        let k = self.trajectory.records.len();
        self.trajectory.records.push(ObservableRecord {
            t_fs,
            trace: (0..n).map(|a| rho[(a, a)].re).sum(),
            groups,
            selected: self.selected.iter().map(|&a| rho[(a, a)].re).collect(),
            coherence_norm: coherence_norm(rho),
            max_anti_hermiticity: anti_hermiticity(rho),
        });
        if self.snapshot_stride.is_some_and(|s| k % s == 0) {
            self.trajectory.snapshots.push(Snapshot { t_fs, rho: rho.clone() });
        }
        Ok(())
    }
}
