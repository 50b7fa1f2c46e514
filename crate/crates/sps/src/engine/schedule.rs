//! Recorded cycle schedules: the breakpoints and per-step proposal
//! covariances an adaptive run learned, frozen so a second pass (possibly in
//! a separate process) can replay them as a fully nonadaptive run.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One recorded cycle: where the correction phase stopped and the proposal
/// covariance used at every mutation step.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordedCycle {
    /// Observation count at the end of the cycle, `t_ℓ`.
    pub breakpoint: usize,
    /// Proposal covariance `Σ_{ℓr}` for each step `r = 1..=R_ℓ`.
    pub proposal_covs: Vec<DMatrix<f64>>,
    /// Step-size scaling factors, recorded for diagnostics only.
    pub h_values: Vec<f64>,
}

impl RecordedCycle {
    /// Number of mutation steps `R_ℓ`.
    pub fn m_steps(&self) -> usize {
        self.proposal_covs.len()
    }
}

/// A complete schedule: `t_0 = 0 < t_1 < … < t_L = T` plus the mutation
/// parameters of every cycle.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CycleSchedule {
    pub dim: usize,
    pub cycles: Vec<RecordedCycle>,
}

impl CycleSchedule {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            cycles: Vec::new(),
        }
    }

    /// Breakpoints including the leading zero: `[0, t_1, …, t_L]`.
    pub fn breakpoints(&self) -> Vec<usize> {
        let mut b = vec![0];
        b.extend(self.cycles.iter().map(|c| c.breakpoint));
        b
    }

    /// Per-cycle mutation step counts `R_ℓ`.
    pub fn m_step_counts(&self) -> Vec<usize> {
        self.cycles.iter().map(|c| c.m_steps()).collect()
    }

    /// Total mutation steps across all cycles.
    pub fn total_m_steps(&self) -> usize {
        self.cycles.iter().map(|c| c.m_steps()).sum()
    }

    /// Check internal consistency and agreement with a dataset of `t_total`
    /// observations and parameter dimension `dim`.
    pub fn validate(&self, dim: usize, t_total: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::Schedule(format!(
                "schedule was recorded for dimension {}, model has {dim}",
                self.dim
            )));
        }
        if self.cycles.is_empty() {
            return Err(Error::Schedule("schedule has no cycles".into()));
        }
        let mut prev = 0;
        for (i, cycle) in self.cycles.iter().enumerate() {
            if cycle.breakpoint <= prev {
                return Err(Error::Schedule(format!(
                    "breakpoints must increase strictly: cycle {i} has t = {} after {prev}",
                    cycle.breakpoint
                )));
            }
            prev = cycle.breakpoint;
            for (r, cov) in cycle.proposal_covs.iter().enumerate() {
                if cov.nrows() != self.dim || cov.ncols() != self.dim {
                    return Err(Error::Schedule(format!(
                        "cycle {i} step {r}: covariance is {}×{}, expected {}×{}",
                        cov.nrows(),
                        cov.ncols(),
                        self.dim,
                        self.dim
                    )));
                }
            }
        }
        if prev != t_total {
            return Err(Error::Schedule(format!(
                "schedule ends at t = {prev} but the dataset has {t_total} observations"
            )));
        }
        Ok(())
    }

    /// Serialize to the versioned JSON document (matrices row-major).
    pub fn to_json(&self) -> Result<String> {
        let doc = ScheduleDoc {
            version: SCHEDULE_VERSION,
            dim: self.dim,
            breakpoints: self.cycles.iter().map(|c| c.breakpoint).collect(),
            cycles: self
                .cycles
                .iter()
                .map(|c| CycleDoc {
                    m_steps: c.m_steps(),
                    proposal_covs: c
                        .proposal_covs
                        .iter()
                        .map(|m| {
                            let mut flat = Vec::with_capacity(self.dim * self.dim);
                            for r in 0..m.nrows() {
                                for col in 0..m.ncols() {
                                    flat.push(m[(r, col)]);
                                }
                            }
                            flat
                        })
                        .collect(),
                    h_values: c.h_values.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parse the versioned JSON document produced by [`CycleSchedule::to_json`].
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScheduleDoc = serde_json::from_str(text)?;
        if doc.version != SCHEDULE_VERSION {
            return Err(Error::Schedule(format!(
                "unsupported schedule version {} (expected {SCHEDULE_VERSION})",
                doc.version
            )));
        }
        if doc.breakpoints.len() != doc.cycles.len() {
            return Err(Error::Schedule(format!(
                "{} breakpoints for {} cycles",
                doc.breakpoints.len(),
                doc.cycles.len()
            )));
        }
        let d = doc.dim;
        let mut cycles = Vec::with_capacity(doc.cycles.len());
        for (i, (bp, c)) in doc.breakpoints.iter().zip(doc.cycles).enumerate() {
            if c.proposal_covs.len() != c.m_steps {
                return Err(Error::Schedule(format!(
                    "cycle {i}: m_steps = {} but {} covariances",
                    c.m_steps,
                    c.proposal_covs.len()
                )));
            }
            let mut covs = Vec::with_capacity(c.proposal_covs.len());
            for (r, flat) in c.proposal_covs.iter().enumerate() {
                if flat.len() != d * d {
                    return Err(Error::Schedule(format!(
                        "cycle {i} step {r}: expected {} entries, got {}",
                        d * d,
                        flat.len()
                    )));
                }
                covs.push(DMatrix::from_row_slice(d, d, flat));
            }
            cycles.push(RecordedCycle {
                breakpoint: *bp,
                proposal_covs: covs,
                h_values: c.h_values,
            });
        }
        Ok(Self { dim: d, cycles })
    }
}

const SCHEDULE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ScheduleDoc {
    version: u32,
    dim: usize,
    breakpoints: Vec<usize>,
    cycles: Vec<CycleDoc>,
}

#[derive(Serialize, Deserialize)]
struct CycleDoc {
    m_steps: usize,
    proposal_covs: Vec<Vec<f64>>,
    h_values: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_schedule() -> CycleSchedule {
        CycleSchedule {
            dim: 2,
            cycles: vec![
                RecordedCycle {
                    breakpoint: 3,
                    proposal_covs: vec![DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 2.0])],
                    h_values: vec![0.5],
                },
                RecordedCycle {
                    breakpoint: 7,
                    proposal_covs: vec![
                        DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]),
                        DMatrix::from_row_slice(2, 2, &[0.4, 0.0, 0.0, 0.6]),
                    ],
                    h_values: vec![0.51, 0.52],
                },
            ],
        }
    }

    #[test]
    fn json_round_trip() {
        let sched = sample_schedule();
        let text = sched.to_json().unwrap();
        let back = CycleSchedule::from_json(&text).unwrap();
        assert_eq!(sched, back);
        assert!(text.contains("\"version\""));
    }

    #[test]
    fn validate_catches_mismatches() {
        let sched = sample_schedule();
        assert!(sched.validate(2, 7).is_ok());
        assert!(sched.validate(3, 7).is_err());
        assert!(sched.validate(2, 9).is_err());

        let mut bad = sample_schedule();
        bad.cycles[1].breakpoint = 3;
        assert!(bad.validate(2, 3).is_err());
    }

    #[test]
    fn breakpoints_include_origin() {
        let sched = sample_schedule();
        assert_eq!(sched.breakpoints(), vec![0, 3, 7]);
        assert_eq!(sched.m_step_counts(), vec![1, 2]);
        assert_eq!(sched.total_m_steps(), 3);
    }
}
