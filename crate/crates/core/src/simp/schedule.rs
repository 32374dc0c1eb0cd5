use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of the penalization table: from outer iteration `from` onward use
/// `(p, p0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleStage {
    pub from: usize,
    pub p: f64,
    pub p0: f64,
}

/// Piecewise-constant continuation of `(p, p0)` over outer iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PenalizationSchedule {
    stages: Vec<ScheduleStage>,
}

impl Default for PenalizationSchedule {
    fn default() -> Self {
        PenalizationSchedule {
            stages: vec![
                ScheduleStage {
                    from: 1,
                    p: 1.0,
                    p0: 1.0,
                },
                ScheduleStage {
                    from: 10,
                    p: 2.0,
                    p0: 4.0,
                },
                ScheduleStage {
                    from: 25,
                    p: 3.0,
                    p0: 6.0,
                },
                ScheduleStage {
                    from: 50,
                    p: 3.0,
                    p0: 8.0,
                },
            ],
        }
    }
}

impl PenalizationSchedule {
    pub fn new(stages: Vec<ScheduleStage>) -> Result<Self> {
        let s = PenalizationSchedule { stages };
        s.validate()?;
        Ok(s)
    }

    /// A single stage used for every iteration.
    pub fn constant(p: f64, p0: f64) -> Self {
        PenalizationSchedule {
            stages: vec![ScheduleStage { from: 1, p, p0 }],
        }
    }

    pub fn stages(&self) -> &[ScheduleStage] {
        &self.stages
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("penalization schedule: {m}")));
        let Some(first) = self.stages.first() else {
            return bad("no stages");
        };
        if first.from != 1 {
            return bad("first stage must start at iteration 1");
        }
        for s in &self.stages {
            if !(s.p >= 1.0 && s.p.is_finite()) || !(s.p0 > 0.0 && s.p0.is_finite()) {
                return bad("need p >= 1 and p0 > 0");
            }
        }
        for w in self.stages.windows(2) {
            if w[1].from <= w[0].from {
                return bad("stages must start at increasing iterations");
            }
            if w[1].p < w[0].p || w[1].p0 < w[0].p0 {
                return bad("p and p0 must be non-decreasing");
            }
        }
        Ok(())
    }

    /// `(p, p0)` at outer iteration `k ≥ 1`.
    pub fn at(&self, k: usize) -> (f64, f64) {
        let s = self
            .stages
            .iter()
            .rev()
            .find(|s| s.from <= k)
            .unwrap_or(&self.stages[0]);
        (s.p, s.p0)
    }

    /// Whether iteration `k` already uses the last stage.
    pub fn is_final(&self, k: usize) -> bool {
        self.stages.last().is_none_or(|s| k >= s.from)
    }
}

/// `(p, p0)` of the default table at outer iteration `k`.
pub fn penalization_schedule(k: usize) -> (f64, f64) {
    PenalizationSchedule::default().at(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_table_endpoints() {
        assert_eq!(penalization_schedule(1), (1.0, 1.0));
        assert_eq!(penalization_schedule(50), (3.0, 8.0));
        assert_eq!(penalization_schedule(500), (3.0, 8.0));
        let s = PenalizationSchedule::default();
        assert!(!s.is_final(49) && s.is_final(50));
        s.validate().unwrap();
    }

    #[test]
    fn monotone() {
        let mut prev = penalization_schedule(1);
        for k in 2..200 {
            let cur = penalization_schedule(k);
            assert!(cur.0 >= prev.0 && cur.1 >= prev.1);
            prev = cur;
        }
    }

    #[test]
    fn rejects_decreasing_table() {
        let stages = vec![
            ScheduleStage {
                from: 1,
                p: 3.0,
                p0: 8.0,
            },
            ScheduleStage {
                from: 5,
                p: 2.0,
                p0: 8.0,
            },
        ];
        assert!(PenalizationSchedule::new(stages).is_err());
        assert!(PenalizationSchedule::new(vec![]).is_err());
    }

    #[test]
    fn toml_round_trip() {
        #[derive(Serialize, Deserialize)]
        struct W {
            schedule: PenalizationSchedule,
        }
        let w = W {
            schedule: PenalizationSchedule::default(),
        };
        let text = toml::to_string(&w).unwrap();
        let back: W = toml::from_str(&text).unwrap();
        assert_eq!(back.schedule, PenalizationSchedule::default());
    }
}
