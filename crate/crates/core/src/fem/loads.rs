use serde::{Deserialize, Serialize};

use super::Mesh;
use crate::error::{Error, Result};

/// Time variation of a point load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Amplitude {
    Constant {
        value: f64,
    },
    /// `amplitude · sin(2π·frequency·t + phase)`
    Sine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `slope · t`
    Ramp {
        slope: f64,
    },
    /// Piecewise-linear through `(t, value)` points, constant outside.
    Table {
        points: Vec<(f64, f64)>,
    },
}

impl Amplitude {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Amplitude::Constant { value } => *value,
            Amplitude::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (2.0 * std::f64::consts::PI * frequency * t + phase).sin(),
            Amplitude::Ramp { slope } => slope * t,
            Amplitude::Table { points } => {
                let Some(first) = points.first() else {
                    return 0.0;
                };
                if t <= first.0 {
                    return first.1;
                }
                for w in points.windows(2) {
                    let ((t0, v0), (t1, v1)) = (w[0], w[1]);
                    if t <= t1 {
                        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
                    }
                }
                points.last().map_or(0.0, |p| p.1)
            }
        }
    }

    /// Signed value of largest magnitude over `[0, t_end]`.
    pub fn peak(&self, t_end: f64) -> f64 {
        match self {
            Amplitude::Constant { value } => *value,
            Amplitude::Sine { amplitude, .. } => *amplitude,
            Amplitude::Ramp { slope } => slope * t_end,
            Amplitude::Table { points } => points
                .iter()
                .map(|p| p.1)
                .fold(0.0, |m, v| if v.abs() > m.abs() { v } else { m }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointLoad {
    pub node: usize,
    /// 0 = x, 1 = y, 2 = z
    pub direction: usize,
    pub amplitude: Amplitude,
}

/// Uniform distributed load of fixed length traversing a row of deck nodes
/// in the +x direction, acting in −y.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingLoad {
    /// Total force when the footprint lies fully on the deck (N).
    pub total_force: f64,
    /// Footprint length (m).
    pub footprint: f64,
    /// Travel speed (m/s).
    pub speed: f64,
    /// Deck nodes ordered by x.
    pub deck_nodes: Vec<usize>,
    pub deck_x: Vec<f64>,
}

impl MovingLoad {
    /// Time at which the footprint has fully left the deck.
    pub fn traverse_time(&self) -> f64 {
        let span = self.deck_x.last().copied().unwrap_or(0.0) - self.deck_x[0];
        (span + self.footprint) / self.speed
    }

    /// Consistent nodal forces (magnitudes, acting in −y) at time `t`.
    pub fn nodal_weights(&self, t: f64) -> Vec<f64> {
        let q = self.total_force / self.footprint;
        let x0 = self.deck_x[0];
        let front = x0 + self.speed * t;
        let lo = (front - self.footprint).max(x0);
        let hi = front.min(*self.deck_x.last().unwrap_or(&x0));
        let mut w = vec![0.0; self.deck_x.len()];
        if hi <= lo {
            return w;
        }
        for i in 0..self.deck_x.len().saturating_sub(1) {
            let (xa, xb) = (self.deck_x[i], self.deck_x[i + 1]);
            let (a, b) = (lo.max(xa), hi.min(xb));
            if b <= a {
                continue;
            }
            let h = xb - xa;
            // ∫ q·N dx for the two linear shape functions of the segment
            w[i] += q * ((xb - a).powi(2) - (xb - b).powi(2)) / (2.0 * h);
            w[i + 1] += q * ((b - xa).powi(2) - (a - xa).powi(2)) / (2.0 * h);
        }
        w
    }
}

/// Seeded piecewise-constant random force spread evenly over a node set.
/// Interval `i` covers `((i−1)Δt, iΔt]`; the structure starts unloaded at
/// `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomLoad {
    pub nodes: Vec<usize>,
    pub direction: usize,
    /// One total-force sample per interval.
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadKind {
    Point(Vec<PointLoad>),
    Moving(MovingLoad),
    Random(RandomLoad),
}

/// Time-dependent loading over `[0, t_end]` split into `intervals` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProgram {
    pub kind: LoadKind,
    pub t_end: f64,
    pub intervals: usize,
}

impl LoadProgram {
    pub fn dt(&self) -> f64 {
        self.t_end / self.intervals as f64
    }

    /// Checks that every loaded DOF is free and the time grid is valid.
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if !(self.t_end > 0.0) || self.intervals == 0 {
            return Err(Error::InvalidCase("time grid must be non-empty".into()));
        }
        let check = |node: usize, dir: usize| {
            if node >= mesh.num_nodes() || dir >= mesh.element_type().dofs_per_node() {
                return Err(Error::InvalidCase(format!(
                    "load at node {node} dir {dir} out of range"
                )));
            }
            if mesh.free_index(mesh.dof(node, dir)).is_none() {
                return Err(Error::InvalidCase(format!("load applied to fixed DOF at node {node}")));
            }
            Ok(())
        };
        match &self.kind {
            LoadKind::Point(loads) => {
                for l in loads {
                    check(l.node, l.direction)?;
                }
            }
            LoadKind::Moving(m) => {
                if m.deck_nodes.len() < 2 || !(m.footprint > 0.0 && m.speed > 0.0) {
                    return Err(Error::InvalidCase(
                        "moving load needs a deck and positive footprint/speed".into(),
                    ));
                }
                for &n in &m.deck_nodes {
                    check(n, 1)?;
                }
            }
            LoadKind::Random(r) => {
                if r.samples.len() != self.intervals {
                    return Err(Error::InvalidCase("one random sample per interval required".into()));
                }
                for &n in &r.nodes {
                    check(n, r.direction)?;
                }
            }
        }
        Ok(())
    }

    /// Force vector on the free DOFs at time `t`.
    pub fn force_at(&self, mesh: &Mesh, t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0 && t <= self.t_end * (1.0 + 1e-12)) {
            return Err(Error::TimeOutOfRange { t, t_end: self.t_end });
        }
        let mut f = vec![0.0; mesh.num_free()];
        let mut add = |node: usize, dir: usize, v: f64| {
            if let Some(i) = mesh.free_index(mesh.dof(node, dir)) {
                f[i] += v;
            }
        };
        match &self.kind {
            LoadKind::Point(loads) => {
                for l in loads {
                    add(l.node, l.direction, l.amplitude.at(t));
                }
            }
            LoadKind::Moving(m) => {
                for (&n, w) in m.deck_nodes.iter().zip(m.nodal_weights(t)) {
                    if w != 0.0 {
                        add(n, 1, -w);
                    }
                }
            }
            LoadKind::Random(r) => {
                let dt = self.dt();
                let k = (t / dt - 1e-9).ceil();
                if k >= 1.0 {
                    let k = (k as usize).min(r.samples.len());
                    let each = r.samples[k - 1] / r.nodes.len() as f64;
                    for &n in &r.nodes {
                        add(n, r.direction, each);
                    }
                }
            }
        }
        Ok(f)
    }

    /// Static load with every point load frozen at its peak amplitude; for
    /// moving and random programs, the grid instant of largest force norm.
    pub fn peak_static(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        if let LoadKind::Point(loads) = &self.kind {
            let mut f = vec![0.0; mesh.num_free()];
            for l in loads {
                if let Some(i) = mesh.free_index(mesh.dof(l.node, l.direction)) {
                    f[i] += l.amplitude.peak(self.t_end);
                }
            }
            return Ok(f);
        }
        let mut best = vec![0.0; mesh.num_free()];
        let mut best_norm = -1.0;
        for i in 0..=self.intervals {
            let f = self.force_at(mesh, i as f64 * self.dt())?;
            let n: f64 = f.iter().map(|v| v * v).sum();
            if n > best_norm {
                best_norm = n;
                best = f;
            }
        }
        Ok(best)
    }
}
