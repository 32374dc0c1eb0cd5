use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Amplitude, LoadKind, LoadProgram, Material, Mesh, MovingLoad, Passive, PointLoad, RandomLoad};
use crate::error::{Error, Result};

/// Circular passive-void region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Point load placed at the grid node nearest to `position`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointLoadSpec {
    pub position: [f64; 2],
    pub direction: usize,
    pub amplitude: Amplitude,
}

/// 2D cantilever clamped on its left edge, optionally with a hole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CantileverSpec {
    pub length: f64,
    pub height: f64,
    pub nelx: usize,
    pub nely: usize,
    pub hole: Option<HoleSpec>,
    pub loads: Vec<PointLoadSpec>,
    pub t_end: f64,
    pub intervals: usize,
    pub material: Material,
}

impl Default for CantileverSpec {
    fn default() -> Self {
        CantileverSpec {
            length: 2.0,
            height: 1.0,
            nelx: 60,
            nely: 30,
            hole: Some(HoleSpec {
                center: [0.5, 0.5],
                radius: 0.2,
            }),
            loads: vec![
                PointLoadSpec {
                    position: [2.0, 1.0],
                    direction: 1,
                    amplitude: Amplitude::Sine {
                        amplitude: -1000.0,
                        frequency: 50.0,
                        phase: 0.0,
                    },
                },
                PointLoadSpec {
                    position: [1.0, 0.0],
                    direction: 1,
                    amplitude: Amplitude::Sine {
                        amplitude: -1000.0,
                        frequency: 100.0,
                        phase: 0.0,
                    },
                },
            ],
            t_end: 0.05,
            intervals: 200,
            material: Material::steel(),
        }
    }
}

/// Bridge panel on two pinned bottom corners with a load crossing the deck.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeSpec {
    pub length: f64,
    pub height: f64,
    pub nelx: usize,
    pub nely: usize,
    /// Total load (N).
    pub force: f64,
    /// Footprint length (m).
    pub footprint: f64,
    /// Speed (km/h).
    pub speed_kmh: f64,
    /// Keep the top element row as frozen solid.
    pub solid_deck: bool,
    pub t_end: f64,
    pub intervals: usize,
    pub material: Material,
}

impl Default for BridgeSpec {
    fn default() -> Self {
        BridgeSpec {
            length: 30.0,
            height: 13.5,
            nelx: 60,
            nely: 27,
            force: 100e3,
            footprint: 5.0,
            speed_kmh: 30.0,
            solid_deck: true,
            t_end: 4.5,
            intervals: 200,
            material: Material {
                thickness: 1.0,
                ..Material::steel()
            },
        }
    }
}

/// 3D cantilever block clamped on `x = 0` with a random load on `x = L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxSpec {
    pub size: [f64; 3],
    pub nel: [usize; 3],
    /// Bounds of the total load magnitude per interval (N).
    pub band: [f64; 2],
    /// Load direction (0 = x, 1 = y, 2 = z); the load acts in the negative
    /// sense.
    pub direction: usize,
    pub t_end: f64,
    pub intervals: usize,
    pub material: Material,
}

impl Default for BoxSpec {
    fn default() -> Self {
        BoxSpec {
            size: [0.15, 0.1, 0.06],
            nel: [12, 8, 5],
            band: [500.0, 2000.0],
            direction: 1,
            t_end: 0.01,
            intervals: 200,
            material: Material::steel(),
        }
    }
}

/// Case description as written in a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum CaseSpec {
    CantileverHole(CantileverSpec),
    Bridge(BridgeSpec),
    Box3d(BoxSpec),
}

impl CaseSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CaseSpec::CantileverHole(_) => "cantilever_hole",
            CaseSpec::Bridge(_) => "bridge",
            CaseSpec::Box3d(_) => "box3d",
        }
    }

    /// Same case at another resolution. For the 3D box the first two counts
    /// are replaced and the third is kept.
    pub fn with_resolution(&self, nelx: usize, nely: usize) -> CaseSpec {
        let mut out = self.clone();
        match &mut out {
            CaseSpec::CantileverHole(s) => (s.nelx, s.nely) = (nelx, nely),
            CaseSpec::Bridge(s) => (s.nelx, s.nely) = (nelx, nely),
            CaseSpec::Box3d(s) => (s.nel[0], s.nel[1]) = (nelx, nely),
        }
        out
    }

    pub fn material(&self) -> &Material {
        match self {
            CaseSpec::CantileverHole(s) => &s.material,
            CaseSpec::Bridge(s) => &s.material,
            CaseSpec::Box3d(s) => &s.material,
        }
    }
}

/// A ready-to-analyse problem.
#[derive(Debug, Clone)]
pub struct Case {
    pub mesh: Mesh,
    pub material: Material,
    pub loads: LoadProgram,
}

/// Builds mesh, material and load program for a case; `seed` drives random
/// loads.
pub fn build_case(spec: &CaseSpec, seed: u64) -> Result<Case> {
    let case = match spec {
        CaseSpec::CantileverHole(s) => cantilever(s)?,
        CaseSpec::Bridge(s) => bridge(s)?,
        CaseSpec::Box3d(s) => box3d(s, seed)?,
    };
    case.material.validate()?;
    case.loads.validate(&case.mesh)?;
    Ok(case)
}

fn check_extent(length: f64, height: f64, nelx: usize, nely: usize) -> Result<()> {
    if !(length > 0.0 && height > 0.0) || nelx == 0 || nely == 0 {
        return Err(Error::InvalidCase("dimensions and resolution must be positive".into()));
    }
    Ok(())
}

fn cantilever(s: &CantileverSpec) -> Result<Case> {
    check_extent(s.length, s.height, s.nelx, s.nely)?;
    let dx = s.length / s.nelx as f64;
    let dy = s.height / s.nely as f64;
    let mut mesh = Mesh::grid_2d(s.nelx, s.nely, dx, dy)?;

    if let Some(hole) = &s.hole {
        let [cx, cy] = hole.center;
        let r = hole.radius;
        if !(r > 0.0) || cx - r < 0.0 || cx + r > s.length || cy - r < 0.0 || cy + r > s.height {
            return Err(Error::InvalidCase("hole lies outside the domain".into()));
        }
        let across = 2.0 * r / dx.max(dy);
        if across < 4.0 - 1e-9 {
            return Err(Error::InvalidCase(format!(
                "hole spans only {across:.2} elements; at least 4 are needed"
            )));
        }
        for e in 0..mesh.num_elements() {
            let [x, y, _] = mesh.element_center(e);
            if (x - cx).powi(2) + (y - cy).powi(2) <= r * r {
                mesh.set_passive(e, Passive::Void);
            }
        }
    }

    let fixed = (0..=s.nely)
        .flat_map(|j| {
            let n = mesh.node_id(0, j, 0);
            [mesh.dof(n, 0), mesh.dof(n, 1)]
        })
        .collect();
    mesh.set_fixed(fixed);

    let loads = s
        .loads
        .iter()
        .map(|l| PointLoad {
            node: mesh.nearest_node([l.position[0], l.position[1], 0.0]),
            direction: l.direction,
            amplitude: l.amplitude.clone(),
        })
        .collect();
    Ok(Case {
        mesh,
        material: s.material,
        loads: LoadProgram {
            kind: LoadKind::Point(loads),
            t_end: s.t_end,
            intervals: s.intervals,
        },
    })
}

fn bridge(s: &BridgeSpec) -> Result<Case> {
    check_extent(s.length, s.height, s.nelx, s.nely)?;
    let mut mesh = Mesh::grid_2d(s.nelx, s.nely, s.length / s.nelx as f64, s.height / s.nely as f64)?;
    if s.solid_deck {
        for ix in 0..s.nelx {
            let e = mesh.element_id(ix, s.nely - 1, 0);
            mesh.set_passive(e, Passive::Solid);
        }
    }
    let left = mesh.node_id(0, 0, 0);
    let right = mesh.node_id(s.nelx, 0, 0);
    mesh.set_fixed(vec![
        mesh.dof(left, 0),
        mesh.dof(left, 1),
        mesh.dof(right, 0),
        mesh.dof(right, 1),
    ]);
    let deck_nodes: Vec<usize> = (0..=s.nelx).map(|i| mesh.node_id(i, s.nely, 0)).collect();
    let deck_x = deck_nodes.iter().map(|&n| mesh.node_coords(n)[0]).collect();
    Ok(Case {
        mesh,
        material: s.material,
        loads: LoadProgram {
            kind: LoadKind::Moving(MovingLoad {
                total_force: s.force,
                footprint: s.footprint,
                speed: s.speed_kmh / 3.6,
                deck_nodes,
                deck_x,
            }),
            t_end: s.t_end,
            intervals: s.intervals,
        },
    })
}

fn box3d(s: &BoxSpec, seed: u64) -> Result<Case> {
    if s.size.iter().any(|&v| !(v > 0.0)) || s.nel.contains(&0) {
        return Err(Error::InvalidCase("dimensions and resolution must be positive".into()));
    }
    if !(s.band[0] >= 0.0 && s.band[1] >= s.band[0]) || s.direction > 2 {
        return Err(Error::InvalidCase("invalid random load band or direction".into()));
    }
    let h = [
        s.size[0] / s.nel[0] as f64,
        s.size[1] / s.nel[1] as f64,
        s.size[2] / s.nel[2] as f64,
    ];
    let mut mesh = Mesh::grid_3d(s.nel, h)?;
    let tol = 1e-9 * s.size[0];
    let fixed = mesh
        .nodes_where(|p| p[0] <= tol)
        .into_iter()
        .flat_map(|n| (0..3).map(move |d| 3 * n + d))
        .collect();
    mesh.set_fixed(fixed);
    let nodes = mesh.nodes_where(|p| p[0] >= s.size[0] - tol);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..s.intervals)
        .map(|_| {
            let v = if s.band[1] > s.band[0] {
                rng.random_range(s.band[0]..s.band[1])
            } else {
                s.band[0]
            };
            -v
        })
        .collect();
    Ok(Case {
        mesh,
        material: s.material,
        loads: LoadProgram {
            kind: LoadKind::Random(RandomLoad {
                nodes,
                direction: s.direction,
                samples,
            }),
            t_end: s.t_end,
            intervals: s.intervals,
        },
    })
}
