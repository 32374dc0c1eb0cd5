//! Implicit Newmark-β integration of `M·d̈ + C·ḋ + K·d = F(t)`.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{LoadProgram, Mesh};
use crate::sparse::{factor_spd, norm2, Factorization, SparseSymMatrix, Symbolic};

/// Integration constants of the Newmark scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
}

pub fn newmark_coefficients(alpha: f64, beta: f64, dt: f64) -> Coefficients {
    Coefficients {
        c0: 1.0 / (alpha * dt * dt),
        c1: beta / (alpha * dt),
        c2: 1.0 / (alpha * dt),
        c3: 1.0 / (2.0 * alpha) - 1.0,
        c4: beta / alpha - 1.0,
        c5: dt * (beta / (2.0 * alpha) - 1.0),
        c6: dt * (1.0 - beta),
        c7: beta * dt,
    }
}

/// Scheme parameters and time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewmarkParams {
    pub alpha: f64,
    pub beta: f64,
    pub dt: f64,
    pub intervals: usize,
}

impl NewmarkParams {
    /// Average-acceleration scheme (`α = 0.25`, `β = 0.5`).
    pub fn average_acceleration(dt: f64, intervals: usize) -> Self {
        NewmarkParams {
            alpha: 0.25,
            beta: 0.5,
            dt,
            intervals,
        }
    }

    /// Average-acceleration scheme on the grid of a load program.
    pub fn for_program(program: &LoadProgram) -> Self {
        Self::average_acceleration(program.dt(), program.intervals)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta >= 0.0 && self.dt > 0.0) || self.intervals == 0 {
            return Err(Error::InvalidParameter(
                "Newmark parameters need alpha > 0, dt > 0, at least one interval".into(),
            ));
        }
        Ok(())
    }

    pub fn coefficients(&self) -> Coefficients {
        newmark_coefficients(self.alpha, self.beta, self.dt)
    }

    pub fn t_end(&self) -> f64 {
        self.dt * self.intervals as f64
    }
}

/// Rayleigh damping `C = a_M·M + a_K·K`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DampingSpec {
    pub a_m: f64,
    pub a_k: f64,
}

impl DampingSpec {
    pub fn is_zero(&self) -> bool {
        self.a_m == 0.0 && self.a_k == 0.0
    }

    /// `None` when undamped.
    pub fn matrix(&self, k: &SparseSymMatrix, m: &SparseSymMatrix) -> Result<Option<SparseSymMatrix>> {
        if !(self.a_m >= 0.0 && self.a_k >= 0.0) {
            return Err(Error::InvalidParameter(
                "Rayleigh coefficients must be non-negative".into(),
            ));
        }
        if self.is_zero() {
            return Ok(None);
        }
        SparseSymMatrix::linear_combination(&[(self.a_m, m), (self.a_k, k)]).map(Some)
    }
}

/// Displacement, velocity and acceleration at the end of an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientState {
    pub d: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub interval: usize,
}

impl TransientState {
    pub fn zeros(h: usize) -> Self {
        TransientState {
            d: vec![0.0; h],
            v: vec![0.0; h],
            a: vec![0.0; h],
            interval: 0,
        }
    }

    fn is_finite(&self) -> bool {
        self.d.iter().chain(&self.v).chain(&self.a).all(|x| x.is_finite())
    }
}

/// Source of the external force at the grid instants `t_i = i·Δt`.
pub trait LoadHistory {
    fn dim(&self) -> usize;
    fn force(&self, t: f64) -> Result<Vec<f64>>;
}

/// A load program evaluated on a mesh.
pub struct ProgramLoads<'a> {
    pub mesh: &'a Mesh,
    pub program: &'a LoadProgram,
}

impl LoadHistory for ProgramLoads<'_> {
    fn dim(&self) -> usize {
        self.mesh.num_free()
    }

    fn force(&self, t: f64) -> Result<Vec<f64>> {
        self.program.force_at(self.mesh, t)
    }
}

/// Force given by a closure of time.
pub struct FnLoads<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(f64) -> Vec<f64>> LoadHistory for FnLoads<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn force(&self, t: f64) -> Result<Vec<f64>> {
        let f = (self.f)(t);
        if f.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: f.len(),
            });
        }
        Ok(f)
    }
}

/// `K̂ = K + c0·M + c1·C`.
pub fn effective_stiffness(
    k: &SparseSymMatrix,
    m: &SparseSymMatrix,
    c: Option<&SparseSymMatrix>,
    coeffs: &Coefficients,
) -> Result<SparseSymMatrix> {
    let mut terms = vec![(1.0, k), (coeffs.c0, m)];
    if let Some(c) = c {
        terms.push((coeffs.c1, c));
    }
    SparseSymMatrix::linear_combination(&terms)
}

/// `d̈0 = M⁻¹(F0 − C·v0 − K·d0)`. Returns zero without factoring `M` when the
/// right-hand side vanishes.
pub fn initial_acceleration(
    m: &SparseSymMatrix,
    c: Option<&SparseSymMatrix>,
    k: &SparseSymMatrix,
    d0: &[f64],
    v0: &[f64],
    f0: &[f64],
) -> Result<Vec<f64>> {
    let h = m.dim();
    for len in [d0.len(), v0.len(), f0.len(), k.dim()] {
        if len != h {
            return Err(Error::DimensionMismatch {
                expected: h,
                actual: len,
            });
        }
    }
    let mut rhs = f0.to_vec();
    k.matvec_add(-1.0, d0, &mut rhs);
    if let Some(c) = c {
        c.matvec_add(-1.0, v0, &mut rhs);
    }
    if rhs.iter().all(|&x| x == 0.0) {
        return Ok(vec![0.0; h]);
    }
    let fact = factor_spd(m).map_err(|e| match e {
        Error::NonPositivePivot { index, .. } => Error::SingularMass { dof: index },
        other => other,
    })?;
    fact.solve(&rhs)
}

/// `F̂ = F + M(c0·d + c2·ḋ + c3·d̈) + C(c1·d + c4·ḋ + c5·d̈)`.
pub fn effective_load(
    state: &TransientState,
    f_next: &[f64],
    m: &SparseSymMatrix,
    c: Option<&SparseSymMatrix>,
    coeffs: &Coefficients,
) -> Vec<f64> {
    let mut fhat = f_next.to_vec();
    let combine = |x: f64, y: f64, z: f64| -> Vec<f64> {
        (0..state.d.len())
            .map(|i| x * state.d[i] + y * state.v[i] + z * state.a[i])
            .collect()
    };
    m.matvec_add(1.0, &combine(coeffs.c0, coeffs.c2, coeffs.c3), &mut fhat);
    if let Some(c) = c {
        c.matvec_add(1.0, &combine(coeffs.c1, coeffs.c4, coeffs.c5), &mut fhat);
    }
    fhat
}

/// Acceleration and velocity updates given the new displacement.
pub fn advance(state: &TransientState, d_new: Vec<f64>, coeffs: &Coefficients) -> TransientState {
    let h = d_new.len();
    let mut a = vec![0.0; h];
    let mut v = vec![0.0; h];
    for i in 0..h {
        a[i] = coeffs.c0 * (d_new[i] - state.d[i]) - coeffs.c2 * state.v[i] - coeffs.c3 * state.a[i];
        v[i] = state.v[i] + coeffs.c6 * state.a[i] + coeffs.c7 * a[i];
    }
    TransientState {
        d: d_new,
        v,
        a,
        interval: state.interval + 1,
    }
}

/// One interval with a factored effective stiffness.
pub fn step(
    state: &TransientState,
    f_next: &[f64],
    khat: &Factorization,
    m: &SparseSymMatrix,
    c: Option<&SparseSymMatrix>,
    coeffs: &Coefficients,
) -> Result<TransientState> {
    if f_next.len() != state.d.len() {
        return Err(Error::DimensionMismatch {
            expected: state.d.len(),
            actual: f_next.len(),
        });
    }
    let d_new = khat.solve(&effective_load(state, f_next, m, c, coeffs))?;
    Ok(advance(state, d_new, coeffs))
}

/// Column-stacked displacement history `U = [d_1 … d_l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    u: DMatrix<f64>,
    times: Vec<f64>,
}

impl SnapshotMatrix {
    pub fn new(u: DMatrix<f64>, times: Vec<f64>) -> Result<Self> {
        if times.len() != u.ncols() {
            return Err(Error::DimensionMismatch {
                expected: u.ncols(),
                actual: times.len(),
            });
        }
        Ok(SnapshotMatrix { u, times })
    }

    /// Number of DOFs `h`.
    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    /// Number of snapshots `l`.
    pub fn len(&self) -> usize {
        self.u.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.u.ncols() == 0
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let h = self.dim();
        &self.u.as_slice()[i * h..(i + 1) * h]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Largest column-wise relative 2-norm difference against a reference.
    pub fn max_relative_column_error(&self, reference: &SnapshotMatrix) -> f64 {
        (0..self.len().min(reference.len()))
            .map(|i| {
                let r = reference.column(i);
                let diff: Vec<f64> = self.column(i).iter().zip(r).map(|(a, b)| a - b).collect();
                let scale = norm2(r);
                if scale == 0.0 {
                    norm2(&diff)
                } else {
                    norm2(&diff) / scale
                }
            })
            .fold(0.0, f64::max)
    }

    /// `max |U − U_ref| / max |U_ref|` over all entries.
    pub fn max_relative_nodal_error(&self, reference: &SnapshotMatrix) -> f64 {
        let scale = reference.u.amax();
        let diff = (&self.u - &reference.u).amax();
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }

    /// CSV with `h` rows and `l` columns, headed by the snapshot times.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let line = |v: Vec<String>| v.join(",");
        let write = |w: &mut BufWriter<_>, s: String| writeln!(w, "{s}").map_err(|e| Error::io(path, e));
        write(&mut w, line(self.times.iter().map(|t| format!("{t:e}")).collect()))?;
        for r in 0..self.dim() {
            write(
                &mut w,
                line((0..self.len()).map(|c| format!("{:e}", self.u[(r, c)])).collect()),
            )?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let parse_row = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .map(|x| {
                    x.trim().parse::<f64>().map_err(|e| Error::Parse {
                        what: path.display().to_string(),
                        msg: e.to_string(),
                    })
                })
                .collect()
        };
        let mut lines = std::io::BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse {
                what: path.display().to_string(),
                msg: "empty file".into(),
            })?
            .map_err(|e| Error::io(path, e))?;
        let times = parse_row(&header)?;
        let mut rows = Vec::new();
        for line in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row = parse_row(&line)?;
            if row.len() != times.len() {
                return Err(Error::DimensionMismatch {
                    expected: times.len(),
                    actual: row.len(),
                });
            }
            rows.push(row);
        }
        let u = DMatrix::from_fn(rows.len(), times.len(), |r, c| rows[r][c]);
        Self::new(u, times)
    }
}

/// Time loop against a factored `K̂`, starting from `initial`. `observe` sees
/// every state after it is computed.
pub fn integrate(
    khat: &Factorization,
    m: &SparseSymMatrix,
    c: Option<&SparseSymMatrix>,
    loads: &dyn LoadHistory,
    params: &NewmarkParams,
    initial: TransientState,
    mut observe: impl FnMut(&TransientState),
) -> Result<SnapshotMatrix> {
    params.validate()?;
    let h = m.dim();
    let coeffs = params.coefficients();
    let mut u = DMatrix::zeros(h, params.intervals);
    let mut times = Vec::with_capacity(params.intervals);
    let mut state = initial;
    for i in 1..=params.intervals {
        let t = i as f64 * params.dt;
        let f = loads.force(t)?;
        state = step(&state, &f, khat, m, c, &coeffs)?;
        if !state.is_finite() {
            return Err(Error::NonFiniteState { interval: i });
        }
        u.column_mut(i - 1).copy_from_slice(&state.d);
        times.push(t);
        observe(&state);
    }
    SnapshotMatrix::new(u, times)
}

/// Initial state from `d0`, `v0` (zero when `None`) and the load at `t = 0`.
pub fn initial_state(
    k: &SparseSymMatrix,
    m: &SparseSymMatrix,
    c: Option<&SparseSymMatrix>,
    loads: &dyn LoadHistory,
    d0: Option<&[f64]>,
    v0: Option<&[f64]>,
) -> Result<TransientState> {
    let h = m.dim();
    if loads.dim() != h {
        return Err(Error::DimensionMismatch {
            expected: h,
            actual: loads.dim(),
        });
    }
    let d = d0.map_or_else(|| vec![0.0; h], <[f64]>::to_vec);
    let v = v0.map_or_else(|| vec![0.0; h], <[f64]>::to_vec);
    let a = initial_acceleration(m, c, k, &d, &v, &loads.force(0.0)?)?;
    Ok(TransientState { d, v, a, interval: 0 })
}

/// Full transient solve: factors `K̂` once and records every displacement.
#[allow(clippy::too_many_arguments)]
pub fn solve_transient(
    k: &SparseSymMatrix,
    m: &SparseSymMatrix,
    damping: &DampingSpec,
    loads: &dyn LoadHistory,
    params: &NewmarkParams,
    d0: Option<&[f64]>,
    v0: Option<&[f64]>,
) -> Result<SnapshotMatrix> {
    solve_transient_with(None, k, m, damping, loads, params, d0, v0)
}

/// As [`solve_transient`], reusing a precomputed ordering when given.
#[allow(clippy::too_many_arguments)]
pub fn solve_transient_with(
    symbolic: Option<&Symbolic>,
    k: &SparseSymMatrix,
    m: &SparseSymMatrix,
    damping: &DampingSpec,
    loads: &dyn LoadHistory,
    params: &NewmarkParams,
    d0: Option<&[f64]>,
    v0: Option<&[f64]>,
) -> Result<SnapshotMatrix> {
    params.validate()?;
    let c = damping.matrix(k, m)?;
    let khat = effective_stiffness(k, m, c.as_ref(), &params.coefficients())?;
    let fact = match symbolic {
        Some(s) => s.factor(&khat)?,
        None => factor_spd(&khat)?,
    };
    let initial = initial_state(k, m, c.as_ref(), loads, d0, v0)?;
    integrate(&fact, m, c.as_ref(), loads, params, initial, |_| {})
}
