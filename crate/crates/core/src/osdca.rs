//! Online combined-approximation reanalysis of the Newmark equations.
//!
//! A baseline effective stiffness `K̂₀` is factored once and reused across
//! design iterations. Each modified system `K̂ = K̂₀ + ΔK̂` is solved by a
//! Galerkin projection onto a short binomial-series basis built from that
//! factorization; the basis is rebuilt when the effective load drifts and the
//! baseline is refreshed when the design changes too much.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{DensityField, Model};
use crate::newmark::{
    advance, effective_load, effective_stiffness, initial_state, DampingSpec, LoadHistory, NewmarkParams,
    SnapshotMatrix,
};
use crate::simp::MaterialInterp;
use crate::sparse::{dot, factorization_count, norm2, Factorization, SparseSymMatrix};

/// What the structural-change trigger compares the current design with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefreshReference {
    /// The design of the previous outer iteration.
    #[default]
    Previous,
    /// The design the baseline was factored at.
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OsdcaConfig {
    /// Requested basis size.
    pub s: usize,
    /// Effective-load alteration that forces a basis rebuild.
    pub tol_f: f64,
    /// Structural change that forces a baseline refresh.
    pub tol_rb: f64,
    pub refresh_reference: RefreshReference,
    /// Relative Galerkin residual above which a reused basis is rebuilt;
    /// infinite disables the check.
    pub residual_guard: f64,
}

impl Default for OsdcaConfig {
    fn default() -> Self {
        OsdcaConfig {
            s: 3,
            tol_f: 0.1,
            tol_rb: 0.01,
            refresh_reference: RefreshReference::Previous,
            residual_guard: 1e-4,
        }
    }
}

impl OsdcaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s == 0 || !(self.tol_f >= 0.0) || !(self.tol_rb >= 0.0) || !(self.residual_guard > 0.0) {
            return Err(Error::InvalidParameter(
                "OSDCA needs s >= 1 and non-negative tolerances".into(),
            ));
        }
        Ok(())
    }
}

/// Factored reference effective stiffness.
#[derive(Debug, Clone)]
pub struct Baseline {
    khat0: SparseSymMatrix,
    factor: Factorization,
    density: DensityField,
    moduli: Vec<f64>,
    c0: f64,
}

impl Baseline {
    /// Wraps an existing factorization after a residual check on a probe
    /// vector.
    pub fn new(
        khat0: SparseSymMatrix,
        factor: Factorization,
        density: DensityField,
        moduli: Vec<f64>,
        c0: f64,
    ) -> Result<Self> {
        let h = khat0.dim();
        if factor.dim() != h {
            return Err(Error::DimensionMismatch {
                expected: h,
                actual: factor.dim(),
            });
        }
        let probe: Vec<f64> = (0..h).map(|i| 1.0 + (i % 7) as f64 / 7.0).collect();
        let x = factor.solve(&probe)?;
        let mut r = khat0.matvec(&x)?;
        r.iter_mut().zip(&probe).for_each(|(a, b)| *a -= b);
        if norm2(&r) > 1e-8 * norm2(&probe) {
            return Err(Error::InvalidParameter(
                "baseline factorization does not match its matrix".into(),
            ));
        }
        Ok(Baseline {
            khat0,
            factor,
            density,
            moduli,
            c0,
        })
    }

    /// Assembles and factors `K̂₀` for a design (one factorization).
    pub fn build(
        model: &Model,
        density: &DensityField,
        interp: &MaterialInterp,
        damping: &DampingSpec,
        params: &NewmarkParams,
    ) -> Result<Self> {
        let moduli = model.moduli(density, interp);
        let k = model.stiffness_from_moduli(&moduli)?;
        let m = model.assemble_m(density, interp)?;
        let c = damping.matrix(&k, &m)?;
        let coeffs = params.coefficients();
        let khat0 = effective_stiffness(&k, &m, c.as_ref(), &coeffs)?;
        let factor = model.factor(&khat0)?;
        Self::new(khat0, factor, density.clone(), moduli, coeffs.c0)
    }

    pub fn matrix(&self) -> &SparseSymMatrix {
        &self.khat0
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factor
    }

    pub fn density(&self) -> &DensityField {
        &self.density
    }

    /// Element moduli of the baseline design.
    pub fn moduli(&self) -> &[f64] {
        &self.moduli
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn dim(&self) -> usize {
        self.khat0.dim()
    }
}

/// `ΔK̂ = (K + c0·M) − K̂₀`.
pub fn delta_effective_stiffness(
    k: &SparseSymMatrix,
    m: &SparseSymMatrix,
    c0: f64,
    baseline: &Baseline,
) -> Result<SparseSymMatrix> {
    if k.dim() != baseline.dim() {
        return Err(Error::DimensionMismatch {
            expected: baseline.dim(),
            actual: k.dim(),
        });
    }
    SparseSymMatrix::linear_combination(&[(1.0, k), (c0, m), (-1.0, &baseline.khat0)])
}

/// Unorthogonalized series `r₁ = K̂₀⁻¹F̂`, `rᵢ = −K̂₀⁻¹(ΔK̂·rᵢ₋₁)`.
pub fn raw_basis_vectors(
    baseline: &Baseline,
    delta: &SparseSymMatrix,
    fhat: &[f64],
    s: usize,
) -> Result<Vec<Vec<f64>>> {
    if norm2(fhat) == 0.0 {
        return Err(Error::ZeroLoad);
    }
    let mut r = vec![baseline.factor.solve(fhat)?];
    let mut w = vec![0.0; fhat.len()];
    for i in 1..s {
        delta.matvec_into(&r[i - 1], &mut w);
        baseline.factor.solve_in_place(&mut w);
        r.push(w.iter().map(|x| -x).collect());
    }
    Ok(r)
}

/// Orthonormal basis `r_B` with its projected stiffness `K̂_R`.
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    rb: DMatrix<f64>,
    /// `K̂·r_B`, kept for residual checks
    kq: DMatrix<f64>,
    khat_r: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    built_at: usize,
}

impl ReducedBasis {
    /// Basis size after dropping dependent vectors.
    pub fn s(&self) -> usize {
        self.rb.ncols()
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.rb
    }

    pub fn reduced_stiffness(&self) -> &DMatrix<f64> {
        &self.khat_r
    }

    /// Interval at which the basis was built.
    pub fn built_at(&self) -> usize {
        self.built_at
    }

    /// `max |r_Bᵀr_B − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.rb.transpose() * &self.rb;
        (g - DMatrix::identity(self.s(), self.s())).amax()
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Columns whose
/// remainder is below `1e-12·‖r₁‖` or `1e-10` of their own norm are dropped.
fn orthonormalize(raw: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let ref_norm = raw.first().map_or(0.0, |r| norm2(r));
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(raw.len());
    for mut v in raw {
        let own = norm2(&v);
        for _ in 0..2 {
            for qj in &q {
                let c = dot(qj, &v);
                v.iter_mut().zip(qj).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = norm2(&v);
        if n <= 1e-12 * ref_norm || n <= 1e-10 * own || n == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= n);
        q.push(v);
    }
    q
}

/// Builds the orthonormal basis and `K̂_R = r_Bᵀ(K̂₀ + ΔK̂)r_B`.
pub fn build_basis(baseline: &Baseline, delta: &SparseSymMatrix, fhat: &[f64], s: usize) -> Result<ReducedBasis> {
    build_basis_at(baseline, delta, fhat, s, 0)
}

fn build_basis_at(
    baseline: &Baseline,
    delta: &SparseSymMatrix,
    fhat: &[f64],
    s: usize,
    interval: usize,
) -> Result<ReducedBasis> {
    let q = orthonormalize(raw_basis_vectors(baseline, delta, fhat, s)?);
    let h = fhat.len();
    let s_eff = q.len();
    let mut rb = DMatrix::zeros(h, s_eff);
    let mut kq = DMatrix::zeros(h, s_eff);
    let mut w = vec![0.0; h];
    for (j, col) in q.iter().enumerate() {
        rb.column_mut(j).copy_from_slice(col);
        baseline.khat0.matvec_into(col, &mut w);
        delta.matvec_add(1.0, col, &mut w);
        kq.column_mut(j).copy_from_slice(&w);
    }
    let mut khat_r = rb.transpose() * &kq;
    // symmetrize roundoff
    let sym = (&khat_r + khat_r.transpose()) * 0.5;
    khat_r = sym;
    let chol = khat_r.clone().cholesky().ok_or(Error::SingularReducedSystem)?;
    Ok(ReducedBasis {
        rb,
        kq,
        khat_r,
        chol,
        built_at: interval,
    })
}

/// `d = r_B·K̂_R⁻¹·r_BᵀF̂`.
pub fn reduced_solve(basis: &ReducedBasis, fhat: &[f64]) -> Result<Vec<f64>> {
    Ok(solve_coefficients(basis, fhat)?.0)
}

/// Reduced solve together with the relative residual `‖F̂ − K̂d‖ / ‖F̂‖`.
pub fn reduced_solve_with_residual(basis: &ReducedBasis, fhat: &[f64]) -> Result<(Vec<f64>, f64)> {
    let (d, lambda) = solve_coefficients(basis, fhat)?;
    let kd = &basis.kq * lambda;
    let r: Vec<f64> = fhat.iter().zip(kd.iter()).map(|(f, k)| f - k).collect();
    Ok((d, norm2(&r) / norm2(fhat)))
}

fn solve_coefficients(basis: &ReducedBasis, fhat: &[f64]) -> Result<(Vec<f64>, DVector<f64>)> {
    if fhat.len() != basis.rb.nrows() {
        return Err(Error::DimensionMismatch {
            expected: basis.rb.nrows(),
            actual: fhat.len(),
        });
    }
    let f = DVector::from_column_slice(fhat);
    let fr = basis.rb.tr_mul(&f);
    let lambda = basis.chol.solve(&fr);
    if lambda.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularReducedSystem);
    }
    Ok(((&basis.rb * &lambda).as_slice().to_vec(), lambda))
}

/// `‖F̂ᵢ − F̂ᵢ₋₁‖ / ‖F̂ᵢ₋₁‖`; `+∞` when the previous load is zero.
pub fn load_alteration(current: &[f64], previous: &[f64]) -> f64 {
    let den = norm2(previous);
    if den == 0.0 {
        return f64::INFINITY;
    }
    let num = current
        .iter()
        .zip(previous)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    num / den
}

/// `max_e |E_e(b_curr) − E_e(b_prev)| / E_e(b_prev)` under one interpolation.
pub fn structural_change(prev: &DensityField, curr: &DensityField, interp: &MaterialInterp) -> f64 {
    let a: Vec<f64> = prev.values().iter().map(|&b| interp.modulus(b)).collect();
    let b: Vec<f64> = curr.values().iter().map(|&b| interp.modulus(b)).collect();
    modulus_change(&a, &b)
}

/// Largest relative change between two modulus vectors.
pub fn modulus_change(prev: &[f64], curr: &[f64]) -> f64 {
    prev.iter()
        .zip(curr)
        .map(|(p, c)| (c - p).abs() / p)
        .fold(0.0, f64::max)
}

/// Counters of one reduced transient solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OsdcaStats {
    /// Number of basis constructions.
    pub rebuilds: usize,
    /// Effective basis size of each construction.
    pub s_eff: Vec<usize>,
    /// Rebuilds forced by the residual guard rather than the load trigger.
    pub guard_rebuilds: usize,
    /// Factorizations performed inside the solve (always zero).
    pub full_factorizations: usize,
    /// `ΔK̂` vanished and every interval was solved directly with the
    /// baseline factor.
    pub direct: bool,
    pub solve_time_s: f64,
}

/// Reduced transient solve against a baseline factorization.
#[allow(clippy::too_many_arguments)]
pub fn solve_transient_reduced(
    baseline: &Baseline,
    k: &SparseSymMatrix,
    m: &SparseSymMatrix,
    damping: &DampingSpec,
    loads: &dyn LoadHistory,
    params: &NewmarkParams,
    config: &OsdcaConfig,
) -> Result<(SnapshotMatrix, OsdcaStats)> {
    params.validate()?;
    config.validate()?;
    let start = Instant::now();
    let coeffs = params.coefficients();
    if (coeffs.c0 - baseline.c0).abs() > 1e-12 * coeffs.c0 {
        return Err(Error::InvalidParameter(
            "baseline was built for a different time step".into(),
        ));
    }
    let c = damping.matrix(k, m)?;
    let khat = effective_stiffness(k, m, c.as_ref(), &coeffs)?;
    let delta = khat.sub(&baseline.khat0)?;
    let direct = delta.is_zero();

    let mut state = initial_state(k, m, c.as_ref(), loads, None, None)?;
    let count_before = factorization_count();
    let h = m.dim();
    let mut u = DMatrix::zeros(h, params.intervals);
    let mut times = Vec::with_capacity(params.intervals);
    let mut stats = OsdcaStats {
        direct,
        ..Default::default()
    };
    let mut basis: Option<ReducedBasis> = None;
    let mut prev_fhat = vec![0.0; h];

    for i in 1..=params.intervals {
        let t = i as f64 * params.dt;
        let fhat = effective_load(&state, &loads.force(t)?, m, c.as_ref(), &coeffs);
        let d = if norm2(&fhat) == 0.0 {
            vec![0.0; h]
        } else if direct {
            stats.rebuilds += 1;
            stats.s_eff.push(1);
            baseline.factor.solve(&fhat)?
        } else {
            let rebuild = |stats: &mut OsdcaStats| -> Result<ReducedBasis> {
                let b = build_basis_at(baseline, &delta, &fhat, config.s, i)?;
                stats.rebuilds += 1;
                stats.s_eff.push(b.s());
                Ok(b)
            };
            match basis.take() {
                Some(b) if load_alteration(&fhat, &prev_fhat) <= config.tol_f => {
                    let (d, res) = reduced_solve_with_residual(&b, &fhat)?;
                    if res > config.residual_guard {
                        stats.guard_rebuilds += 1;
                        let b = rebuild(&mut stats)?;
                        let d = reduced_solve(&b, &fhat)?;
                        basis = Some(b);
                        d
                    } else {
                        basis = Some(b);
                        d
                    }
                }
                _ => {
                    let b = rebuild(&mut stats)?;
                    let d = reduced_solve(&b, &fhat)?;
                    basis = Some(b);
                    d
                }
            }
        };
        prev_fhat = fhat;
        state = advance(&state, d, &coeffs);
        if state.d.iter().chain(&state.v).chain(&state.a).any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteState { interval: i });
        }
        u.column_mut(i - 1).copy_from_slice(&state.d);
        times.push(t);
    }
    stats.full_factorizations = factorization_count() - count_before;
    stats.solve_time_s = start.elapsed().as_secs_f64();
    Ok((SnapshotMatrix::new(u, times)?, stats))
}

/// Outcome of a refresh check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefreshDecision {
    pub change: f64,
    pub refreshed: bool,
}

/// Refactors the baseline at `current` when the structural change exceeds
/// `tol_rb`. `previous_moduli` are the element moduli of the previous
/// design; with [`RefreshReference::Baseline`] the baseline's own moduli are
/// used instead.
#[allow(clippy::too_many_arguments)]
pub fn maybe_refresh_baseline(
    baseline: Baseline,
    previous_moduli: &[f64],
    current: &DensityField,
    config: &OsdcaConfig,
    model: &Model,
    interp: &MaterialInterp,
    damping: &DampingSpec,
    params: &NewmarkParams,
) -> Result<(Baseline, RefreshDecision)> {
    let moduli = model.moduli(current, interp);
    let reference = match config.refresh_reference {
        RefreshReference::Previous => previous_moduli,
        RefreshReference::Baseline => &baseline.moduli,
    };
    if reference.len() != moduli.len() {
        return Err(Error::DimensionMismatch {
            expected: moduli.len(),
            actual: reference.len(),
        });
    }
    let change = modulus_change(reference, &moduli);
    if change > config.tol_rb {
        let fresh = Baseline::build(model, current, interp, damping, params)?;
        log::debug!("baseline refreshed (structural change {change:.3e})");
        return Ok((
            fresh,
            RefreshDecision {
                change,
                refreshed: true,
            },
        ));
    }
    Ok((
        baseline,
        RefreshDecision {
            change,
            refreshed: false,
        },
    ))
}
