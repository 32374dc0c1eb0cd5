use super::MaterialInterp;
use crate::error::{Error, Result};
use crate::fem::{DensityField, Mesh, Passive};

/// Parameters of one optimality-criteria step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcParams {
    pub volume_fraction: f64,
    pub move_limit: f64,
    pub damping_exponent: f64,
}

/// Result of an OC step.
#[derive(Debug, Clone)]
pub struct OcOutcome {
    pub density: DensityField,
    pub lambda: f64,
    /// Volume fraction `Σ V_e(b_e) / n` of the new field.
    pub volume: f64,
    /// `|volume − target| / target`.
    pub residual: f64,
    /// The target was outside what the move limits allow; every design
    /// element sits at a bound.
    pub clamped: bool,
}

/// Mean volume fraction `Σ_e V_e(b_e) / n` over all elements (passive ones
/// included). Elements share one volume on a structured grid.
pub fn volume_fraction(density: &[f64], interp: &MaterialInterp) -> f64 {
    if density.is_empty() {
        return 0.0;
    }
    density.iter().map(|&b| interp.volume(b)).sum::<f64>() / density.len() as f64
}

/// Uniform design density whose volume fraction, with passive elements at
/// their pinned values, equals `target`. Clamped to `[b_min, 1]`.
pub fn initial_density(mesh: &Mesh, interp: &MaterialInterp, target: f64, b_min: f64) -> Result<DensityField> {
    let fill = |x: f64| -> Vec<f64> {
        mesh.passive()
            .iter()
            .map(|s| match s {
                Passive::Design => x,
                Passive::Void => b_min,
                Passive::Solid => 1.0,
            })
            .collect()
    };
    let (mut lo, mut hi) = (b_min, 1.0);
    if volume_fraction(&fill(lo), interp) >= target {
        hi = lo;
    } else if volume_fraction(&fill(hi), interp) <= target {
        lo = hi;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-15 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if volume_fraction(&fill(mid), interp) > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    DensityField::new(mesh, fill(0.5 * (lo + hi)), b_min)
}

/// Optimality-criteria update with a volume multiplier found by log-space
/// bisection. Passive elements keep their values.
pub fn oc_update(
    mesh: &Mesh,
    density: &DensityField,
    dz: &[f64],
    dv: &[f64],
    interp: &MaterialInterp,
    params: &OcParams,
) -> Result<OcOutcome> {
    let n = density.len();
    for len in [dz.len(), dv.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    let b = density.values();
    let b_min = density.b_min();
    let design: Vec<usize> = (0..n).filter(|&e| mesh.passive()[e] == Passive::Design).collect();

    let mut clamped_grad = 0usize;
    // ratio_e = −dz_e / dV_e, so b_new = b·(ratio/Λ)^η
    let ratio: Vec<f64> = (0..n)
        .map(|e| {
            let mut g = dz[e];
            if g > 0.0 {
                clamped_grad += 1;
                g = -1e-30;
            }
            -g / dv[e].max(1e-300)
        })
        .collect();
    if clamped_grad > 0 {
        log::warn!("oc_update: {clamped_grad} positive compliance sensitivities clamped");
    }
    if ratio.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidParameter("non-finite sensitivity in OC update".into()));
    }

    let eta = params.damping_exponent;
    let mv = params.move_limit;
    let candidate = |lambda: f64| -> Vec<f64> {
        let mut out = b.to_vec();
        for &e in &design {
            let lo = (b[e] - mv).max(b_min);
            let hi = (b[e] + mv).min(1.0);
            let x = b[e] * (ratio[e] / lambda).powf(eta);
            out[e] = x.clamp(lo, hi);
        }
        out
    };
    let target = params.volume_fraction;
    let vol = |lambda: f64| volume_fraction(&candidate(lambda), interp);

    let mean = if design.is_empty() {
        1.0
    } else {
        design.iter().map(|&e| ratio[e]).sum::<f64>() / design.len() as f64
    };
    let centre = if mean > 0.0 { mean } else { 1.0 };
    let (mut lo, mut hi) = ((centre * 1e-30).ln(), (centre * 1e30).ln());

    // volume decreases with Λ
    let v_lo = vol(lo.exp());
    let v_hi = vol(hi.exp());
    let outcome = |lambda: f64, clamped: bool| -> Result<OcOutcome> {
        let values = candidate(lambda);
        let volume = volume_fraction(&values, interp);
        Ok(OcOutcome {
            density: DensityField::new(mesh, values, b_min)?,
            lambda,
            volume,
            residual: (volume - target).abs() / target,
            clamped,
        })
    };
    if v_lo <= target {
        log::warn!("oc_update: volume target {target} above reachable {v_lo}");
        return outcome(lo.exp(), true);
    }
    if v_hi >= target {
        log::warn!("oc_update: volume target {target} below reachable {v_hi}");
        return outcome(hi.exp(), true);
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if vol(mid.exp()) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let out = outcome((0.5 * (lo + hi)).exp(), false)?;
    if out.residual > 1e-4 {
        return Err(Error::BisectionFailed { residual: out.residual });
    }
    Ok(out)
}
