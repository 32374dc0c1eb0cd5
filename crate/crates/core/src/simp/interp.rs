use serde::{Deserialize, Serialize};

/// Heaviside volume interpolation `V(b) = 1 − e^{−b·p0} + b·e^{−p0}`.
pub fn heaviside_volume(b: f64, p0: f64) -> f64 {
    1.0 - (-b * p0).exp() + b * (-p0).exp()
}

/// `dV/db = p0·e^{−b·p0} + e^{−p0}`.
pub fn heaviside_volume_derivative(b: f64, p0: f64) -> f64 {
    p0 * (-b * p0).exp() + (-p0).exp()
}

/// Young's modulus `E_min + V(b)^p·(E0 − E_min)`.
pub fn interpolate_stiffness(b: f64, p: f64, p0: f64, e0: f64, e_min: f64) -> f64 {
    e_min + heaviside_volume(b, p0).powf(p) * (e0 - e_min)
}

/// Material interpolation state for one optimization stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialInterp {
    /// SIMP penalization.
    pub p: f64,
    /// Heaviside penalization.
    pub p0: f64,
    pub e0: f64,
    pub e_min: f64,
    /// Use `E_min + b^p·(E0 − E_min)` with `V(b) = b` instead of the Heaviside
    /// forms.
    #[serde(default)]
    pub plain_simp: bool,
}

impl MaterialInterp {
    pub fn new(p: f64, p0: f64, e0: f64, e_min: f64) -> Self {
        MaterialInterp {
            p,
            p0,
            e0,
            e_min,
            plain_simp: false,
        }
    }

    /// Volume (and mass) fraction of an element.
    pub fn volume(&self, b: f64) -> f64 {
        if self.plain_simp {
            b
        } else {
            heaviside_volume(b, self.p0)
        }
    }

    pub fn volume_derivative(&self, b: f64) -> f64 {
        if self.plain_simp {
            1.0
        } else {
            heaviside_volume_derivative(b, self.p0)
        }
    }

    pub fn modulus(&self, b: f64) -> f64 {
        self.e_min + self.volume(b).powf(self.p) * (self.e0 - self.e_min)
    }

    pub fn modulus_derivative(&self, b: f64) -> f64 {
        let v = self.volume(b);
        self.p * v.powf(self.p - 1.0) * self.volume_derivative(b) * (self.e0 - self.e_min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_endpoints_and_midpoint() {
        assert_eq!(heaviside_volume(0.0, 8.0), 0.0);
        assert!((heaviside_volume(1.0, 8.0) - 1.0).abs() < 1e-15);
        let expected = 1.0 - (-4.0f64).exp() + 0.5 * (-8.0f64).exp();
        assert!((heaviside_volume(0.5, 8.0) - expected).abs() < 1e-15);
        assert!((heaviside_volume(0.5, 8.0) - 0.98185).abs() < 5e-6);
    }

    #[test]
    fn stiffness_endpoints_and_midpoint() {
        assert!((interpolate_stiffness(1.0, 3.0, 8.0, 1.0, 1e-9) - 1.0).abs() < 1e-14);
        assert_eq!(interpolate_stiffness(0.0, 3.0, 8.0, 1.0, 1e-9), 1e-9);
        let e = interpolate_stiffness(0.5, 3.0, 8.0, 1.0, 1e-9);
        assert!((e - 0.94653).abs() < 5e-5, "{e}");
    }

    #[test]
    fn plain_simp_form() {
        let m = MaterialInterp {
            plain_simp: true,
            ..MaterialInterp::new(3.0, 8.0, 2.0, 0.0)
        };
        assert_eq!(m.modulus(0.5), 0.25);
        assert_eq!(m.volume(0.3), 0.3);
    }

    #[test]
    fn monotone_on_unit_interval() {
        for &(p, p0) in &[(1.0, 0.5), (1.0, 1.0), (2.0, 4.0), (3.0, 8.0), (4.5, 20.0)] {
            let m = MaterialInterp::new(p, p0, 1.0, 1e-9);
            let mut prev_v = f64::NEG_INFINITY;
            let mut prev_e = f64::NEG_INFINITY;
            for i in 0..=1000 {
                let b = i as f64 * 1e-3;
                let (v, e) = (m.volume(b), m.modulus(b));
                assert!(v >= prev_v && e >= prev_e, "p={p} p0={p0} b={b}");
                prev_v = v;
                prev_e = e;
            }
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let m = MaterialInterp::new(3.0, 8.0, 1.0, 1e-9);
        for &b in &[0.05, 0.3, 0.7, 0.95] {
            let h = 1e-6;
            let fd = (m.modulus(b + h) - m.modulus(b - h)) / (2.0 * h);
            assert!((fd - m.modulus_derivative(b)).abs() < 1e-6 * fd.abs().max(1.0));
            let fdv = (m.volume(b + h) - m.volume(b - h)) / (2.0 * h);
            assert!((fdv - m.volume_derivative(b)).abs() < 1e-6);
        }
    }
}
