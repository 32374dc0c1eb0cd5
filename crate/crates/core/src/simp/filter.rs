use crate::fem::Mesh;

/// Linear hat-weight convolution over neighbouring elements, with the radius
/// measured in element widths on the structured grid.
#[derive(Debug, Clone)]
pub struct DensityFilter {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    w: Vec<f64>,
    /// row sums of `w`
    sums: Vec<f64>,
}

impl DensityFilter {
    pub fn new(mesh: &Mesh, radius: f64) -> Self {
        let n = mesh.num_elements();
        let reach = radius.max(0.0).ceil() as isize;
        let dims = [mesh.nelx() as isize, mesh.nely() as isize, mesh.nelz() as isize];
        let zreach = if mesh.is_3d() { reach } else { 0 };
        let mut ptr = Vec::with_capacity(n + 1);
        let mut idx = Vec::new();
        let mut w = Vec::new();
        let mut sums = Vec::with_capacity(n);
        ptr.push(0);
        for e in 0..n {
            let [ix, iy, iz] = mesh.element_ijk(e).map(|v| v as isize);
            let mut sum = 0.0;
            for kz in (iz - zreach).max(0)..=(iz + zreach).min(dims[2] - 1) {
                for kx in (ix - reach).max(0)..=(ix + reach).min(dims[0] - 1) {
                    for ky in (iy - reach).max(0)..=(iy + reach).min(dims[1] - 1) {
                        let d2 = ((kx - ix).pow(2) + (ky - iy).pow(2) + (kz - iz).pow(2)) as f64;
                        let weight = radius - d2.sqrt();
                        if weight > 0.0 {
                            idx.push(mesh.element_id(kx as usize, ky as usize, kz as usize));
                            w.push(weight);
                            sum += weight;
                        }
                    }
                }
            }
            if sum == 0.0 {
                // radius below one width: the element only sees itself
                idx.push(e);
                w.push(1.0);
                sum = 1.0;
            }
            sums.push(sum);
            ptr.push(idx.len());
        }
        DensityFilter { ptr, idx, w, sums }
    }

    fn row(&self, e: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.ptr[e]..self.ptr[e + 1];
        self.idx[r.clone()].iter().copied().zip(self.w[r].iter().copied())
    }

    /// `x̃_e = Σ_j w_ej·x_j / Σ_j w_ej`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.sums.len())
            .map(|e| self.row(e).map(|(j, w)| w * x[j]).sum::<f64>() / self.sums[e])
            .collect()
    }

    /// Density-weighted sensitivity filter
    /// `Σ_j w_ej·b_j·g_j / (max(1e-3, b_e)·Σ_j w_ej)`.
    pub fn apply_sensitivity(&self, b: &[f64], g: &[f64]) -> Vec<f64> {
        (0..self.sums.len())
            .map(|e| {
                let num: f64 = self.row(e).map(|(j, w)| w * b[j] * g[j]).sum();
                num / (b[e].max(1e-3) * self.sums[e])
            })
            .collect()
    }
}

/// One-shot convolution of a field or sensitivity vector.
pub fn density_filter(mesh: &Mesh, x: &[f64], radius: f64) -> Vec<f64> {
    DensityFilter::new(mesh, radius).apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_zero_is_identity() {
        let mesh = Mesh::grid_2d(5, 4, 1.0, 1.0).unwrap();
        let x: Vec<f64> = (0..20).map(|i| (i * 37 % 11) as f64).collect();
        assert_eq!(density_filter(&mesh, &x, 0.0), x);
    }

    #[test]
    fn uniform_field_unchanged() {
        let mesh = Mesh::grid_3d([4, 3, 3], [1.0; 3]).unwrap();
        let x = vec![0.37; mesh.num_elements()];
        for r in [1.0, 1.5, 2.7] {
            for v in density_filter(&mesh, &x, r) {
                assert!((v - 0.37).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn spike_spreads_over_neighbourhood() {
        let mesh = Mesh::grid_2d(7, 7, 1.0, 1.0).unwrap();
        let mut x = vec![0.0; 49];
        let c = mesh.element_id(3, 3, 0);
        x[c] = 1.0;
        let y = density_filter(&mesh, &x, 1.5);
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let support: Vec<usize> = (0..49).filter(|&e| y[e] > 0.0).collect();
        assert_eq!(support.len(), 9);
        for e in support {
            let [i, j, _] = mesh.element_ijk(e);
            assert!(i.abs_diff(3) <= 1 && j.abs_diff(3) <= 1);
        }
    }

    #[test]
    fn sensitivity_filter_of_uniform_density_is_plain_filter() {
        let mesh = Mesh::grid_2d(6, 3, 1.0, 1.0).unwrap();
        let f = DensityFilter::new(&mesh, 1.5);
        let g: Vec<f64> = (0..18).map(|i| -(i as f64) - 1.0).collect();
        let b = vec![0.4; 18];
        let a = f.apply_sensitivity(&b, &g);
        let p = f.apply(&g);
        for (x, y) in a.iter().zip(&p) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
