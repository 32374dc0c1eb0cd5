//! Bilinear quadrilateral (plane stress) and trilinear hexahedral elements on
//! axis-aligned boxes, integrated with full Gauss quadrature.

use nalgebra::DMatrix;

use super::{ElementType, Material};

const GAUSS: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

const QUAD_NODES: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

const HEX_NODES: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Element stiffness at unit Young's modulus and consistent mass at full
/// density.
#[derive(Debug, Clone)]
pub struct ElementMatrices {
    pub k0: DMatrix<f64>,
    pub m0: DMatrix<f64>,
}

pub fn element_matrices(etype: ElementType, material: &Material, size: [f64; 3]) -> ElementMatrices {
    match etype {
        ElementType::Quad4 => quad4(material, size[0], size[1]),
        ElementType::Hex8 => hex8(material, size),
    }
}

fn quad4(material: &Material, dx: f64, dy: f64) -> ElementMatrices {
    let nu = material.nu;
    let c = 1.0 / (1.0 - nu * nu);
    let d = [[c, c * nu, 0.0], [c * nu, c, 0.0], [0.0, 0.0, c * (1.0 - nu) / 2.0]];
    let t = material.thickness;
    let det_j = dx * dy / 4.0;

    let mut k0 = DMatrix::zeros(8, 8);
    let mut m0 = DMatrix::zeros(8, 8);
    for &xi in &GAUSS {
        for &eta in &GAUSS {
            let mut n = [0.0; 4];
            let mut dndx = [0.0; 4];
            let mut dndy = [0.0; 4];
            for (a, [xa, ya]) in QUAD_NODES.iter().enumerate() {
                n[a] = 0.25 * (1.0 + xi * xa) * (1.0 + eta * ya);
                dndx[a] = 0.25 * xa * (1.0 + eta * ya) * 2.0 / dx;
                dndy[a] = 0.25 * ya * (1.0 + xi * xa) * 2.0 / dy;
            }
            let mut b = [[0.0; 8]; 3];
            for a in 0..4 {
                b[0][2 * a] = dndx[a];
                b[1][2 * a + 1] = dndy[a];
                b[2][2 * a] = dndy[a];
                b[2][2 * a + 1] = dndx[a];
            }
            add_btdb(&mut k0, &b, &d, t * det_j);
            for a in 0..4 {
                for bb in 0..4 {
                    let v = material.density * t * n[a] * n[bb] * det_j;
                    m0[(2 * a, 2 * bb)] += v;
                    m0[(2 * a + 1, 2 * bb + 1)] += v;
                }
            }
        }
    }
    ElementMatrices { k0, m0 }
}

fn hex8(material: &Material, size: [f64; 3]) -> ElementMatrices {
    let nu = material.nu;
    let lambda = nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = 1.0 / (2.0 * (1.0 + nu));
    let mut d = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            d[i][j] = lambda;
        }
        d[i][i] = lambda + 2.0 * mu;
        d[i + 3][i + 3] = mu;
    }
    let det_j = size[0] * size[1] * size[2] / 8.0;

    let mut k0 = DMatrix::zeros(24, 24);
    let mut m0 = DMatrix::zeros(24, 24);
    for &xi in &GAUSS {
        for &eta in &GAUSS {
            for &zeta in &GAUSS {
                let p = [xi, eta, zeta];
                let mut n = [0.0; 8];
                let mut grad = [[0.0; 3]; 8];
                for (a, xa) in HEX_NODES.iter().enumerate() {
                    let f = [1.0 + p[0] * xa[0], 1.0 + p[1] * xa[1], 1.0 + p[2] * xa[2]];
                    n[a] = 0.125 * f[0] * f[1] * f[2];
                    grad[a][0] = 0.125 * xa[0] * f[1] * f[2] * 2.0 / size[0];
                    grad[a][1] = 0.125 * xa[1] * f[0] * f[2] * 2.0 / size[1];
                    grad[a][2] = 0.125 * xa[2] * f[0] * f[1] * 2.0 / size[2];
                }
                let mut b = [[0.0; 24]; 6];
                for a in 0..8 {
                    let [gx, gy, gz] = grad[a];
                    b[0][3 * a] = gx;
                    b[1][3 * a + 1] = gy;
                    b[2][3 * a + 2] = gz;
                    b[3][3 * a] = gy;
                    b[3][3 * a + 1] = gx;
                    b[4][3 * a + 1] = gz;
                    b[4][3 * a + 2] = gy;
                    b[5][3 * a] = gz;
                    b[5][3 * a + 2] = gx;
                }
                add_btdb(&mut k0, &b, &d, det_j);
                for a in 0..8 {
                    for bb in 0..8 {
                        let v = material.density * n[a] * n[bb] * det_j;
                        for c in 0..3 {
                            m0[(3 * a + c, 3 * bb + c)] += v;
                        }
                    }
                }
            }
        }
    }
    ElementMatrices { k0, m0 }
}

fn add_btdb<const S: usize, const N: usize>(k: &mut DMatrix<f64>, b: &[[f64; N]; S], d: &[[f64; S]; S], weight: f64) {
    let mut db = [[0.0; N]; S];
    for i in 0..S {
        for j in 0..N {
            db[i][j] = (0..S).map(|m| d[i][m] * b[m][j]).sum();
        }
    }
    for r in 0..N {
        for c in 0..N {
            let v: f64 = (0..S).map(|m| b[m][r] * db[m][c]).sum();
            k[(r, c)] += weight * v;
        }
    }
}
