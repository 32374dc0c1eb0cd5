use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementType {
    Quad4,
    Hex8,
}

impl ElementType {
    pub fn nodes(self) -> usize {
        match self {
            ElementType::Quad4 => 4,
            ElementType::Hex8 => 8,
        }
    }

    pub fn dofs_per_node(self) -> usize {
        match self {
            ElementType::Quad4 => 2,
            ElementType::Hex8 => 3,
        }
    }

    pub fn dofs(self) -> usize {
        self.nodes() * self.dofs_per_node()
    }
}

/// Design status of an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Passive {
    Design,
    Void,
    Solid,
}

/// Structured grid of quadrilaterals or hexahedra over an axis-aligned box.
///
/// Nodes are numbered with `y` fastest, then `x`, then `z`; elements follow
/// the same order. Element nodes run counter-clockwise from the lower-left
/// corner (bottom face first for hexahedra).
#[derive(Debug, Clone)]
pub struct Mesh {
    etype: ElementType,
    nel: [usize; 3],
    size: [f64; 3],
    passive: Vec<Passive>,
    fixed: Vec<usize>,
    free_index: Vec<Option<usize>>,
    free_dofs: Vec<usize>,
}

impl Mesh {
    /// `nelx × nely` quadrilaterals of size `dx × dy`.
    pub fn grid_2d(nelx: usize, nely: usize, dx: f64, dy: f64) -> Result<Self> {
        Self::grid(ElementType::Quad4, [nelx, nely, 1], [dx, dy, 0.0])
    }

    /// `nelx × nely × nelz` hexahedra of size `dx × dy × dz`.
    pub fn grid_3d(nel: [usize; 3], size: [f64; 3]) -> Result<Self> {
        Self::grid(ElementType::Hex8, nel, size)
    }

    fn grid(etype: ElementType, nel: [usize; 3], size: [f64; 3]) -> Result<Self> {
        let dims = if etype == ElementType::Quad4 { 2 } else { 3 };
        if nel[..dims].iter().any(|&n| n == 0) || size[..dims].iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidCase(
                "grid dimensions and element sizes must be positive".into(),
            ));
        }
        let mut mesh = Mesh {
            etype,
            nel,
            size,
            passive: Vec::new(),
            fixed: Vec::new(),
            free_index: Vec::new(),
            free_dofs: Vec::new(),
        };
        mesh.passive = vec![Passive::Design; mesh.num_elements()];
        mesh.set_fixed(Vec::new());
        Ok(mesh)
    }

    pub fn element_type(&self) -> ElementType {
        self.etype
    }

    pub fn is_3d(&self) -> bool {
        self.etype == ElementType::Hex8
    }

    pub fn nelx(&self) -> usize {
        self.nel[0]
    }

    pub fn nely(&self) -> usize {
        self.nel[1]
    }

    /// 1 for 2D meshes.
    pub fn nelz(&self) -> usize {
        if self.is_3d() {
            self.nel[2]
        } else {
            1
        }
    }

    pub fn element_size(&self) -> [f64; 3] {
        self.size
    }

    pub fn num_elements(&self) -> usize {
        self.nelx() * self.nely() * self.nelz()
    }

    fn node_layers(&self) -> usize {
        if self.is_3d() {
            self.nel[2] + 1
        } else {
            1
        }
    }

    pub fn num_nodes(&self) -> usize {
        (self.nelx() + 1) * (self.nely() + 1) * self.node_layers()
    }

    pub fn num_dofs(&self) -> usize {
        self.num_nodes() * self.etype.dofs_per_node()
    }

    /// Number of free (unconstrained) DOFs, the order of every global matrix.
    pub fn num_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn node_id(&self, i: usize, j: usize, k: usize) -> usize {
        (k * (self.nelx() + 1) + i) * (self.nely() + 1) + j
    }

    /// Grid indices `(i, j, k)` of a node.
    pub fn node_ijk(&self, node: usize) -> [usize; 3] {
        let ny = self.nely() + 1;
        let nx = self.nelx() + 1;
        [(node / ny) % nx, node % ny, node / (nx * ny)]
    }

    pub fn node_coords(&self, node: usize) -> [f64; 3] {
        let [i, j, k] = self.node_ijk(node);
        [
            i as f64 * self.size[0],
            j as f64 * self.size[1],
            k as f64 * self.size[2],
        ]
    }

    pub fn element_id(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.nelx() + ix) * self.nely() + iy
    }

    pub fn element_ijk(&self, e: usize) -> [usize; 3] {
        let ny = self.nely();
        let nx = self.nelx();
        [(e / ny) % nx, e % ny, e / (nx * ny)]
    }

    pub fn element_center(&self, e: usize) -> [f64; 3] {
        let [ix, iy, iz] = self.element_ijk(e);
        let z = if self.is_3d() {
            (iz as f64 + 0.5) * self.size[2]
        } else {
            0.0
        };
        [(ix as f64 + 0.5) * self.size[0], (iy as f64 + 0.5) * self.size[1], z]
    }

    pub fn element_nodes(&self, e: usize) -> Vec<usize> {
        let [ix, iy, iz] = self.element_ijk(e);
        let quad = |k| {
            [
                self.node_id(ix, iy, k),
                self.node_id(ix + 1, iy, k),
                self.node_id(ix + 1, iy + 1, k),
                self.node_id(ix, iy + 1, k),
            ]
        };
        match self.etype {
            ElementType::Quad4 => quad(0).to_vec(),
            ElementType::Hex8 => {
                let mut nodes = quad(iz).to_vec();
                nodes.extend(quad(iz + 1));
                nodes
            }
        }
    }

    /// Global (unreduced) DOF numbers of an element in local order.
    pub fn element_dofs(&self, e: usize) -> Vec<usize> {
        let dpn = self.etype.dofs_per_node();
        self.element_nodes(e)
            .into_iter()
            .flat_map(|n| (0..dpn).map(move |d| n * dpn + d))
            .collect()
    }

    pub fn element_volume(&self) -> f64 {
        match self.etype {
            ElementType::Quad4 => self.size[0] * self.size[1],
            ElementType::Hex8 => self.size[0] * self.size[1] * self.size[2],
        }
    }

    pub fn dof(&self, node: usize, direction: usize) -> usize {
        node * self.etype.dofs_per_node() + direction
    }

    pub fn passive(&self) -> &[Passive] {
        &self.passive
    }

    pub fn set_passive(&mut self, e: usize, status: Passive) {
        self.passive[e] = status;
    }

    pub fn fixed_dofs(&self) -> &[usize] {
        &self.fixed
    }

    pub fn set_fixed(&mut self, mut fixed: Vec<usize>) {
        fixed.sort_unstable();
        fixed.dedup();
        let n = self.num_dofs();
        let mut free_index = vec![None; n];
        let mut free_dofs = Vec::with_capacity(n - fixed.len());
        let mut next = fixed.iter().peekable();
        for dof in 0..n {
            if next.peek() == Some(&&dof) {
                next.next();
                continue;
            }
            free_index[dof] = Some(free_dofs.len());
            free_dofs.push(dof);
        }
        self.fixed = fixed;
        self.free_index = free_index;
        self.free_dofs = free_dofs;
    }

    /// Position of a global DOF in the reduced system, if free.
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    /// Nodes whose coordinates satisfy `pred`.
    pub fn nodes_where(&self, pred: impl Fn([f64; 3]) -> bool) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&n| pred(self.node_coords(n))).collect()
    }

    pub fn nearest_node(&self, p: [f64; 3]) -> usize {
        let clamp = |v: f64, h: f64, n: usize| ((v / h).round().max(0.0) as usize).min(n);
        let i = clamp(p[0], self.size[0], self.nelx());
        let j = clamp(p[1], self.size[1], self.nely());
        let k = if self.is_3d() {
            clamp(p[2], self.size[2], self.nel[2])
        } else {
            0
        };
        self.node_id(i, j, k)
    }

    /// Expands a reduced vector to all DOFs, zero on constrained ones.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.num_dofs()];
        for (k, &dof) in self.free_dofs.iter().enumerate() {
            full[dof] = reduced[k];
        }
        full
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts() {
        let m = Mesh::grid_2d(100, 50, 0.02, 0.02).unwrap();
        assert_eq!(m.num_elements(), 5000);
        assert_eq!(m.num_nodes(), 101 * 51);
        let m3 = Mesh::grid_3d([4, 3, 2], [1.0, 1.0, 1.0]).unwrap();
        assert_eq!(m3.num_elements(), 24);
        assert_eq!(m3.num_nodes(), 5 * 4 * 3);
        assert_eq!(m3.num_dofs(), 180);
    }

    #[test]
    fn index_round_trips() {
        let m = Mesh::grid_3d([4, 3, 2], [1.0, 2.0, 3.0]).unwrap();
        for n in 0..m.num_nodes() {
            let [i, j, k] = m.node_ijk(n);
            assert_eq!(m.node_id(i, j, k), n);
        }
        for e in 0..m.num_elements() {
            let [i, j, k] = m.element_ijk(e);
            assert_eq!(m.element_id(i, j, k), e);
        }
        assert_eq!(m.node_coords(m.node_id(4, 3, 2)), [4.0, 6.0, 6.0]);
    }

    #[test]
    fn element_nodes_are_counter_clockwise() {
        let m = Mesh::grid_2d(2, 1, 1.0, 1.0).unwrap();
        let nodes = m.element_nodes(m.element_id(1, 0, 0));
        let xy: Vec<[f64; 3]> = nodes.iter().map(|&n| m.node_coords(n)).collect();
        assert_eq!(xy[0], [1.0, 0.0, 0.0]);
        assert_eq!(xy[1], [2.0, 0.0, 0.0]);
        assert_eq!(xy[2], [2.0, 1.0, 0.0]);
        assert_eq!(xy[3], [1.0, 1.0, 0.0]);
    }

    #[test]
    fn fixing_dofs_renumbers() {
        let mut m = Mesh::grid_2d(1, 1, 1.0, 1.0).unwrap();
        m.set_fixed(vec![0, 1, 1]);
        assert_eq!(m.num_free(), 6);
        assert_eq!(m.free_index(0), None);
        assert_eq!(m.free_index(2), Some(0));
        assert_eq!(m.expand(&[1.0; 6])[..3], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn rejects_empty_grid() {
        assert!(Mesh::grid_2d(0, 4, 1.0, 1.0).is_err());
        assert!(Mesh::grid_2d(4, 4, -1.0, 1.0).is_err());
    }
}
