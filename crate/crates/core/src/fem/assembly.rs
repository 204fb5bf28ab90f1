use crate::error::{Error, Result};
use crate::linalg::{DenseSymMatrix, SparseSymMatrix};

use super::{CoefficientField, ElementSet, Grid};

/// Bilinear stiffness matrix of a square cell with unit conductivity, node
/// order SW, SE, NE, NW. It does not depend on the cell size in 2D.
pub fn reference_stiffness() -> [[f64; 4]; 4] {
    const S: f64 = 1.0 / 6.0;
    [
        [4.0 * S, -S, -2.0 * S, -S],
        [-S, 4.0 * S, -S, -2.0 * S],
        [-2.0 * S, -S, 4.0 * S, -S],
        [-S, -2.0 * S, -S, 4.0 * S],
    ]
}

/// Discrete system over the free nodes with the Dirichlet lift moved to the
/// right-hand side.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub grid: Grid,
    pub matrix: SparseSymMatrix,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    pub fn num_free(&self) -> usize {
        self.rhs.len()
    }

    /// Nodal values on the full grid: `x` on free nodes, the boundary data
    /// on Dirichlet nodes.
    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        (0..g.num_nodes())
            .map(|node| match g.free_index(node) {
                Some(d) => x[d],
                None => g.dirichlet_value(node).unwrap(),
            })
            .collect()
    }
}

fn check_coefficient(grid: &Grid, sigma: &CoefficientField) -> Result<()> {
    if sigma.values().len() != grid.num_elements() {
        return Err(Error::DimensionMismatch {
            expected: grid.num_elements(),
            found: sigma.values().len(),
        });
    }
    for (e, &v) in sigma.values().iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidCoefficient {
                element: e,
                value: v,
            });
        }
    }
    Ok(())
}

/// Q1 stiffness assembly with symmetric elimination of the Dirichlet nodes.
pub fn assemble(grid: &Grid, sigma: &CoefficientField) -> Result<LinearSystem> {
    check_coefficient(grid, sigma)?;
    let kref = reference_stiffness();
    let n = grid.num_free();
    let mut rhs = vec![0.0; n];
    let mut triplets = Vec::with_capacity(16 * grid.num_elements());
    for e in 0..grid.num_elements() {
        let s = sigma.get(e);
        let nodes = grid.element_nodes(e);
        for a in 0..4 {
            let Some(fa) = grid.free_index(nodes[a]) else {
                continue;
            };
            for b in 0..4 {
                let k = s * kref[a][b];
                match grid.free_index(nodes[b]) {
                    Some(fb) => triplets.push((fa, fb, k)),
                    None => rhs[fa] -= k * grid.dirichlet_value(nodes[b]).unwrap(),
                }
            }
        }
    }
    let matrix = SparseSymMatrix::from_triplets(n, &triplets)?;
    Ok(LinearSystem {
        grid: *grid,
        matrix,
        rhs,
    })
}

/// Neumann stiffness matrix of an element set: assembled over the listed
/// elements only, with global Dirichlet nodes removed. Returns the matrix
/// and the free indices of its rows (strictly increasing).
pub fn assemble_local_neumann(
    grid: &Grid,
    sigma: &CoefficientField,
    elements: &ElementSet,
) -> Result<(DenseSymMatrix, Vec<usize>)> {
    if elements.is_empty() {
        return Err(Error::Contract(
            "Neumann assembly needs a non-empty element set".into(),
        ));
    }
    check_coefficient(grid, sigma)?;
    if let Some(e) = elements.iter().find(|&e| e >= grid.num_elements()) {
        return Err(Error::IndexOutOfRange {
            index: e,
            dim: grid.num_elements(),
        });
    }
    let mut dofs: Vec<usize> = elements
        .iter()
        .flat_map(|e| grid.element_nodes(e))
        .filter_map(|node| grid.free_index(node))
        .collect();
    dofs.sort_unstable();
    dofs.dedup();
    let local = |d: usize| dofs.binary_search(&d).unwrap();
    let kref = reference_stiffness();
    let mut m = DenseSymMatrix::zeros(dofs.len());
    for e in elements.iter() {
        let s = sigma.get(e);
        let nodes = grid.element_nodes(e);
        let free: Vec<Option<usize>> = nodes
            .iter()
            .map(|&n| grid.free_index(n).map(local))
            .collect();
        for a in 0..4 {
            let Some(la) = free[a] else { continue };
            for b in 0..=a {
                let Some(lb) = free[b] else { continue };
                m.add_sym(la, lb, s * kref[a][b]);
            }
        }
    }
    Ok((m, dofs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_coefficient, ChannelGeometry, PortSet};
    use crate::linalg::{reference_solve, sym_gen_eig, DenseSymMatrix};

    /// 2x2 Gauss quadrature of grad(phi_a) . grad(phi_b) on the unit square.
    fn quadrature_stiffness() -> [[f64; 4]; 4] {
        let g = 0.5 / 3f64.sqrt();
        let pts = [0.5 - g, 0.5 + g];
        // bilinear shape gradients, SW, SE, NE, NW
        let grad = |x: f64, y: f64| -> [[f64; 2]; 4] {
            [
                [-(1.0 - y), -(1.0 - x)],
                [1.0 - y, -x],
                [y, x],
                [-y, 1.0 - x],
            ]
        };
        let mut k = [[0.0; 4]; 4];
        for &x in &pts {
            for &y in &pts {
                let gr = grad(x, y);
                for a in 0..4 {
                    for b in 0..4 {
                        k[a][b] += 0.25 * (gr[a][0] * gr[b][0] + gr[a][1] * gr[b][1]);
                    }
                }
            }
        }
        k
    }

    #[test]
    fn reference_stiffness_matches_quadrature() {
        let q = quadrature_stiffness();
        let k = reference_stiffness();
        for a in 0..4 {
            for b in 0..4 {
                assert!((q[a][b] - k[a][b]).abs() < 1e-15);
            }
        }
    }

    fn linear_lift_error(grid: &Grid, c: f64) -> f64 {
        let sigma = CoefficientField::constant(grid, c);
        let sys = assemble(grid, &sigma).unwrap();
        let x = reference_solve(&sys.matrix, &sys.rhs).unwrap();
        let u = sys.reconstruct(&x);
        (0..grid.num_nodes())
            .map(|node| {
                let (i, _) = grid.node_coords(node);
                let xc = i as f64 * grid.h();
                (u[node] - (1.0 - 2.0 * xc)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn patch_test_any_constant() {
        let grid = Grid::new(12).unwrap();
        for c in [1.0, 3.5, 1e5] {
            assert!(linear_lift_error(&grid, c) < 1e-10);
        }
    }

    #[test]
    fn two_by_two_hand_assembly() {
        // free nodes: the middle column (x = 0.5), bottom to top
        let grid = Grid::new(2).unwrap();
        let sys = assemble(&grid, &CoefficientField::constant(&grid, 1.0)).unwrap();
        let a = sys.matrix.extract_submatrix(&[0, 1, 2]).unwrap();
        // bottom node: two elements each contributing 4/6 on the diagonal
        let expected = DenseSymMatrix::from_rows(&[
            &[8.0 / 6.0, -2.0 / 6.0, 0.0],
            &[-2.0 / 6.0, 16.0 / 6.0, -2.0 / 6.0],
            &[0.0, -2.0 / 6.0, 8.0 / 6.0],
        ])
        .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.get(i, j) - expected.get(i, j)).abs() < 1e-15);
            }
            let off: f64 = (0..3).filter(|&j| j != i).map(|j| a.get(i, j).abs()).sum();
            assert!(a.get(i, i) > off);
        }
        // Dirichlet data 1 and -1 cancel on the symmetric middle column
        for v in &sys.rhs {
            assert!(v.abs() < 1e-15);
        }
    }

    #[test]
    fn non_positive_coefficient_rejected() {
        let grid = Grid::new(3).unwrap();
        let mut v = vec![1.0; 9];
        v[4] = 0.0;
        let sigma = CoefficientField::from_values(&grid, v).unwrap();
        assert!(matches!(
            assemble(&grid, &sigma),
            Err(Error::InvalidCoefficient { element: 4, .. })
        ));
    }

    #[test]
    fn single_element_neumann_is_reference() {
        let grid = Grid::new(4).unwrap();
        let sigma = CoefficientField::constant(&grid, 1.0);
        let e = grid.element_index(1, 1);
        let (m, dofs) = assemble_local_neumann(&grid, &sigma, &ElementSet::new(vec![e])).unwrap();
        assert_eq!(dofs.len(), 4);
        // free numbering is row-major, so local order is SW, SE, NW, NE
        let perm = [0, 1, 3, 2];
        let k = reference_stiffness();
        for a in 0..4 {
            for b in 0..4 {
                assert!((m.get(a, b) - k[perm[a]][perm[b]]).abs() < 1e-15);
            }
        }
        let kernel = m.mul_vec(&[1.0; 4]);
        assert!(kernel.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn whole_grid_neumann_equals_global_matrix() {
        let grid = Grid::new(8).unwrap();
        let geom = ChannelGeometry {
            channels: vec![crate::fem::Rect::new(0.2, 0.8, 0.4, 0.6)],
            blocks: vec![],
            ports: vec![],
            ..ChannelGeometry::default()
        };
        let sigma = build_coefficient(&geom, &PortSet::empty(), &grid);
        let sys = assemble(&grid, &sigma).unwrap();
        let all: ElementSet = (0..grid.num_elements()).collect();
        let (m, dofs) = assemble_local_neumann(&grid, &sigma, &all).unwrap();
        assert_eq!(dofs, (0..grid.num_free()).collect::<Vec<_>>());
        let a = sys.matrix.extract_submatrix(&dofs).unwrap();
        for i in 0..dofs.len() {
            for j in 0..dofs.len() {
                assert!((m.get(i, j) - a.get(i, j)).abs() <= 1e-12 * a.get(i, i).abs());
            }
        }
    }

    #[test]
    fn neumann_touching_dirichlet_is_definite() {
        let grid = Grid::new(6).unwrap();
        let sigma = CoefficientField::constant(&grid, 1.0);
        let elems: ElementSet = [0, 1, 6, 7].into_iter().collect();
        let (m, _) = assemble_local_neumann(&grid, &sigma, &elems).unwrap();
        let eig = sym_gen_eig(&m, &DenseSymMatrix::identity(m.dim())).unwrap();
        assert!(eig.values[0] > 1e-3);
    }

    #[test]
    fn empty_element_set_rejected() {
        let grid = Grid::new(3).unwrap();
        let sigma = CoefficientField::constant(&grid, 1.0);
        assert!(assemble_local_neumann(&grid, &sigma, &ElementSet::empty()).is_err());
    }

    #[test]
    fn maximum_principle_on_base_field() {
        let grid = Grid::new(40).unwrap();
        let sigma = build_coefficient(&ChannelGeometry::default(), &PortSet::empty(), &grid);
        let sys = assemble(&grid, &sigma).unwrap();
        let x = reference_solve(&sys.matrix, &sys.rhs).unwrap();
        for v in sys.reconstruct(&x) {
            assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&v));
        }
    }
}
