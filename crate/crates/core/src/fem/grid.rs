use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform square grid of `m x m` bilinear elements on the unit square.
///
/// Nodes are numbered row-major, `(i, j) -> j (m + 1) + i`, and elements
/// likewise, `(ex, ey) -> ey m + ex`. The free (non-Dirichlet) nodes are all
/// nodes with `0 < i < m`, numbered row-major as well.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    elements: usize,
}

impl Grid {
    pub fn new(elements_per_side: usize) -> Result<Self> {
        if elements_per_side < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 elements per side, got {elements_per_side}"
            )));
        }
        Ok(Self {
            elements: elements_per_side,
        })
    }

    pub fn elements_per_side(&self) -> usize {
        self.elements
    }

    pub fn nodes_per_side(&self) -> usize {
        self.elements + 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.elements as f64
    }

    pub fn num_elements(&self) -> usize {
        self.elements * self.elements
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes_per_side() * self.nodes_per_side()
    }

    pub fn num_free(&self) -> usize {
        self.nodes_per_side() * (self.elements - 1)
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.nodes_per_side() + i
    }

    pub fn node_coords(&self, node: usize) -> (usize, usize) {
        (node % self.nodes_per_side(), node / self.nodes_per_side())
    }

    pub fn element_index(&self, ex: usize, ey: usize) -> usize {
        ey * self.elements + ex
    }

    pub fn element_coords(&self, e: usize) -> (usize, usize) {
        (e % self.elements, e / self.elements)
    }

    /// Element nodes in the order SW, SE, NE, NW.
    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let (ex, ey) = self.element_coords(e);
        [
            self.node_index(ex, ey),
            self.node_index(ex + 1, ey),
            self.node_index(ex + 1, ey + 1),
            self.node_index(ex, ey + 1),
        ]
    }

    pub fn element_center(&self, e: usize) -> (f64, f64) {
        let (ex, ey) = self.element_coords(e);
        let h = self.h();
        ((ex as f64 + 0.5) * h, (ey as f64 + 0.5) * h)
    }

    /// Prescribed value at a Dirichlet node, `None` for free nodes.
    pub fn dirichlet_value(&self, node: usize) -> Option<f64> {
        let (i, _) = self.node_coords(node);
        if i == 0 {
            Some(1.0)
        } else if i == self.elements {
            Some(-1.0)
        } else {
            None
        }
    }

    pub fn free_index(&self, node: usize) -> Option<usize> {
        let (i, j) = self.node_coords(node);
        if i == 0 || i == self.elements {
            None
        } else {
            Some(j * (self.elements - 1) + i - 1)
        }
    }

    pub fn free_node(&self, dof: usize) -> usize {
        let w = self.elements - 1;
        self.node_index(dof % w + 1, dof / w)
    }
}

/// Sorted, duplicate-free set of element indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementSet(Vec<usize>);

impl ElementSet {
    pub fn new(mut elements: Vec<usize>) -> Self {
        elements.sort_unstable();
        elements.dedup();
        Self(elements)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn contains(&self, e: usize) -> bool {
        self.0.binary_search(&e).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl FromIterator<usize> for ElementSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_numbering_round_trips() {
        let g = Grid::new(4).unwrap();
        assert_eq!(g.num_free(), 5 * 3);
        for dof in 0..g.num_free() {
            assert_eq!(g.free_index(g.free_node(dof)), Some(dof));
        }
        let mut count = 0;
        let mut last = None;
        for node in 0..g.num_nodes() {
            if let Some(d) = g.free_index(node) {
                assert!(last.is_none_or(|l| d > l));
                last = Some(d);
                count += 1;
            } else {
                assert!(g.dirichlet_value(node).is_some());
            }
        }
        assert_eq!(count, g.num_free());
    }

    #[test]
    fn element_nodes_counterclockwise() {
        let g = Grid::new(3).unwrap();
        assert_eq!(g.element_nodes(g.element_index(1, 2)), [9, 10, 14, 13]);
        assert_eq!(g.element_center(0), (1.0 / 6.0, 1.0 / 6.0));
    }

    #[test]
    fn too_small_grid_rejected() {
        assert!(Grid::new(1).is_err());
    }
}
