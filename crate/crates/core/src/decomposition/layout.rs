use crate::error::{Error, Result};
use crate::fem::{ElementSet, Grid};

/// Half-open rectangle of element indices `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElementBlock {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl ElementBlock {
    pub fn contains(&self, ex: usize, ey: usize) -> bool {
        self.x0 <= ex && ex < self.x1 && self.y0 <= ey && ey < self.y1
    }

    /// Positive-area intersection.
    pub fn overlaps(&self, other: &ElementBlock) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    /// Grows the block by `rings` elements on every side, clipped to `[0, m)`.
    pub fn grown(&self, rings: usize, m: usize) -> Self {
        Self {
            x0: self.x0.saturating_sub(rings),
            x1: (self.x1 + rings).min(m),
            y0: self.y0.saturating_sub(rings),
            y1: (self.y1 + rings).min(m),
        }
    }

    pub fn elements(&self, grid: &Grid) -> ElementSet {
        (self.y0..self.y1)
            .flat_map(|ey| (self.x0..self.x1).map(move |ex| grid.element_index(ex, ey)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Subdomain {
    pub id: usize,
    /// (column, row) in the subdomain layout
    pub position: (usize, usize),
    pub owned: ElementBlock,
    pub extended: ElementBlock,
    /// Free-node indices of the extended block, strictly increasing: the
    /// image of `R_i^T`.
    pub dofs: Vec<usize>,
    /// Subdomains whose index sets intersect or are coupled through `A` with
    /// this one, itself included.
    pub neighbors: Vec<usize>,
}

impl Subdomain {
    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }
}

/// Uniform overlapping decomposition of the grid into `layout x layout`
/// subdomains.
#[derive(Debug, Clone)]
pub struct Decomposition {
    grid: Grid,
    layout: usize,
    overlap: usize,
    subdomains: Vec<Subdomain>,
}

/// Builds the decomposition. The layout must divide the element count and
/// the overlap must be at least one element.
pub fn build_decomposition(grid: &Grid, layout: usize, overlap: usize) -> Result<Decomposition> {
    let m = grid.elements_per_side();
    if layout == 0 || !m.is_multiple_of(layout) {
        return Err(Error::Config(format!(
            "subdomain layout {layout} does not divide the {m} elements per side"
        )));
    }
    if overlap == 0 {
        return Err(Error::Config(
            "overlap must be at least one element for additive Schwarz".into(),
        ));
    }
    let w = m / layout;
    let mut subdomains = Vec::with_capacity(layout * layout);
    for cy in 0..layout {
        for cx in 0..layout {
            let owned = ElementBlock {
                x0: cx * w,
                x1: (cx + 1) * w,
                y0: cy * w,
                y1: (cy + 1) * w,
            };
            let extended = owned.grown(overlap, m);
            let mut dofs = Vec::new();
            for j in extended.y0..=extended.y1 {
                for i in extended.x0..=extended.x1 {
                    if let Some(d) = grid.free_index(grid.node_index(i, j)) {
                        dofs.push(d);
                    }
                }
            }
            subdomains.push(Subdomain {
                id: cy * layout + cx,
                position: (cx, cy),
                owned,
                extended,
                dofs,
                neighbors: Vec::new(),
            });
        }
    }
    // blocks separated by a single element column share no node but are
    // still coupled by that element, so neighbors are taken one ring wider
    let n = subdomains.len();
    for i in 0..n {
        let reach = subdomains[i].extended.grown(1, m);
        let neighbors: Vec<usize> = (0..n)
            .filter(|&j| i == j || reach.overlaps(&subdomains[j].extended.grown(1, m)))
            .collect();
        subdomains[i].neighbors = neighbors;
    }
    Ok(Decomposition {
        grid: *grid,
        layout,
        overlap,
        subdomains,
    })
}

#[cfg(test)]
fn sorted_intersect(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

impl Decomposition {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn layout(&self) -> usize {
        self.layout
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }

    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }

    pub fn subdomain(&self, i: usize) -> &Subdomain {
        &self.subdomains[i]
    }

    pub fn dofs(&self, i: usize) -> &[usize] {
        &self.subdomains[i].dofs
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.subdomains[i].neighbors
    }

    /// Number of subdomain index sets containing each free node.
    pub fn multiplicity(&self) -> Vec<usize> {
        let mut mult = vec![0usize; self.grid.num_free()];
        for s in &self.subdomains {
            for &d in &s.dofs {
                mult[d] += 1;
            }
        }
        mult
    }

    /// Chebyshev distance between two subdomains in the layout.
    pub fn layout_distance(&self, i: usize, j: usize) -> usize {
        let (ax, ay) = self.subdomains[i].position;
        let (bx, by) = self.subdomains[j].position;
        ax.abs_diff(bx).max(ay.abs_diff(by))
    }
}

/// Subdomains whose local operator `R_i A R_i^T` can be affected by a change
/// of the listed elements: those whose extended block, grown by one element
/// ring, contains a changed element. The extra ring accounts for elements
/// outside the block that share nodes with its boundary.
pub fn detect_changed_subdomains(changed: &ElementSet, dec: &Decomposition) -> Vec<usize> {
    let grid = dec.grid();
    let m = grid.elements_per_side();
    dec.subdomains()
        .iter()
        .filter(|s| {
            let reach = s.extended.grown(1, m);
            changed.iter().any(|e| {
                let (ex, ey) = grid.element_coords(e);
                reach.contains(ex, ey)
            })
        })
        .map(|s| s.id)
        .collect()
}

/// Diagonal partition-of-unity weights `D_i` with `sum_i R_i^T D_i R_i = I`.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    weights: Vec<Vec<f64>>,
}

/// Inverse-multiplicity weights.
pub fn build_partition_of_unity(dec: &Decomposition) -> PartitionOfUnity {
    let mult = dec.multiplicity();
    let weights = dec
        .subdomains()
        .iter()
        .map(|s| s.dofs.iter().map(|&d| 1.0 / mult[d] as f64).collect())
        .collect();
    PartitionOfUnity { weights }
}

impl PartitionOfUnity {
    pub fn weights(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_index_sets() {
        let grid = Grid::new(200).unwrap();
        let dec = build_decomposition(&grid, 10, 4).unwrap();
        assert_eq!(dec.len(), 100);
        let interior = dec.subdomain(5 * 10 + 5);
        assert_eq!(interior.extended.width(), 28);
        assert_eq!(interior.extended.height(), 28);
        assert_eq!(interior.len(), 29 * 29);
        assert_eq!(interior.neighbors.len(), 9);
        assert_eq!(dec.subdomain(0).neighbors.len(), 4);
        assert_eq!(dec.subdomain(99).neighbors.len(), 4);
        assert!(dec.subdomains().iter().all(|s| s.neighbors.len() <= 9));
    }

    #[test]
    fn coverage_and_locality() {
        let grid = Grid::new(40).unwrap();
        let dec = build_decomposition(&grid, 4, 2).unwrap();
        assert!(dec.multiplicity().iter().all(|&m| m >= 1));
        for i in 0..dec.len() {
            assert!(dec.neighbors(i).contains(&i));
            for j in 0..dec.len() {
                let inter = sorted_intersect(dec.dofs(i), dec.dofs(j));
                assert_eq!(inter, dec.neighbors(i).contains(&j));
            }
        }
    }

    #[test]
    fn one_element_gap_still_neighbors() {
        // width 5, overlap 2: blocks two apart leave a one-element gap
        let grid = Grid::new(15).unwrap();
        let dec = build_decomposition(&grid, 3, 2).unwrap();
        assert!(!sorted_intersect(dec.dofs(0), dec.dofs(2)));
        assert!(dec.neighbors(0).contains(&2));
        let sys = crate::fem::assemble(&grid, &crate::fem::CoefficientField::constant(&grid, 1.0))
            .unwrap();
        let block = sys.matrix.extract_block(dec.dofs(0), dec.dofs(2)).unwrap();
        assert!(block.nnz() > 0);
    }

    #[test]
    fn invalid_layouts_rejected() {
        let grid = Grid::new(20).unwrap();
        assert!(matches!(
            build_decomposition(&grid, 3, 2),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            build_decomposition(&grid, 2, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn partition_of_unity_sums_to_one() {
        let grid = Grid::new(20).unwrap();
        let dec = build_decomposition(&grid, 2, 2).unwrap();
        let pou = build_partition_of_unity(&dec);
        let mut sum = vec![0.0; grid.num_free()];
        for (i, s) in dec.subdomains().iter().enumerate() {
            for (k, &d) in s.dofs.iter().enumerate() {
                let w = pou.weights(i)[k];
                assert!((0.0..=1.0).contains(&w));
                sum[d] += w;
            }
        }
        assert!(sum.iter().all(|v| (v - 1.0).abs() <= 1e-14));
        let mult = dec.multiplicity();
        // a node in exactly one set has weight 1, a node in two has 1/2
        let single = (0..grid.num_free()).find(|&d| mult[d] == 1).unwrap();
        let double = (0..grid.num_free()).find(|&d| mult[d] == 2).unwrap();
        for (i, s) in dec.subdomains().iter().enumerate() {
            if let Ok(k) = s.dofs.binary_search(&single) {
                assert_eq!(pou.weights(i)[k], 1.0);
            }
            if let Ok(k) = s.dofs.binary_search(&double) {
                assert_eq!(pou.weights(i)[k], 0.5);
            }
        }
    }

    #[test]
    fn change_detection() {
        let grid = Grid::new(200).unwrap();
        let dec = build_decomposition(&grid, 10, 4).unwrap();
        assert!(detect_changed_subdomains(&ElementSet::empty(), &dec).is_empty());
        // deep inside subdomain (3, 6): owned x 60..80, y 120..140
        let e = grid.element_index(70, 130);
        assert_eq!(
            detect_changed_subdomains(&ElementSet::new(vec![e]), &dec),
            vec![6 * 10 + 3]
        );
    }

    #[test]
    fn port_one_hits_at_most_four_subdomains() {
        use crate::fem::ChannelGeometry;
        let grid = Grid::new(200).unwrap();
        let dec = build_decomposition(&grid, 10, 4).unwrap();
        let geom = ChannelGeometry::default();
        let port1: ElementSet = (0..grid.num_elements())
            .filter(|&e| {
                let (x, y) = grid.element_center(e);
                geom.ports[0].contains(x, y)
            })
            .collect();
        // brute-force oracle: which subdomains' reach contains any element
        let mut oracle = Vec::new();
        for s in dec.subdomains() {
            let r = s.extended.grown(1, 200);
            if port1.iter().any(|e| {
                let (ex, ey) = grid.element_coords(e);
                ex >= r.x0 && ex < r.x1 && ey >= r.y0 && ey < r.y1
            }) {
                oracle.push(s.id);
            }
        }
        let got = detect_changed_subdomains(&port1, &dec);
        assert_eq!(got, oracle);
        assert!(!got.is_empty() && got.len() <= 4);
    }
}
