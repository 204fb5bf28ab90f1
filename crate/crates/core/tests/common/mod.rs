#![allow(dead_code)]

use std::sync::Arc;

use lrbas::decomposition::{build_decomposition, CoarseSpace, SchwarzOperators};
use lrbas::fem::{assemble, ChannelGeometry, CoefficientField, Grid, ModificationSchedule, Rect};
use lrbas::lrbas::ProblemSequence;

/// Channel layout resolved by a 40 x 40 mesh.
pub fn small_geometry() -> ChannelGeometry {
    let centers = [0.6, 0.5, 0.4];
    let strip = |c: f64| (c - 0.025, c + 0.025);
    let channels = centers
        .iter()
        .map(|&c| {
            let (y0, y1) = strip(c);
            Rect::new(0.15, 0.85, y0, y1)
        })
        .collect();
    let mut ports = Vec::new();
    for (x0, x1) in [(0.075, 0.175), (0.825, 0.925)] {
        for &c in &centers {
            let (y0, y1) = strip(c);
            ports.push(Rect::new(x0, x1, y0, y1));
        }
    }
    ChannelGeometry {
        channels,
        blocks: vec![Rect::new(0.0, 0.1, 0.3, 0.7), Rect::new(0.9, 1.0, 0.3, 0.7)],
        ports,
        ..ChannelGeometry::default()
    }
}

pub fn small_sequence(layout: usize, overlap: usize) -> ProblemSequence {
    let grid = Grid::new(40).unwrap();
    ProblemSequence::build(
        &grid,
        &small_geometry(),
        &ModificationSchedule::default(),
        layout,
        overlap,
        0.5,
    )
    .unwrap()
}

/// One subdomain covering the whole grid, no coarse space.
pub fn one_block(elements: usize) -> SchwarzOperators {
    let grid = Grid::new(elements).unwrap();
    let system = Arc::new(assemble(&grid, &CoefficientField::constant(&grid, 1.0)).unwrap());
    let dec = Arc::new(build_decomposition(&grid, 1, 1).unwrap());
    SchwarzOperators::from_parts(1, system, dec, CoarseSpace::empty(1)).unwrap()
}
