use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ElementSet, Grid};

/// Closed axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x0 <= x && x <= self.x1 && self.y0 <= y && y <= self.y1
    }

    /// Intersection with positive area.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    fn is_valid(&self) -> bool {
        self.x0 < self.x1
            && self.y0 < self.y1
            && self.x0 >= 0.0
            && self.y0 >= 0.0
            && self.x1 <= 1.0
            && self.y1 <= 1.0
    }
}

/// High-conductivity layout: horizontal channels, two boundary blocks and
/// the ports that bridge channel ends to the blocks. Ports are numbered from
/// 1 in list order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelGeometry {
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub channels: Vec<Rect>,
    pub blocks: Vec<Rect>,
    pub ports: Vec<Rect>,
}

/// Channel centre lines; ports 1..3 (left) and 4..6 (right) sit at the same
/// heights.
const CHANNEL_CENTERS: [f64; 3] = [0.52, 0.50, 0.48];
const CHANNEL_HALF_HEIGHT: f64 = 0.005;

impl Default for ChannelGeometry {
    /// Ports near x = 0.105 and x = 0.892 at heights 0.52, 0.50 and 0.48.
    /// Channel thickness (two elements of the 200 x 200 mesh), the channel
    /// x-range and the block extents are chosen, not prescribed. All
    /// rectangle edges fall on node lines of the 200 x 200 mesh so
    /// element-centre sampling is unambiguous there.
    fn default() -> Self {
        let strip = |c: f64| (c - CHANNEL_HALF_HEIGHT, c + CHANNEL_HALF_HEIGHT);
        let channels = CHANNEL_CENTERS
            .iter()
            .map(|&c| {
                let (y0, y1) = strip(c);
                Rect::new(0.11, 0.885, y0, y1)
            })
            .collect();
        let blocks = vec![Rect::new(0.0, 0.1, 0.3, 0.7), Rect::new(0.9, 1.0, 0.3, 0.7)];
        let mut ports = Vec::with_capacity(6);
        for (x0, x1) in [(0.095, 0.115), (0.88, 0.905)] {
            for &c in &CHANNEL_CENTERS {
                let (y0, y1) = strip(c);
                ports.push(Rect::new(x0, x1, y0, y1));
            }
        }
        Self {
            sigma_low: 1.0,
            sigma_high: 1e5 + 1.0,
            channels,
            blocks,
            ports,
        }
    }
}

impl ChannelGeometry {
    /// Geometry without any high-conductivity region.
    pub fn empty() -> Self {
        Self {
            channels: vec![],
            blocks: vec![],
            ports: vec![],
            ..Self::default()
        }
    }

    /// Checks the layout invariants: positive conductivities, rectangles
    /// inside the unit square, pairwise disjoint channels, and every port
    /// overlapping exactly one channel and exactly one block.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_low > 0.0 && self.sigma_high > 0.0) {
            return Err(Error::Config(format!(
                "geometry.sigma_low/sigma_high must be positive, got {}/{}",
                self.sigma_low, self.sigma_high
            )));
        }
        let all = self
            .channels
            .iter()
            .map(|r| ("channels", r))
            .chain(self.blocks.iter().map(|r| ("blocks", r)))
            .chain(self.ports.iter().map(|r| ("ports", r)));
        for (name, r) in all {
            if !r.is_valid() {
                return Err(Error::Config(format!(
                    "geometry.{name}: rectangle {r:?} is empty or leaves the unit square"
                )));
            }
        }
        for (a, ra) in self.channels.iter().enumerate() {
            for (b, rb) in self.channels.iter().enumerate().skip(a + 1) {
                if ra.overlaps(rb) {
                    return Err(Error::Config(format!(
                        "geometry.channels: channels {} and {} overlap",
                        a + 1,
                        b + 1
                    )));
                }
            }
        }
        for (p, rp) in self.ports.iter().enumerate() {
            let nc = self.channels.iter().filter(|c| c.overlaps(rp)).count();
            let nb = self.blocks.iter().filter(|b| b.overlaps(rp)).count();
            if nc != 1 || nb != 1 {
                return Err(Error::Config(format!(
                    "geometry.ports: port {} touches {nc} channels and {nb} blocks, expected 1 and 1",
                    p + 1
                )));
            }
        }
        Ok(())
    }

    pub fn port(&self, index: usize) -> Option<&Rect> {
        index.checked_sub(1).and_then(|i| self.ports.get(i))
    }

    /// Elements whose centre lies in any port rectangle.
    pub fn port_elements(&self, grid: &Grid) -> ElementSet {
        (0..grid.num_elements())
            .filter(|&e| {
                let (x, y) = grid.element_center(e);
                self.ports.iter().any(|p| p.contains(x, y))
            })
            .collect()
    }
}

/// Set of open ports (1-based indices).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PortSet(Vec<usize>);

impl PortSet {
    pub fn new(mut ports: Vec<usize>) -> Self {
        ports.sort_unstable();
        ports.dedup();
        Self(ports)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn contains(&self, p: usize) -> bool {
        self.0.binary_search(&p).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl From<&[usize]> for PortSet {
    fn from(p: &[usize]) -> Self {
        Self::new(p.to_vec())
    }
}

/// Open ports for each problem `k = 1..K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModificationSchedule(Vec<PortSet>);

impl Default for ModificationSchedule {
    fn default() -> Self {
        Self(vec![
            PortSet::new(vec![2, 5]),
            PortSet::new(vec![5]),
            PortSet::empty(),
            PortSet::new(vec![1]),
            PortSet::new(vec![1, 5]),
        ])
    }
}

impl ModificationSchedule {
    pub fn new(steps: Vec<PortSet>) -> Self {
        Self(steps)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Open ports of problem `k` (1-based).
    pub fn open_ports(&self, k: usize) -> &PortSet {
        &self.0[k - 1]
    }

    pub fn steps(&self) -> &[PortSet] {
        &self.0
    }

    pub fn validate(&self, geometry: &ChannelGeometry) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::Config(
                "schedule must contain at least one problem".into(),
            ));
        }
        for (k, s) in self.0.iter().enumerate() {
            for p in s.iter() {
                if geometry.port(p).is_none() {
                    return Err(Error::Config(format!(
                        "schedule[{k}]: port {p} does not exist (geometry has {} ports)",
                        geometry.ports.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Piecewise constant conductivity, one value per element.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    elements_per_side: usize,
    values: Vec<f64>,
}

impl CoefficientField {
    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self {
            elements_per_side: grid.elements_per_side(),
            values: vec![value; grid.num_elements()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_elements() {
            return Err(Error::DimensionMismatch {
                expected: grid.num_elements(),
                found: values.len(),
            });
        }
        Ok(Self {
            elements_per_side: grid.elements_per_side(),
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn elements_per_side(&self) -> usize {
        self.elements_per_side
    }

    pub fn get(&self, e: usize) -> f64 {
        self.values[e]
    }

    /// Elements whose value differs from `other`.
    pub fn diff(&self, other: &CoefficientField) -> ElementSet {
        assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(e, _)| e)
            .collect()
    }
}

/// Samples the conductivity at element centres: `sigma_high` inside any
/// channel, block or open port, `sigma_low` elsewhere. Port indices without
/// a rectangle are ignored.
pub fn build_coefficient(
    geom: &ChannelGeometry,
    open_ports: &PortSet,
    grid: &Grid,
) -> CoefficientField {
    let open: Vec<&Rect> = open_ports.iter().filter_map(|p| geom.port(p)).collect();
    let values = (0..grid.num_elements())
        .map(|e| {
            let (x, y) = grid.element_center(e);
            let high = geom.channels.iter().any(|r| r.contains(x, y))
                || geom.blocks.iter().any(|r| r.contains(x, y))
                || open.iter().any(|r| r.contains(x, y));
            if high {
                geom.sigma_high
            } else {
                geom.sigma_low
            }
        })
        .collect();
    CoefficientField {
        elements_per_side: grid.elements_per_side(),
        values,
    }
}

/// Coefficient of one problem in the sequence together with the elements
/// that changed relative to its predecessor.
#[derive(Debug, Clone)]
pub struct ScheduledField {
    pub k: usize,
    pub open_ports: PortSet,
    pub field: CoefficientField,
    pub changed: ElementSet,
}

/// Fields for `k = 1..K`. The first field is compared against the base
/// field with every port closed.
pub fn schedule_fields(
    geom: &ChannelGeometry,
    schedule: &ModificationSchedule,
    grid: &Grid,
) -> Vec<ScheduledField> {
    let mut prev = build_coefficient(geom, &PortSet::empty(), grid);
    schedule
        .steps()
        .iter()
        .enumerate()
        .map(|(i, ports)| {
            let field = build_coefficient(geom, ports, grid);
            let changed = field.diff(&prev);
            prev = field.clone();
            ScheduledField {
                k: i + 1,
                open_ports: ports.clone(),
                field,
                changed,
            }
        })
        .collect()
}
