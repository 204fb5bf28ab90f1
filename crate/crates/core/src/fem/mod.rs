//! Q1 finite elements for `-div(sigma grad u) = 0` on the unit square with
//! `u = 1` at `x = 0`, `u = -1` at `x = 1` and natural boundary conditions on
//! the horizontal edges, plus the high-contrast channel coefficients.

mod assembly;
mod geometry;
mod grid;

pub use assembly::{assemble, assemble_local_neumann, reference_stiffness, LinearSystem};
pub use geometry::{
    build_coefficient, schedule_fields, ChannelGeometry, CoefficientField, ModificationSchedule,
    PortSet, Rect, ScheduledField,
};
pub use grid::{ElementSet, Grid};
