//! Cell construction over the square family `𝓑`, the recursive measure on
//! it, and the finite-scale checkers built on top: mass distribution,
//! gauge box counting and the 4r-covering selector.

mod boxcount;
mod cells;
mod mass;
mod vitali;

pub use boxcount::{gauge_box_count, BoxCount};
pub use cells::{build_cell_tree, check_ku_inequalities, Cell, CellTree, KuLevel, KuReport, Square};
pub use mass::{mass_distribution_check, MassReport, MassRow, MassVerdict};
pub use vitali::{verify_four_r_cover, vitali_select, Ball};
