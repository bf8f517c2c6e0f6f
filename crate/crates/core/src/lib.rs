//! Calcium-signalling ODE models with optional mechanical coupling.
//!
//! The planar model tracks cytosolic calcium `c` and the open-receptor
//! fraction `h`; the mechanochemical model adds the dilatation `theta`.

// `!(x > 0.0)` is the idiom used throughout to reject NaN along with
// out-of-range values; index loops mirror the component formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod curves;
pub mod equilibria;
pub mod error;
pub mod golden;
pub mod gspt;
pub mod integrator;
pub mod io;
pub mod model;
pub mod roots;
