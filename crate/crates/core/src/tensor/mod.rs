//! CP and tensor-train representations of higher-order inner-product tensors.

pub mod cp;
pub mod taylor;
pub mod tt;

pub use cp::{cp_from_points, cp_hadamard_power, cp_hadamard_power_with, CPTensor};
pub use taylor::{taylor_tt_approx, taylor_tt_approx_with, Measurement, TtPowerReport, TtTaylorOptions, TtTaylorReport};
pub use tt::{cp_to_tt, cp_to_tt_svd, tt_add, tt_hadamard, tt_round, tt_svd, TTTensor};
