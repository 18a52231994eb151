//! Ground-truth simulators: exact (small widths) and first-order (any size).

pub mod dense;
pub mod exact;
pub mod first_order;

pub use exact::{exact_fidelity, exact_pst, generator_ptm, noisy_layer_ptm, ExactSimulator, Ptm, DEFAULT_CAP};
pub use first_order::{first_order_fidelity, FirstOrderSimulator};
