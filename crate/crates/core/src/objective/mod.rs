//! The objective: KL(q ‖ p) over conv(A), its pointwise gradient
//! log(q/p), the duality gap, truncation loss and the family constants.

mod constants;
mod kl;
mod target;

pub use constants::{information_loss_chain, information_loss_constant, ObjectiveConstants};
pub use kl::{duality_gap, grad_log_ratio, kl_estimate, linear_value, truncation_loss};
pub use target::{LogDensity, TargetKind, TargetPosterior};
