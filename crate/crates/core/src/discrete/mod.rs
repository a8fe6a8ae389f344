//! Discrete capacity propagation: every layer acts on the capacity profile
//! through a column-stochastic operator `I + εΔ`.

mod operator;
mod propagate;
mod spec;

pub use operator::{build_operator, weights_from_operator, LayerOperator, WeightStencil};
pub use propagate::{
    collapse_channels, propagate, propagate_dilated, propagate_multichannel, propagate_recurrent,
    propagate_residual, propagate_with_leak, propagate_with_source, LeakResult, Propagation,
    SideCapacities,
};
pub use spec::{ArchitectureSpec, ChannelCoupling, GeneratorSchedule, Variant};

pub(crate) use operator::gather_shifted as gather_into;
