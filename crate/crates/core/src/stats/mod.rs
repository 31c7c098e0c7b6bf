//! Streaming turbulence statistics, Reynolds-stress budgets, statistics losses and flow
//! diagnostics.

mod budget;
mod diagnostics;
mod loss;
mod moments;
mod profile;

pub use budget::{budget_terms, BudgetProfile};
pub use diagnostics::{correlation_csv, skin_friction, temporal_correlation, vorticity, vorticity_correlation, SkinFriction};
pub use loss::{aggregate_error, source_penalty, stats_loss, weight_decay, ErrorTerm, LossWeights, SliceStats, StatsLoss};
pub use moments::MomentAccumulator;
pub use profile::{
    eddy_turnover, friction_velocity, friction_velocity_from_profile, t_plus, ChannelSlices, ChannelStatistics, FrictionVelocity,
    StatsProfile,
};
