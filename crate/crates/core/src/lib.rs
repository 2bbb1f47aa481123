//! Learning agent-independent payment rules.
//!
//! A structural SVM is trained on `(type profile, agent-1 outcome)` pairs
//! produced by an outcome rule. The discriminant is restricted to
//! `w1 * v1(θ1, o) - w1 * t(θ_{-1}, o)`, so the trained model induces a price
//! function `t` that depends only on the other agents' reports. Payments
//! derived from `t` are then evaluated by accuracy, ex post regret and IR
//! violation against the outcome rule.

pub mod error;
pub mod features;
pub mod gendata;
pub mod harness;
pub mod mechanism;
pub mod outcomes;
pub mod payments;
pub mod scalar;
pub mod trainer;

pub use error::{Error, Result};
pub use mechanism::{
    Allocation, AgentType, AssignmentValuation, Bundle, Domain, FnPrice, MultiMindedBid, OthersProfile, Outcome,
    PriceFunction, TypeProfile,
};
pub use scalar::{Scalar, Value};

/// Multi-minded bid over `f64` values.
pub type Bid = MultiMindedBid<f64>;
/// Agent type over `f64` values.
pub type Agent = AgentType<f64>;
/// Type profile over `f64` values.
pub type Profile = TypeProfile<f64>;
/// Others' profile over `f64` values.
pub type Others = OthersProfile<f64>;
/// Trained model over `f64`.
pub type Model = trainer::TrainedModel<f64>;
/// Dataset over `f64`.
pub type Data = gendata::Dataset<f64>;
