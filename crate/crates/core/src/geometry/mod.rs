//! Initial data, rays, normal frames and the beam chart.

pub mod chart;
pub mod frame;
pub mod initial;
pub mod pullback;
pub mod ray;

pub use chart::{flow_out, BasePoint, ChartPoint, Tube};
pub use frame::{constant_frame, evolve_frame, normal_projector};
pub use initial::{Component, ConstantAmplitude, InitialAmplitude, InitialData, InitialPhase, PolynomialPhase, ReferenceSet};
pub use ray::{hamilton_rhs, spatial_gradient, trace_ray, RayBounds, RayPath};
pub use pullback::{pullback_first, pullback_jet, pullback_value, PullbackFirst, PullbackJet};
