//! Change of variables to the b-family and weak-solution verification.

pub mod btransform;
pub mod quadrature;
pub mod weak;

pub use btransform::{b_to_theta, theta_to_b, transform_to_b, BTransformParams, BTrajectory};
pub use weak::{standard_test_set, weak_residual, TestFunction, WeakCandidate};
