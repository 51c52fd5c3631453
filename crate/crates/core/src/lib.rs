//! Deterministic mesoscopic road-traffic simulator with peer-to-peer route
//! sharing, adaptive signal control and dynamic lane reversal.

pub mod control;
pub mod network;
pub mod traffic;
pub mod comms;
pub mod routing;
pub mod baselines;
pub mod rng;
pub mod harness;
