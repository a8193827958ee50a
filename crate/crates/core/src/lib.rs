//! Pricing-based distributed energy-efficient beamforming for MISO
//! interference channels.

pub mod cxlinalg;
pub mod harness;
pub mod metrics;
pub mod orchestrators;
pub mod peruser;
pub mod pricing;
pub mod scenario;
