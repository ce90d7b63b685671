//! Disturbance observer synthesis from measured frequency response data.
//!
//! The crate is organised around a single pipeline:
//!
//! 1. [`frf`] holds frequency response datasets (one response per plant
//!    configuration on a shared grid) and their file formats.
//! 2. [`plant`] provides a two-mass flexible-joint simulator, multisine
//!    excitation and FRF estimation, so the pipeline can be exercised
//!    end to end without hardware.
//! 3. [`synth`] defines the controller parametrisation (a discrete-time
//!    rational filter), the shaping weights and the closed-loop response
//!    functions they constrain.
//! 4. [`conic`] is a thin contract over a second-order cone solver.
//! 5. [`convexify`] turns the non-convex design problem into a sequence
//!    of conic programs (an inner convex approximation re-linearised at
//!    each iterate) and drives it to convergence.
//! 6. [`stability`] certifies a synthesis run: winding numbers of the
//!    characteristic polynomial chain and of the final closed loop.
//! 7. [`validate`] runs time-domain scenarios (steps, chirps, impacts,
//!    inertia sweeps) against synthesised and baseline observers and
//!    reports metrics.

pub mod conic;
pub mod convexify;
pub mod frf;
pub mod plant;
pub mod stability;
pub mod synth;
pub mod validate;
