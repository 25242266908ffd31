//! Robust planning from signal temporal logic specifications.
//!
//! * [`stl`] evaluates formulas over sampled signals (Boolean, exact and
//!   smooth robustness).
//! * [`autodiff`] is the reverse-mode tape that differentiates everything else.
//! * [`dynamics`] simulates the plants under a waypoint-tracking controller.
//! * [`missions`] binds specifications, plants and costs together.
//! * [`planner`] solves the planner-versus-adversary game with the
//!   counterexample-guided alternating scheme and a domain-randomization baseline.

pub mod autodiff;
pub mod dynamics;
pub mod missions;
pub mod planner;
pub mod stl;
