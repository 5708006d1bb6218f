//! Scheduling of EV charging/discharging flexibility and surplus sharing in
//! a community of buildings.
//!
//! - [`audit`]: feasibility audit of returned schedules.
//! - [`model`]: time grid, EV requests, net loads, solutions and costs.
//! - [`oracle`]: brute-force reference optimum for tiny scenarios.
//! - [`tariff`]: tariff construction and community market prices.
//! - [`schedule`]: MILP construction and solution read-back.
//! - [`scenario`]: scenario generation and the three management modes.

mod csvio;
pub mod audit;
pub mod cost;
pub mod model;
pub mod oracle;
pub mod scenario;
pub mod schedule;
pub mod tariff;

pub use evflex_milp as milp;
