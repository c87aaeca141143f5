pub mod equilibrium;
pub mod error;
pub mod integrator;
pub mod io;
pub mod ledger;
pub mod model;
pub mod ode;
pub mod params;
pub mod scenario;
