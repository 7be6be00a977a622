pub mod benders;
pub mod instance;
pub mod milp;
pub mod model;
pub mod report;
pub mod simplex;
