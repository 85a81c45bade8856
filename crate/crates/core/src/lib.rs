pub mod bundled;
pub mod dsl;
pub mod explain;
pub mod io;
pub mod model;
pub mod smt;
pub mod synth;
