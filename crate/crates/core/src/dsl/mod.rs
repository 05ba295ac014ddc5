//! Operator graphs: catalog, spec documents, validation, interpretation and
//! structural distance.

mod catalog;
mod interp;
mod seeds;
mod spec;
mod ted;
mod validate;

pub use catalog::*;
pub use interp::*;
pub use seeds::*;
pub use spec::*;
pub use ted::*;
pub use validate::*;
