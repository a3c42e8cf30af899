pub mod diagnostics;
pub mod experiments;
pub mod io;
pub mod lemmas;
pub mod models;
pub mod numerics;
pub mod spde;
