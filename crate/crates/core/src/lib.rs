pub mod dynamics;
pub mod foundations;
pub mod hilbert;
pub mod infotheory;
pub mod prep;
