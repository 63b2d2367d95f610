//! Feistel boomerang connectivity tables and second-order zero differential
//! spectra over finite fields, with closed-form evaluators for swapped
//! inverse functions and a harness that checks them against brute force.

pub mod closedform;
pub mod error;
pub mod experiments;
pub mod export;
pub mod fbct;
pub mod field;
pub mod functions;
pub mod pool;

pub use error::{Error, Result};
pub use fbct::{
    fbct_table, nabla, second_order_uniformity, spectrum, DdtMatrix, Engine, FbctMatrix,
    FbctOptions, PerturbedFbct, Scope, Spectrum, Uniformity,
};
pub use experiments::{Status, VerificationReport};
pub use field::{Elem, Field, FieldSpec};
pub use functions::{
    inverse_function, reduce_to_canonical, swapped_inverse, FunctionTable, Transposition,
};
