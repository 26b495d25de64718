#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod connection;
pub mod curvature;
pub mod engine;
pub mod error;
pub mod expr;
pub mod fields;
pub mod figures;
pub mod indicatrix;
pub mod jets;
pub mod linalg;
pub mod metric;
pub mod ode;
pub mod par;
pub mod plane;
pub mod quad;
pub mod roots;
pub mod taylor;
