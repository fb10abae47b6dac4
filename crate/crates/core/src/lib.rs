#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decision;
pub mod geometry;
pub mod iris;
pub mod pattern;
pub mod simulator;
pub mod trajectory;
