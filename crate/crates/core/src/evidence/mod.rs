//! Dempster-Shafer belief functions over the label set and the evidential
//! K-nearest-neighbour classifier.

mod eknn;
mod mass;

pub use eknn::{eknn_fit, EknnModel, EknnParams};
pub use mass::{cardinality, full_set, singleton, FocalSet, MassFunction, MAX_CLASSES};
