//! Explicit ReLU networks approximating the matrix exponential.
//!
//! The construction truncates the Taylor series at order `K` and realizes
//! every power `A^j` entrywise as a sum over index paths of approximate
//! `j`-fold products. Products are balanced trees of binary products, each
//! built from three sawtooth squarers.

mod certify;
mod construct;
mod io;
mod network;

pub use certify::{certify, certify_exp, CertReport, ExpBounds, Oracle, SampleBox};
pub use construct::{
    build_binary_product, build_exp_net, build_lary_product, build_matrix_power_net, build_square_net, compute_k,
    paths_per_entry, product_node_tolerance, squarer_levels, ExpNetSpec, DEFAULT_BUDGET,
};
pub use io::{read_network, write_network, LayerDescriptor, WeightFileHeader};
pub use network::{Activation, ReluNetwork, SparseLayer};
