//! Graph filters and graph neural networks built on a sparse shift operator.
//!
//! `graph` holds sparse storage and graph construction, `filters` and
//! `spectral` the linear filters in the vertex and frequency domains,
//! `attention` the learned neighborhood shifts, `nn` the models with their
//! gradient tape and optimizer, and `harness` the datasets and training loop.
//!
//! ```
//! use edgenet::filters::PolynomialFilter;
//! use edgenet::graph::CsrMatrix;
//! use edgenet::linalg::DenseMatrix;
//!
//! let s = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
//! let h = PolynomialFilter::new(vec![1.0, 0.5]).unwrap();
//! let y = h.apply(&s, &DenseMatrix::column_vector(&[2.0, 0.0])).unwrap();
//! assert_eq!(y.as_slice(), &[2.0, 1.0]);
//! ```

pub mod attention;
pub mod error;
pub mod filters;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod nn;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
