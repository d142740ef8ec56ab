#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
//! Graph Fourier latent representations for point-cloud attributes.
//!
//! The crate covers the spectral side of a multiscale attribute-deblocking
//! pipeline:
//!
//! * [`pc_io`]: voxelized clouds, RGB ↔ YUV, PLY reading and writing.
//! * [`voxel_grid`]: kd-tree patches, 2³/4³ voxel blocks, the one-bit
//!   coordinate downscale and parent → child unpooling.
//! * [`spectral_graph`]: per-block weighted graphs, Laplacians and a cyclic
//!   Jacobi eigensolver.
//! * [`gft`]: forward/inverse graph Fourier transform of Y, U, V.
//! * [`latent`]: Lloyd-Max binning of the frequency axis into fixed-width
//!   latent vectors and the `GFTL` file format.
//! * [`nn_kernels`]: channel-wise attention fusion, the MLP dimension
//!   reducer and the joint L1 loss, all with analytic gradients.
//! * [`metrics`]: PSNR, bits per point and BD-rate.
//! * [`pipeline`] and [`cli`]: the encode/decode path and the `pcgft` tool.
//!
//! See `examples/` for one runnable program per capability.

pub mod cli;
pub mod error;
pub mod gft;
pub mod latent;
pub mod linalg;
pub mod metrics;
pub mod nn_kernels;
pub mod pc_io;
pub mod pipeline;
pub mod spectral_graph;
pub mod voxel_grid;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use pc_io::{Coord, PointCloud, Yuv};
