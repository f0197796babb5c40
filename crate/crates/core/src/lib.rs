// SPDX-License-Identifier: Apache-2.0

//! Probability metrics (total variation, Fortet–Mourier, Wasserstein-1,
//! characteristic-function distance) and certified total-variation bounds
//! derived from Fortet–Mourier bounds through Fourier inversion.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod certify;
pub mod clt;
pub mod distkit;
pub mod dynsys;
pub mod error;
pub mod metrics;
pub mod quad;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
