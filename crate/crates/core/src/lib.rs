//! Uplink non-orthogonal multiple access (NOMA) simulator.
//!
//! The crate covers both halves of the evaluation:
//!
//! * system level: user drops in a single cell ([`channel`]), per-user
//!   water-filling ([`powalloc`]), the loading-limited joint subcarrier and
//!   power allocation ([`noma_alloc`]), the OFDMA proportional-fair benchmark
//!   ([`ofdma_alloc`]) and the iterative water-filling upper bound, scored with
//!   [`metrics`];
//! * link level: BPSK over OFDM subcarriers shared by up to `L` users with
//!   exhaustive maximum-likelihood multi-user detection and an optional
//!   rate-1/2 convolutional code ([`linklevel`]).
//!
//! [`harness`] ties the pieces into seeded, reproducible campaigns that write
//! CSV tables.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod harness;
pub mod linklevel;
pub mod metrics;
pub mod noma_alloc;
pub mod ofdma_alloc;
pub mod powalloc;
pub mod seed;

pub use error::{Error, Result};
