//! Throughput of rateless-coded broadcast over Markov-modulated erasure
//! channels.
//!
//! A transmitter broadcasts rateless-coded blocks of `k` packets to `n`
//! receivers. Each receiver sees an i.i.d. copy of an order-`l` binary
//! Markov erasure process and needs any `k` successful slots to decode. The
//! block ends when the slowest receiver finishes, and the long-run packets
//! per slot is the throughput.
//!
//! The crate covers both sides of the problem:
//!
//! * analytical: the large-deviations rate function of the channel
//!   ([`spectral`]), the asymptotic throughput as `k / ln n → c`
//!   ([`asymptotic`]) and finite-`(n, k)` lower bounds ([`bounds`]);
//! * empirical: a seeded Monte Carlo engine for block completion times,
//!   renewal throughput and queue stability ([`simulator`]), plus an exact
//!   completion-time oracle for memoryless channels ([`oracle`]).
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod asymptotic;
pub mod bounds;
pub mod channel;
mod error;
pub mod oracle;
pub mod simulator;
pub mod spectral;

pub use asymptotic::{asymptotic_throughput, memoryless_asymptotic, AsymptoticResult, BlockRatio};
pub use bounds::{finite_lower_bound, k_zero, BoundReport, Cse1Numerator};
pub use channel::{ChannelModel, ChannelState, GilbertElliott};
pub use error::{Error, Result};
pub use spectral::{rate_function, rate_function_memoryless, RateFunctionEval, TiltedMatrix};
