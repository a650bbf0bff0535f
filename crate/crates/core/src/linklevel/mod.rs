//! Link-level chain: BPSK (or QPSK) on OFDM subcarriers, up to `L` users
//! superimposed per subcarrier, exhaustive ML multi-user detection and an
//! optional rate-1/2 convolutional code with hard-decision Viterbi decoding.

pub mod ber;
pub mod conv;
pub mod modulation;
pub mod mud;

pub use ber::{
    ebn0_at_ber, rayleigh_bpsk_ber, simulate_ber, simulate_point, BerPoint, Fading, LinkScheme, LinkSimConfig,
};
pub use conv::{conv_encode, viterbi_decode, CodeSpec};
pub use modulation::{bpsk_demap, bpsk_map, Constellation};
pub use mud::{ml_mud, ml_mud_indices, superimpose, SubcarrierMap};
