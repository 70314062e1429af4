//! Seed derivation.
//!
//! Every random stream in a run is keyed off the master seed through
//! [`derive_seed`]: the 64-bit words `(master, stream, a, b)` are fed little-endian
//! into FNV-1a 64 and the digest is passed through the SplitMix64 finalizer.
//! Both steps are fixed public constants, so any implementation reproduces the
//! same seeds without sharing code.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Random streams that are derived independently from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    GlobalInit = 1,
    TrainEpisode = 2,
    EvalEpisode = 3,
    SimRun = 4,
}

/// FNV-1a 64 over a byte slice.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// SplitMix64 output finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `seed = splitmix64(fnv1a64(le(master) ‖ le(stream) ‖ le(a) ‖ le(b)))`.
pub fn derive_seed(master: u64, stream: Stream, a: u64, b: u64) -> u64 {
    let mut buf = [0u8; 32];
    for (chunk, word) in buf.chunks_exact_mut(8).zip([master, stream as u64, a, b]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    splitmix64(fnv1a64(&buf))
}
