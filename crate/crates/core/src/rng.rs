//! Counter-addressed random streams for reproducible parallel Monte Carlo.
//!
//! Every random draw in a sweep belongs to a stream identified by
//! `(master seed, purpose, SNR index, trial index)`.  The stream is a ChaCha
//! keystream selected by seed and stream id, so what a trial sees does not
//! depend on which worker runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// What a stream is used for. Distinct purposes never share keystream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Noise = 1,
    Codeword = 2,
    Scratch = 3,
}

/// Address of one random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub master_seed: u64,
    pub purpose: Purpose,
    pub snr_index: u32,
    pub trial: u32,
}

impl StreamKey {
    pub fn new(master_seed: u64, purpose: Purpose, snr_index: u32, trial: u32) -> Self {
        Self {
            master_seed,
            purpose,
            snr_index,
            trial,
        }
    }

    fn stream_id(&self) -> u64 {
        // 8 bits purpose | 24 bits SNR index | 32 bits trial
        ((self.purpose as u64) << 56) | ((self.snr_index as u64 & 0x00ff_ffff) << 32) | self.trial as u64
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id());
        rng.set_word_pos(0);
        rng
    }

    /// A 64-bit sub-seed drawn from this stream (for codeword resampling).
    pub fn sub_seed(&self) -> u64 {
        use rand::RngCore;
        self.rng().next_u64()
    }
}
