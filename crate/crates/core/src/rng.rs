//! Random streams keyed by simulation coordinates.
//!
//! Every draw in a campaign comes from a ChaCha8 generator whose seed is a
//! hash of `(seed, scope, users, realization, user, round)`. A stream never
//! depends on how many other streams were consumed before it, so results do
//! not change with the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamScope {
    /// User angle sampling, one stream per realization.
    Angles = 1,
    /// Channel-estimation error, one stream per (user, round).
    Estimation = 2,
    /// Synthetic measurement traces.
    Trace = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub scope: StreamScope,
    /// Number of users in the scenario, so different K never share draws.
    pub users: u64,
    pub realization: u64,
    pub user: u64,
    pub round: u64,
}

impl StreamKey {
    pub fn new(seed: u64, scope: StreamScope) -> Self {
        StreamKey { seed, scope, users: 0, realization: 0, user: 0, round: 0 }
    }

    pub fn users(self, users: usize) -> Self {
        StreamKey { users: users as u64, ..self }
    }

    pub fn realization(self, realization: usize) -> Self {
        StreamKey { realization: realization as u64, ..self }
    }

    pub fn user(self, user: usize) -> Self {
        StreamKey { user: user as u64, ..self }
    }

    pub fn round(self, round: usize) -> Self {
        StreamKey { round: round as u64, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.seed;
        for word in [self.scope as u64, self.users, self.realization, self.user, self.round] {
            state = splitmix64(&mut state) ^ word;
        }
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
