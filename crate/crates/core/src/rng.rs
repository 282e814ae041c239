//! Counter-based random substreams.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Default master seed used when none is supplied.
pub const DEFAULT_SEED: u64 = 20_120_501;

/// Independent generator for replication `index` under `master`.
///
/// Streams are ChaCha20 stream ids, so the draws of one replication never
/// depend on how many replications ran before it or on which thread.
pub fn substream(master: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}
