use crate::rng::frame_draw;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Where a replica's election timeouts come from. Both variants give a
/// uniform draw on `[min, max]` per reset.
#[derive(Debug, Clone)]
pub enum TimeoutSource {
    /// Independent draws from the replica's own stream.
    Independent(Box<ChaCha8Rng>),
    /// One shared draw per frame, shifted by the replica's `slot` modulo the
    /// range width. Replicas with distinct slots that reset in the same
    /// frame never time out together, so a quiet cluster cannot split its
    /// vote while it has no more members than the range has values.
    Staggered { seed: u64, slot: u64 },
}

impl TimeoutSource {
    pub fn draw(&mut self, frame: u64, min: u64, max: u64) -> u64 {
        match self {
            TimeoutSource::Independent(rng) => rng.gen_range(min..=max),
            TimeoutSource::Staggered { seed, slot } => {
                let span = max - min + 1;
                min + (frame_draw(*seed, frame, span) + *slot) % span
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn staggered_draws_are_distinct_within_a_frame() {
        for frame in 0..200 {
            let mut seen = std::collections::BTreeSet::new();
            for slot in 0..7 {
                let t = TimeoutSource::Staggered { seed: 3, slot }.draw(frame, 6, 12);
                assert!((6..=12).contains(&t));
                assert!(seen.insert(t));
            }
        }
    }

    #[test]
    fn staggered_draws_cover_the_range() {
        let mut counts = [0u32; 7];
        for frame in 0..7000 {
            counts[(TimeoutSource::Staggered { seed: 9, slot: 2 }.draw(frame, 6, 12) - 6) as usize] += 1;
        }
        assert!(counts.iter().all(|&c| (800..1200).contains(&c)), "{counts:?}");
    }

    #[test]
    fn independent_draws_stay_in_range() {
        let mut source = TimeoutSource::Independent(Box::new(ChaCha8Rng::seed_from_u64(1)));
        assert!((0..100).all(|f| (6..=12).contains(&source.draw(f, 6, 12))));
    }
}
