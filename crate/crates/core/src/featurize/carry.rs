//! Carry-forward attribution: a sampled state holds from its timestamp until
//! the next sample, the end of the day, or `max_gap_s` after the sample,
//! whichever comes first.

use super::period::split_span;
use crate::time::SECONDS_PER_DAY;

/// Attributed `[start, end)` spans, in seconds after local midnight.
/// `offsets` must be sorted and lie in `[0, 86400)`.
pub fn carry_spans(offsets: &[i64], max_gap_s: i64) -> impl Iterator<Item = (usize, i64, i64)> + '_ {
    offsets.iter().enumerate().map(move |(i, &t)| {
        let next = offsets.get(i + 1).copied().unwrap_or(SECONDS_PER_DAY);
        let end = next.min(t + max_gap_s).min(SECONDS_PER_DAY);
        (i, t, end.max(t))
    })
}

/// Seconds per `(state, period)` for a sample stream. `state_of(i)` picks the
/// accumulator row for sample `i`.
pub fn attribute_states<const N: usize>(
    offsets: &[i64],
    max_gap_s: i64,
    state_of: impl Fn(usize) -> usize,
) -> [[i64; 3]; N] {
    let mut acc = [[0i64; 3]; N];
    for (i, start, end) in carry_spans(offsets, max_gap_s) {
        let split = split_span(start, end);
        let row = &mut acc[state_of(i)];
        for p in 0..3 {
            row[p] += split[p];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_sample_carries_at_most_the_gap() {
        let spans: Vec<_> = carry_spans(&[0, 100, 2000], 600).collect();
        assert_eq!(spans, vec![(0, 0, 100), (1, 100, 700), (2, 2000, 2600)]);
    }

    #[test]
    fn carry_stops_at_midnight() {
        let spans: Vec<_> = carry_spans(&[SECONDS_PER_DAY - 10], 600).collect();
        assert_eq!(spans, vec![(0, SECONDS_PER_DAY - 10, SECONDS_PER_DAY)]);
    }
}
