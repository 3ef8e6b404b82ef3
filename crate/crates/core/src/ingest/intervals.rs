//! Interval utilities for phone-state streams.

use super::types::{PhoneState, PhoneStateInterval};

/// Merges overlapping or touching `[start, end)` intervals of the same kind.
/// The result is sorted by `(start, kind)`; the set of covered seconds per
/// kind is unchanged.
pub fn merge_intervals(intervals: &[PhoneStateInterval]) -> Vec<PhoneStateInterval> {
    let mut out = Vec::with_capacity(intervals.len());
    for &kind in PhoneState::ALL {
        let mut spans: Vec<(i64, i64)> = intervals
            .iter()
            .filter(|iv| iv.kind == kind)
            .map(|iv| (iv.start, iv.end))
            .collect();
        spans.sort_unstable();
        let mut current: Option<(i64, i64)> = None;
        for (s, e) in spans {
            current = match current {
                Some((cs, ce)) if s <= ce => Some((cs, ce.max(e))),
                Some((cs, ce)) => {
                    out.push(PhoneStateInterval { start: cs, end: ce, kind });
                    Some((s, e))
                }
                None => Some((s, e)),
            };
        }
        if let Some((start, end)) = current {
            out.push(PhoneStateInterval { start, end, kind });
        }
    }
    out.sort_by_key(|iv| (iv.start, iv.kind));
    out
}

/// Turns a light-sensor trace into dark intervals. A run of consecutive
/// samples with lux below `threshold` becomes one interval lasting from the
/// first dark sample until the next sample, or at most `max_gap_s` past the
/// last dark sample. `samples` must be sorted by time.
pub fn dark_intervals_from_lux(samples: &[(i64, f64)], threshold: f64, max_gap_s: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    let mut run: Option<(i64, i64)> = None;
    for (i, &(t, lux)) in samples.iter().enumerate() {
        let next = samples.get(i + 1).map(|s| s.0);
        let carry_end = next.map_or(t + max_gap_s, |n| n.min(t + max_gap_s));
        if lux < threshold {
            run = match run {
                Some((s, e)) if t <= e => Some((s, carry_end.max(e))),
                Some(done) => {
                    out.push(done);
                    Some((t, carry_end))
                }
                None => Some((t, carry_end)),
            };
        } else if let Some(done) = run.take() {
            out.push(done);
        }
    }
    if let Some(done) = run {
        out.push(done);
    }
    out.retain(|(s, e)| e > s);
    out
}
