//! Plot-ready series from training traces.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::Result;
use crate::train::{Scheme, Trace};

pub const DEFAULT_WINDOW: usize = 25;

/// Trailing moving average over full windows only.
///
/// Output point `i` is the mean of `trace[i + 1 - window ..= i]` and is
/// labelled with episode `i`. A window longer than the trace collapses to a
/// single mean labelled with the last episode.
pub fn moving_average(trace: &[f64], window: usize) -> Vec<(usize, f64)> {
    let n = trace.len();
    if n == 0 {
        return Vec::new();
    }
    let window = window.max(1);
    if window >= n {
        return vec![(n - 1, trace.iter().sum::<f64>() / n as f64)];
    }
    // Each window is summed afresh so a long trace accumulates no drift.
    (window - 1..n).map(|end| (end, trace[end + 1 - window..=end].iter().sum::<f64>() / window as f64)).collect()
}

/// Episode-wise mean of several traces, cut to the shortest.
pub fn mean_trace(traces: &[&Trace]) -> Vec<f64> {
    let len = traces.iter().map(|t| t.records.len()).min().unwrap_or(0);
    (0..len).map(|i| traces.iter().map(|t| t.records[i].mean_reward).sum::<f64>() / traces.len() as f64).collect()
}

/// Writes `scheme,episode,smoothed_reward` rows, schemes in fixed order.
///
/// Traces of the same scheme (different seeds) are averaged first.
pub fn emit_plotdata(traces: &[Trace], window: usize, w: &mut impl Write) -> Result<()> {
    let mut by_scheme: BTreeMap<Scheme, Vec<&Trace>> = BTreeMap::new();
    for t in traces {
        by_scheme.entry(t.scheme).or_default().push(t);
    }
    writeln!(w, "scheme,episode,smoothed_reward")?;
    for (scheme, group) in by_scheme {
        for (episode, v) in moving_average(&mean_trace(&group), window) {
            writeln!(w, "{scheme},{episode},{v}")?;
        }
    }
    Ok(())
}
