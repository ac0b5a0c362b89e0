use super::{FactorGraph, GraphError};
use crate::domain::Belief;

/// 3^12 joint states is the largest table we are willing to enumerate.
pub const EXACT_VARIABLE_CAP: usize = 12;

/// Exact marginals by enumerating every joint assignment of the graph.
pub fn exact_marginals(graph: &FactorGraph) -> Result<Vec<Belief>, GraphError> {
    let n = graph.num_variables();
    if n > EXACT_VARIABLE_CAP {
        return Err(GraphError::TooLarge {
            n,
            cap: EXACT_VARIABLE_CAP,
        });
    }
    let states = 3usize.pow(n as u32);
    let mut assignment = vec![0usize; n];
    let mut log_weights = Vec::with_capacity(states);
    for s in 0..states {
        let mut rest = s;
        for slot in assignment.iter_mut() {
            *slot = rest % 3;
            rest /= 3;
        }
        let lw: f64 = graph
            .factors()
            .iter()
            .map(|f| {
                let local: Vec<usize> = f.scope.iter().map(|v| assignment[v.0]).collect();
                f.table.value(&local).ln()
            })
            .sum();
        log_weights.push(lw);
    }

    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sums = vec![[0.0f64; 3]; n];
    for (s, lw) in log_weights.iter().enumerate() {
        let w = (lw - max).exp();
        let mut rest = s;
        for sum in sums.iter_mut() {
            sum[rest % 3] += w;
            rest /= 3;
        }
    }
    Ok(sums.into_iter().map(Belief::normalized).collect())
}
