use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FactorGraph, FactorId, PotentialTable, VarId};
use crate::domain::Belief;

/// Smallest entry a message or marginal may hold. Far enough from zero that
/// the largest entry of a normalized belief stays below 1.
pub const MIN_ENTRY: f64 = 1e-12;

/// Edges per rayon task; smaller graphs stay effectively sequential.
const PAR_CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Schedule {
    /// Every message of an iteration reads only the previous phase.
    Synchronous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpConfig {
    pub max_iterations: usize,
    /// Stop once the largest entrywise message change falls below this.
    pub convergence_eps: f64,
    /// Weight kept from the previous message, in [0, 1).
    pub damping: f64,
    pub schedule: Schedule,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig {
            max_iterations: 100,
            convergence_eps: 1e-5,
            damping: 0.5,
            schedule: Schedule::Synchronous,
        }
    }
}

impl BpConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_iterations < 1 {
            return Err("max_iterations must be at least 1".into());
        }
        if !(self.convergence_eps > 0.0) {
            return Err("convergence_eps must be positive".into());
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err("damping must lie in [0, 1)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpResult {
    /// Marginal per variable, indexed by `VarId`.
    pub marginals: Vec<Belief>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest message change seen in the final iteration.
    pub final_delta: f64,
}

impl BpResult {
    pub fn marginal(&self, v: VarId) -> Belief {
        self.marginals[v.0]
    }
}

/// Message state of a graph: one variable-to-factor and one
/// factor-to-variable belief per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Messages {
    var_to_factor: Vec<Belief>,
    factor_to_var: Vec<Belief>,
}

impl Messages {
    pub fn uniform(graph: &FactorGraph) -> Self {
        let n = graph.edges().len();
        Messages {
            var_to_factor: vec![Belief::uniform(); n],
            factor_to_var: vec![Belief::uniform(); n],
        }
    }

    pub fn var_to_factor(&self, graph: &FactorGraph, v: VarId, f: FactorId) -> Option<Belief> {
        graph.edge_index(f, v).map(|e| self.var_to_factor[e])
    }

    pub fn factor_to_var(&self, graph: &FactorGraph, f: FactorId, v: VarId) -> Option<Belief> {
        graph.edge_index(f, v).map(|e| self.factor_to_var[e])
    }

    /// Returns false when `v` is not in the scope of `f`.
    pub fn set_var_to_factor(&mut self, graph: &FactorGraph, v: VarId, f: FactorId, b: Belief) -> bool {
        match graph.edge_index(f, v) {
            Some(e) => {
                self.var_to_factor[e] = b;
                true
            }
            None => false,
        }
    }

    pub fn set_factor_to_var(&mut self, graph: &FactorGraph, f: FactorId, v: VarId, b: Belief) -> bool {
        match graph.edge_index(f, v) {
            Some(e) => {
                self.factor_to_var[e] = b;
                true
            }
            None => false,
        }
    }
}

fn floored(b: Belief) -> Belief {
    let p = b.probs();
    if p.iter().all(|x| *x >= MIN_ENTRY) {
        b
    } else {
        Belief::normalized(p.map(|x| x.max(MIN_ENTRY)))
    }
}

fn log_product<'a>(messages: impl Iterator<Item = &'a Belief>) -> Belief {
    let mut logs = [0.0f64; 3];
    for m in messages {
        for (l, p) in logs.iter_mut().zip(m.probs()) {
            *l += p.max(MIN_ENTRY).ln();
        }
    }
    floored(Belief::from_log(logs))
}

fn log_entries(b: &Belief) -> [f64; 3] {
    b.probs().map(|p| p.max(MIN_ENTRY).ln())
}

/// Summed log inbox of every variable; a cavity message is then the total
/// minus one edge, which keeps high-degree hubs linear.
fn log_totals(graph: &FactorGraph, factor_to_var: &[Belief]) -> Vec<[f64; 3]> {
    graph
        .variables()
        .par_iter()
        .with_min_len(PAR_CHUNK)
        .map(|v| {
            let mut acc = [0.0; 3];
            for &e in graph.var_edges(v.id) {
                for (a, l) in acc.iter_mut().zip(log_entries(&factor_to_var[e])) {
                    *a += l;
                }
            }
            acc
        })
        .collect()
}

fn cavity(graph: &FactorGraph, edge: usize, totals: &[[f64; 3]], factor_to_var: &[Belief]) -> Belief {
    let e = graph.edges()[edge];
    if graph.var_edges(e.var).len() == 1 {
        return Belief::uniform();
    }
    let own = log_entries(&factor_to_var[edge]);
    let t = totals[e.var.0];
    floored(Belief::from_log([0, 1, 2].map(|i| t[i] - own[i])))
}

fn var_to_factor_on_edge(graph: &FactorGraph, edge: usize, factor_to_var: &[Belief]) -> Belief {
    let e = graph.edges()[edge];
    log_product(
        graph
            .var_edges(e.var)
            .iter()
            .filter(|&&other| other != edge)
            .map(|&other| &factor_to_var[other]),
    )
}

fn factor_to_var_on_edge(graph: &FactorGraph, edge: usize, var_to_factor: &[Belief]) -> Belief {
    let e = graph.edges()[edge];
    let factor = graph.factor(e.factor);
    let out = match &factor.table {
        PotentialTable::Unary(v) => *v,
        PotentialTable::Binary(m) => {
            let slots = graph.factor_edges(e.factor);
            let (mine, other) = if slots[0] == edge { (0, slots[1]) } else { (1, slots[0]) };
            let incoming = var_to_factor[other].probs();
            let mut out = [0.0; 3];
            for (x, o) in out.iter_mut().enumerate() {
                *o = (0..3)
                    .map(|r| {
                        let psi = if mine == 0 { m[x][r] } else { m[r][x] };
                        psi * incoming[r]
                    })
                    .sum();
            }
            out
        }
    };
    floored(Belief::normalized(out))
}

/// Normalized product of the messages `v` receives from every neighboring
/// factor other than `f`. Uniform when there are none.
pub fn message_var_to_factor(graph: &FactorGraph, v: VarId, f: FactorId, inbox: &Messages) -> Belief {
    let edge = graph
        .edge_index(f, v)
        .expect("factor is not a neighbor of the variable");
    var_to_factor_on_edge(graph, edge, &inbox.factor_to_var)
}

/// Sum over the other scope variable of the potential times its incoming
/// message; a unary factor returns its normalized potential.
pub fn message_factor_to_var(graph: &FactorGraph, f: FactorId, v: VarId, inbox: &Messages) -> Belief {
    let edge = graph
        .edge_index(f, v)
        .expect("variable is not in the factor scope");
    factor_to_var_on_edge(graph, edge, &inbox.var_to_factor)
}

fn damp(old: Belief, new: Belief, damping: f64) -> Belief {
    if damping == 0.0 {
        return new;
    }
    let (o, n) = (old.probs(), new.probs());
    Belief::normalized([0, 1, 2].map(|i| damping * o[i] + (1.0 - damping) * n[i]))
}

fn marginals(graph: &FactorGraph, factor_to_var: &[Belief]) -> Vec<Belief> {
    graph
        .variables()
        .par_iter()
        .with_min_len(PAR_CHUNK)
        .map(|v| log_product(graph.var_edges(v.id).iter().map(|&e| &factor_to_var[e])))
        .collect()
}

/// Synchronous flooding sum-product. Each iteration recomputes every
/// variable-to-factor message from the previous factor messages, then every
/// factor-to-variable message from those. Unary factor messages are
/// constant and never damped.
pub fn run_bp(graph: &FactorGraph, config: &BpConfig) -> BpResult {
    let mut msgs = Messages::uniform(graph);
    let n_edges = graph.edges().len();
    let mut converged = false;
    let mut iterations = 0;
    let mut final_delta = 0.0;

    while iterations < config.max_iterations {
        iterations += 1;

        let totals = log_totals(graph, &msgs.factor_to_var);
        let v2f: Vec<Belief> = (0..n_edges)
            .into_par_iter()
            .with_min_len(PAR_CHUNK)
            .map(|e| {
                let fresh = cavity(graph, e, &totals, &msgs.factor_to_var);
                damp(msgs.var_to_factor[e], fresh, config.damping)
            })
            .collect();

        let f2v: Vec<Belief> = (0..n_edges)
            .into_par_iter()
            .with_min_len(PAR_CHUNK)
            .map(|e| {
                let fresh = factor_to_var_on_edge(graph, e, &v2f);
                let unary = graph.factor(graph.edges()[e].factor).table.arity() == 1;
                if unary {
                    fresh
                } else {
                    damp(msgs.factor_to_var[e], fresh, config.damping)
                }
            })
            .collect();

        let delta = (0..n_edges)
            .map(|e| {
                v2f[e]
                    .max_abs_diff(&msgs.var_to_factor[e])
                    .max(f2v[e].max_abs_diff(&msgs.factor_to_var[e]))
            })
            .fold(0.0, f64::max);

        msgs.var_to_factor = v2f;
        msgs.factor_to_var = f2v;
        final_delta = delta;
        if delta < config.convergence_eps {
            converged = true;
            break;
        }
    }

    BpResult {
        marginals: marginals(graph, &msgs.factor_to_var),
        converged,
        iterations,
        final_delta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorgraph::{exact_marginals, FactorKind};

    const SOFT_ONE: [[f64; 3]; 3] = [[0.7, 0.1, 0.2], [0.15, 0.7, 0.15], [0.2, 0.1, 0.7]];
    const TIGHT: BpConfig = BpConfig {
        max_iterations: 500,
        convergence_eps: 1e-12,
        damping: 0.5,
        schedule: Schedule::Synchronous,
    };

    fn close(b: Belief, want: [f64; 3], tol: f64) {
        let p = b.probs();
        for i in 0..3 {
            assert!((p[i] - want[i]).abs() < tol, "{p:?} vs {want:?}");
        }
    }

    #[test]
    fn var_message_empty_product_is_uniform() {
        let mut g = FactorGraph::new();
        let v = g.add_variable("v");
        let f = g
            .add_factor(FactorKind::Seed, &[v], PotentialTable::unary([0.7, 0.1, 0.2]).unwrap())
            .unwrap();
        let inbox = Messages::uniform(&g);
        close(message_var_to_factor(&g, v, f, &inbox), [1.0 / 3.0; 3], 1e-12);
    }

    #[test]
    fn var_message_multiplies_other_inboxes() {
        let mut g = FactorGraph::new();
        let v = g.add_variable("v");
        let unit = PotentialTable::unary([1.0; 3]).unwrap();
        let target = g.add_factor(FactorKind::Emb, &[v], unit).unwrap();
        let f1 = g.add_factor(FactorKind::Emb, &[v], unit).unwrap();
        let mut inbox = Messages::uniform(&g);
        inbox.set_factor_to_var(&g, f1, v, Belief::normalized([0.7, 0.1, 0.2]));
        close(message_var_to_factor(&g, v, target, &inbox), [0.7, 0.1, 0.2], 1e-12);

        let f2 = g.add_factor(FactorKind::Emb, &[v], unit).unwrap();
        let mut inbox = Messages::uniform(&g);
        inbox.set_factor_to_var(&g, f1, v, Belief::normalized([0.5, 0.3, 0.2]));
        inbox.set_factor_to_var(&g, f2, v, Belief::normalized([0.2, 0.3, 0.5]));
        // (0.10, 0.09, 0.10) / 0.29
        close(
            message_var_to_factor(&g, v, target, &inbox),
            [0.10 / 0.29, 0.09 / 0.29, 0.10 / 0.29],
            1e-12,
        );
        close(message_var_to_factor(&g, v, target, &inbox), [0.345, 0.310, 0.345], 1e-3);
    }

    /// Sum over all nine joint states of psi(r, x) * mu(r), kept separate
    /// from the slot bookkeeping in the implementation.
    fn enumerate_binary(psi: [[f64; 3]; 3], mu: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for r in 0..3 {
            for x in 0..3 {
                out[x] += psi[r][x] * mu[r];
            }
        }
        let z: f64 = out.iter().sum();
        out.map(|o| o / z)
    }

    #[test]
    fn factor_messages() {
        let mut g = FactorGraph::new();
        let a = g.add_variable("a");
        let b = g.add_variable("b");
        let u = g
            .add_factor(FactorKind::Seed, &[a], PotentialTable::unary([0.7, 0.1, 0.2]).unwrap())
            .unwrap();
        let f = g
            .add_factor(FactorKind::SelPref, &[a, b], PotentialTable::binary(SOFT_ONE).unwrap())
            .unwrap();
        let mut inbox = Messages::uniform(&g);
        close(message_factor_to_var(&g, u, a, &inbox), [0.7, 0.1, 0.2], 1e-12);

        let oracle = enumerate_binary(SOFT_ONE, [0.7, 0.1, 0.2]);
        close(Belief::normalized(oracle), [0.545, 0.160, 0.295], 1e-12);
        inbox.set_var_to_factor(&g, a, f, Belief::normalized([0.7, 0.1, 0.2]));
        close(message_factor_to_var(&g, f, b, &inbox), oracle, 1e-12);

        let uniform = Messages::uniform(&g);
        close(message_factor_to_var(&g, f, b, &uniform), [0.35, 0.30, 0.35], 1e-12);
        // toward the row variable the table is read by columns
        let mut back = Messages::uniform(&g);
        back.set_var_to_factor(&g, b, f, Belief::normalized([0.7, 0.1, 0.2]));
        let mut want = [0.0; 3];
        for x in 0..3 {
            for r in 0..3 {
                want[x] += SOFT_ONE[x][r] * [0.7, 0.1, 0.2][r];
            }
        }
        close(message_factor_to_var(&g, f, a, &back), Belief::normalized(want).probs(), 1e-12);
    }

    #[test]
    fn single_seed_converges_immediately() {
        let mut g = FactorGraph::new();
        let v = g.add_variable("v");
        g.add_factor(FactorKind::Seed, &[v], PotentialTable::unary([0.7, 0.1, 0.2]).unwrap())
            .unwrap();
        let res = run_bp(&g, &BpConfig::default());
        assert!(res.converged);
        assert!(res.iterations <= 2);
        close(res.marginal(v), [0.7, 0.1, 0.2], 1e-12);
    }

    #[test]
    fn chain_matches_exact() {
        let mut g = FactorGraph::new();
        let a = g.add_variable("a");
        let b = g.add_variable("b");
        g.add_factor(FactorKind::Seed, &[a], PotentialTable::unary([0.7, 0.1, 0.2]).unwrap())
            .unwrap();
        g.add_factor(FactorKind::Emb, &[b], PotentialTable::unary([1.0; 3]).unwrap())
            .unwrap();
        g.add_factor(FactorKind::SelPref, &[a, b], PotentialTable::binary(SOFT_ONE).unwrap())
            .unwrap();
        let res = run_bp(&g, &BpConfig::default());
        assert!(res.converged);
        close(res.marginal(b), [0.545, 0.160, 0.295], 1e-4);
        // the damped fixed point is exact; a tight stopping rule reaches it
        let res = run_bp(&g, &TIGHT);
        let exact = exact_marginals(&g).unwrap();
        for v in [a, b] {
            close(res.marginal(v), exact[v.0].probs(), 1e-6);
        }
    }

    #[test]
    fn factorless_variable_is_uniform() {
        let mut g = FactorGraph::new();
        let v = g.add_variable("lonely");
        let res = run_bp(&g, &BpConfig::default());
        close(res.marginal(v), [1.0 / 3.0; 3], 1e-12);
        assert!(res.converged);
    }

    #[test]
    fn undamped_matches_manual_flooding() {
        // with damping 0 a two-node chain settles after three iterations
        let mut g = FactorGraph::new();
        let a = g.add_variable("a");
        let b = g.add_variable("b");
        g.add_factor(FactorKind::Seed, &[a], PotentialTable::unary([0.6, 0.3, 0.1]).unwrap())
            .unwrap();
        g.add_factor(FactorKind::SelPref, &[a, b], PotentialTable::binary(SOFT_ONE).unwrap())
            .unwrap();
        let cfg = BpConfig {
            damping: 0.0,
            ..BpConfig::default()
        };
        let res = run_bp(&g, &cfg);
        assert!(res.converged);
        assert!(res.iterations <= 4);
        let want = Belief::normalized(enumerate_binary(SOFT_ONE, [0.6, 0.3, 0.1]));
        close(res.marginal(b), want.probs(), 1e-12);
    }

    #[test]
    fn large_star_stays_finite() {
        let mut g = FactorGraph::new();
        let hub = g.add_variable("hub");
        let strong = PotentialTable::unary([0.98, 0.01, 0.01]).unwrap();
        for i in 0..10_000 {
            let leaf = g.add_variable(format!("leaf{i}"));
            g.add_factor(FactorKind::Seed, &[leaf], strong).unwrap();
            g.add_factor(FactorKind::SelPref, &[leaf, hub], PotentialTable::binary(SOFT_ONE).unwrap())
                .unwrap();
        }
        let res = run_bp(&g, &BpConfig::default());
        for m in &res.marginals {
            let p = m.probs();
            assert!(p.iter().all(|x| x.is_finite() && *x > 0.0 && *x < 1.0), "{p:?}");
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(res.marginal(hub).argmax(), crate::domain::RelationValue::Gt);
    }

    #[test]
    fn deterministic() {
        let mut g = FactorGraph::new();
        let vs: Vec<_> = (0..4).map(|i| g.add_variable(format!("v{i}"))).collect();
        g.add_factor(FactorKind::Seed, &[vs[0]], PotentialTable::unary([0.2, 0.1, 0.7]).unwrap())
            .unwrap();
        for i in 0..4 {
            g.add_factor(
                FactorKind::ObjSim,
                &[vs[i], vs[(i + 1) % 4]],
                PotentialTable::binary(SOFT_ONE).unwrap(),
            )
            .unwrap();
        }
        let r1 = run_bp(&g, &BpConfig::default());
        let r2 = run_bp(&g, &BpConfig::default());
        assert_eq!(r1, r2);
    }
}
