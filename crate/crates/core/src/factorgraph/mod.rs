//! Discrete factor graphs over three-valued variables, with loopy
//! sum-product belief propagation and a brute-force oracle for small graphs.

mod bp;
mod dump;
mod exact;

pub use bp::{message_factor_to_var, message_var_to_factor, run_bp, BpConfig, BpResult, Messages, Schedule};
pub use dump::{read_dump, write_dump};
pub use exact::{exact_marginals, EXACT_VARIABLE_CAP};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("factor scope has {scope} variables but its table has arity {arity}")]
    ScopeArity { scope: usize, arity: usize },
    #[error("variable {0} does not exist")]
    UnknownVariable(usize),
    #[error("binary factor connects variable {0} to itself")]
    SelfLoop(usize),
    #[error("potential entries must be finite and strictly positive, got {0}")]
    NonPositivePotential(f64),
    #[error("exact enumeration supports at most {cap} variables, graph has {n}")]
    TooLarge { n: usize, cap: usize },
    #[error("unknown factor kind `{0}`")]
    UnknownKind(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactorId(pub usize);

/// Factor family tags. They partition all factors so ablations can switch
/// one family off at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FactorKind {
    Seed,
    Emb,
    SelPref,
    VerbSim,
    FrameSim,
    ObjSim,
    AttrSim,
}

impl FactorKind {
    pub const ALL: [FactorKind; 7] = [
        FactorKind::Seed,
        FactorKind::Emb,
        FactorKind::SelPref,
        FactorKind::VerbSim,
        FactorKind::FrameSim,
        FactorKind::ObjSim,
        FactorKind::AttrSim,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            FactorKind::Seed => "seed",
            FactorKind::Emb => "emb",
            FactorKind::SelPref => "selpref",
            FactorKind::VerbSim => "verbsim",
            FactorKind::FrameSim => "framesim",
            FactorKind::ObjSim => "objsim",
            FactorKind::AttrSim => "attrsim",
        }
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FactorKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FactorKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| GraphError::UnknownKind(s.to_string()))
    }
}

/// Nonnegative factor potential. Rows of a binary table are indexed by the
/// first scope variable, columns by the second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialTable {
    Unary([f64; 3]),
    Binary([[f64; 3]; 3]),
}

impl PotentialTable {
    pub fn unary(values: [f64; 3]) -> Result<Self, GraphError> {
        check_positive(values.iter())?;
        Ok(PotentialTable::Unary(values))
    }

    pub fn binary(values: [[f64; 3]; 3]) -> Result<Self, GraphError> {
        check_positive(values.iter().flatten())?;
        Ok(PotentialTable::Binary(values))
    }

    pub fn arity(&self) -> usize {
        match self {
            PotentialTable::Unary(_) => 1,
            PotentialTable::Binary(_) => 2,
        }
    }

    pub fn entries(&self) -> Vec<f64> {
        match self {
            PotentialTable::Unary(v) => v.to_vec(),
            PotentialTable::Binary(m) => m.iter().flatten().copied().collect(),
        }
    }

    /// Value at an assignment of the scope, in scope order.
    pub fn value(&self, assignment: &[usize]) -> f64 {
        match (self, assignment) {
            (PotentialTable::Unary(v), [a]) => v[*a],
            (PotentialTable::Binary(m), [a, b]) => m[*a][*b],
            _ => panic!("assignment length does not match table arity"),
        }
    }
}

fn check_positive<'a>(mut it: impl Iterator<Item = &'a f64>) -> Result<(), GraphError> {
    match it.find(|v| !(v.is_finite() && **v > 0.0)) {
        Some(v) => Err(GraphError::NonPositivePotential(*v)),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub id: VarId,
    /// Display key of the node this variable stands for.
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub id: FactorId,
    pub scope: Vec<VarId>,
    pub table: PotentialTable,
    pub kind: FactorKind,
}

/// One (factor, scope slot) incidence. Messages live on edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Edge {
    pub var: VarId,
    pub factor: FactorId,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FactorGraph {
    variables: Vec<Variable>,
    factors: Vec<Factor>,
    edges: Vec<Edge>,
    var_edges: Vec<Vec<usize>>,
    factor_edges: Vec<Vec<usize>>,
}

impl FactorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>) -> VarId {
        let id = VarId(self.variables.len());
        self.variables.push(Variable { id, name: name.into() });
        self.var_edges.push(Vec::new());
        id
    }

    pub fn add_factor(
        &mut self,
        kind: FactorKind,
        scope: &[VarId],
        table: PotentialTable,
    ) -> Result<FactorId, GraphError> {
        if scope.len() != table.arity() {
            return Err(GraphError::ScopeArity {
                scope: scope.len(),
                arity: table.arity(),
            });
        }
        if let Some(v) = scope.iter().find(|v| v.0 >= self.variables.len()) {
            return Err(GraphError::UnknownVariable(v.0));
        }
        if scope.len() == 2 && scope[0] == scope[1] {
            return Err(GraphError::SelfLoop(scope[0].0));
        }
        check_positive(table.entries().iter())?;

        let id = FactorId(self.factors.len());
        let mut slots = Vec::with_capacity(scope.len());
        for &var in scope {
            let e = self.edges.len();
            self.edges.push(Edge { var, factor: id });
            self.var_edges[var.0].push(e);
            slots.push(e);
        }
        self.factor_edges.push(slots);
        self.factors.push(Factor {
            id,
            scope: scope.to_vec(),
            table,
            kind,
        });
        Ok(id)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn variable(&self, v: VarId) -> &Variable {
        &self.variables[v.0]
    }

    pub fn factor(&self, f: FactorId) -> &Factor {
        &self.factors[f.0]
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    /// Factors adjacent to `v`, in insertion order.
    pub fn neighbors(&self, v: VarId) -> impl Iterator<Item = FactorId> + '_ {
        self.var_edges[v.0].iter().map(|&e| self.edges[e].factor)
    }

    pub fn count_kind(&self, kind: FactorKind) -> usize {
        self.factors.iter().filter(|f| f.kind == kind).count()
    }

    /// True when the factor graph (as a bipartite graph) has no cycles.
    pub fn is_forest(&self) -> bool {
        // bipartite nodes: variables then factors; a forest has |E| = |V| - components
        let n = self.variables.len() + self.factors.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for e in &self.edges {
            let a = find(&mut parent, e.var.0);
            let b = find(&mut parent, self.variables.len() + e.factor.0);
            if a == b {
                return false;
            }
            parent[a] = b;
        }
        true
    }

    pub(crate) fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub(crate) fn var_edges(&self, v: VarId) -> &[usize] {
        &self.var_edges[v.0]
    }

    pub(crate) fn factor_edges(&self, f: FactorId) -> &[usize] {
        &self.factor_edges[f.0]
    }

    pub(crate) fn edge_index(&self, f: FactorId, v: VarId) -> Option<usize> {
        self.factor_edges[f.0]
            .iter()
            .copied()
            .find(|&e| self.edges[e].var == v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_factors() {
        let mut g = FactorGraph::new();
        let a = g.add_variable("a");
        let b = g.add_variable("b");
        let unit = PotentialTable::unary([1.0; 3]).unwrap();
        assert!(matches!(
            g.add_factor(FactorKind::Seed, &[a, b], unit),
            Err(GraphError::ScopeArity { .. })
        ));
        assert!(matches!(
            g.add_factor(FactorKind::Seed, &[VarId(7)], unit),
            Err(GraphError::UnknownVariable(7))
        ));
        let pair = PotentialTable::binary([[1.0; 3]; 3]).unwrap();
        assert!(matches!(
            g.add_factor(FactorKind::ObjSim, &[a, a], pair),
            Err(GraphError::SelfLoop(_))
        ));
        assert!(PotentialTable::unary([0.0, 1.0, 1.0]).is_err());
        assert!(PotentialTable::unary([f64::NAN, 1.0, 1.0]).is_err());
        g.add_factor(FactorKind::ObjSim, &[a, b], pair).unwrap();
        assert_eq!(g.neighbors(a).count(), 1);
        assert_eq!(g.count_kind(FactorKind::ObjSim), 1);
    }

    #[test]
    fn kind_tags_round_trip() {
        for k in FactorKind::ALL {
            assert_eq!(k.tag().parse::<FactorKind>().unwrap(), k);
        }
        assert!("nope".parse::<FactorKind>().is_err());
    }

    #[test]
    fn forest_detection() {
        let mut g = FactorGraph::new();
        let vs: Vec<_> = (0..3).map(|i| g.add_variable(format!("v{i}"))).collect();
        let t = PotentialTable::binary([[1.0; 3]; 3]).unwrap();
        g.add_factor(FactorKind::ObjSim, &[vs[0], vs[1]], t).unwrap();
        g.add_factor(FactorKind::ObjSim, &[vs[1], vs[2]], t).unwrap();
        assert!(g.is_forest());
        g.add_factor(FactorKind::ObjSim, &[vs[2], vs[0]], t).unwrap();
        assert!(!g.is_forest());
    }
}
