//! Joint inference of relative physical knowledge.
//!
//! Object-pair relations ("a person is larger than a basketball") and the
//! implications of verb frames ("x threw y implies x is larger than y") are
//! modelled as three-valued random variables in one factor graph, seeded by
//! a small labeled set and embedding classifiers, and solved with loopy
//! belief propagation.

pub mod builder;
pub mod domain;
pub mod factorgraph;
pub mod harness;
pub mod lexstats;
pub mod maxent;

pub use domain::{Attribute, Belief, Frame, FrameType, NodeClass, NodeRef, ObjectPair, RelationValue};
