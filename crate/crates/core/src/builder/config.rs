use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BuildError;
use crate::domain::NodeClass;
use crate::factorgraph::FactorKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub verb_sim_threshold: f64,
    pub obj_sim_threshold: f64,
    pub pmi_threshold: f64,
    pub attr_agreement_threshold: f64,
    /// Attribute pairs sharing fewer seed frames than this are never linked.
    pub attr_min_shared_frames: usize,
    pub enabled_kinds: BTreeSet<FactorKind>,
    /// Node classes that receive seed factors.
    pub seed_classes: BTreeSet<NodeClass>,
    /// Node classes that receive embedding-classifier factors.
    pub emb_classes: BTreeSet<NodeClass>,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            verb_sim_threshold: 0.55,
            obj_sim_threshold: 0.70,
            pmi_threshold: 0.0,
            attr_agreement_threshold: 0.95,
            attr_min_shared_frames: 10,
            enabled_kinds: [
                FactorKind::Seed,
                FactorKind::Emb,
                FactorKind::SelPref,
                FactorKind::VerbSim,
                FactorKind::ObjSim,
            ]
            .into(),
            seed_classes: [NodeClass::Frame, NodeClass::ObjectPair].into(),
            emb_classes: [NodeClass::Frame, NodeClass::ObjectPair].into(),
        }
    }
}

fn join<T: std::fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    let v: Vec<String> = items.into_iter().map(|i| i.to_string()).collect();
    if v.is_empty() {
        "none".into()
    } else {
        v.join(",")
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty() && *s != "none")
}

impl BuildConfig {
    pub fn all_kinds() -> Self {
        BuildConfig {
            enabled_kinds: FactorKind::ALL.into(),
            ..Self::default()
        }
    }

    pub fn enables(&self, kind: FactorKind) -> bool {
        self.enabled_kinds.contains(&kind)
    }

    pub fn validate(&self) -> Result<(), BuildError> {
        for (name, v) in [
            ("verb_sim_threshold", self.verb_sim_threshold),
            ("obj_sim_threshold", self.obj_sim_threshold),
            ("pmi_threshold", self.pmi_threshold),
            ("attr_agreement_threshold", self.attr_agreement_threshold),
        ] {
            if !v.is_finite() {
                return Err(BuildError::Config(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Flat `key=value` form, one per line, in a fixed key order.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "verb_sim_threshold={:?}", self.verb_sim_threshold);
        let _ = writeln!(s, "obj_sim_threshold={:?}", self.obj_sim_threshold);
        let _ = writeln!(s, "pmi_threshold={:?}", self.pmi_threshold);
        let _ = writeln!(s, "attr_agreement_threshold={:?}", self.attr_agreement_threshold);
        let _ = writeln!(s, "attr_min_shared_frames={}", self.attr_min_shared_frames);
        let _ = writeln!(s, "enabled_kinds={}", join(&self.enabled_kinds));
        let _ = writeln!(s, "seed_classes={}", join(&self.seed_classes));
        let _ = writeln!(s, "emb_classes={}", join(&self.emb_classes));
        s
    }

    /// Parses `key=value` lines on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, BuildError> {
        let mut cfg = BuildConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| BuildError::Config(format!("line {}: {msg}", i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let real = || value.parse::<f64>().map_err(|_| bad(format!("`{value}` is not a number")));
            match key {
                "verb_sim_threshold" => cfg.verb_sim_threshold = real()?,
                "obj_sim_threshold" => cfg.obj_sim_threshold = real()?,
                "pmi_threshold" => cfg.pmi_threshold = real()?,
                "attr_agreement_threshold" => cfg.attr_agreement_threshold = real()?,
                "attr_min_shared_frames" => {
                    cfg.attr_min_shared_frames = value.parse().map_err(|_| bad(format!("bad count `{value}`")))?
                }
                "enabled_kinds" => {
                    cfg.enabled_kinds = split_list(value)
                        .map(|k| k.parse::<FactorKind>().map_err(|e| bad(e.to_string())))
                        .collect::<Result<_, _>>()?
                }
                "seed_classes" | "emb_classes" => {
                    let set = split_list(value)
                        .map(|k| k.parse::<NodeClass>().map_err(|_| bad(format!("unknown node class `{k}`"))))
                        .collect::<Result<_, _>>()?;
                    if key == "seed_classes" {
                        cfg.seed_classes = set;
                    } else {
                        cfg.emb_classes = set;
                    }
                }
                _ => return Err(bad(format!("unknown key `{key}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BuildError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BuildError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let mut cfg = BuildConfig::all_kinds();
        cfg.pmi_threshold = 1.25;
        cfg.emb_classes.remove(&NodeClass::Frame);
        let back = BuildConfig::parse(&cfg.to_kv_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = BuildConfig::parse("# tuned\npmi_threshold = 0.5\nenabled_kinds=seed, emb\n").unwrap();
        assert_eq!(cfg.pmi_threshold, 0.5);
        assert_eq!(cfg.verb_sim_threshold, BuildConfig::default().verb_sim_threshold);
        assert_eq!(cfg.enabled_kinds, [FactorKind::Seed, FactorKind::Emb].into());
        let none = BuildConfig::parse("enabled_kinds=none\n").unwrap();
        assert!(none.enabled_kinds.is_empty());
    }

    #[test]
    fn rejects_bad_lines() {
        for text in ["pmi_threshold=abc", "colour=red", "enabled_kinds=seed,magic", "nonsense", "pmi_threshold=inf"] {
            assert!(BuildConfig::parse(text).is_err(), "{text}");
        }
    }
}
