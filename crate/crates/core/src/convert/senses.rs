//! AMR sense suffixes (`-01`, `-02`, ...) are stripped before training and
//! restored after prediction from corpus frequencies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::SemanticGraph;

/// Splits `want-01` into (`want`, `01`). The suffix is exactly two digits
/// after a hyphen and the lemma is non-empty.
pub fn split_sense(label: &str) -> Option<(&str, &str)> {
    let (lemma, suffix) = label.rsplit_once('-')?;
    (!lemma.is_empty() && suffix.len() == 2 && suffix.bytes().all(|b| b.is_ascii_digit()))
        .then_some((lemma, suffix))
}

/// Lemma to the frequency of each original label seen with it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenseTable {
    counts: BTreeMap<String, BTreeMap<String, u64>>,
}

impl SenseTable {
    /// Counts `label` under its lemma. Labels without a suffix count under
    /// themselves, so a lemma usually seen bare is restored bare.
    pub fn record(&mut self, label: &str) {
        let lemma = split_sense(label).map_or(label, |(l, _)| l);
        *self
            .counts
            .entry(lemma.to_string())
            .or_default()
            .entry(label.to_string())
            .or_default() += 1;
    }

    /// Most frequent original label for `lemma`; ties go to the
    /// lexicographically smallest.
    pub fn most_frequent(&self, lemma: &str) -> Option<&str> {
        let forms = self.counts.get(lemma)?;
        let mut best: Option<(&str, u64)> = None;
        for (form, &n) in forms {
            if best.map_or(true, |(_, b)| n > b) {
                best = Some((form, n));
            }
        }
        best.map(|(f, _)| f)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Restored form of a stripped label.
    pub fn restore(&self, label: &str) -> String {
        if let Some(form) = self.most_frequent(label) {
            return form.to_string();
        }
        if looks_predicative(label) {
            format!("{label}-01")
        } else {
            label.to_string()
        }
    }
}

/// Unseen labels receive `-01` only when they look like a lemma: lowercase
/// letters with optional inner hyphens. Quoted strings, numbers and special
/// symbols pass through.
fn looks_predicative(label: &str) -> bool {
    let mut chars = label.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && label.chars().all(|c| c.is_ascii_lowercase() || c == '-')
        && !label.ends_with('-')
        && split_sense(label).is_none()
}

/// Removes sense suffixes from every node label, recording the originals.
pub fn strip_senses(g: &SemanticGraph, table: &mut SenseTable) -> SemanticGraph {
    let mut out = g.clone();
    for n in &mut out.nodes {
        table.record(&n.label);
        if let Some((lemma, _)) = split_sense(&n.label) {
            n.label = lemma.to_string();
        }
    }
    out
}

/// Re-attaches sense suffixes using the table's most frequent forms.
pub fn restore_senses(g: &SemanticGraph, table: &SenseTable) -> SemanticGraph {
    let mut out = g.clone();
    for n in &mut out.nodes {
        n.label = table.restore(&n.label);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Framework, GraphNode};

    #[test]
    fn splits_only_two_digit_suffixes() {
        assert_eq!(split_sense("want-01"), Some(("want", "01")));
        assert_eq!(split_sense("look-up-05"), Some(("look-up", "05")));
        assert_eq!(split_sense("-01"), None);
        assert_eq!(split_sense("want-1"), None);
        assert_eq!(split_sense("boy"), None);
    }

    #[test]
    fn restore_prefers_frequent_then_smallest() {
        let mut t = SenseTable::default();
        for l in ["run-02", "run-01", "run-02", "go-03", "go-01"] {
            t.record(l);
        }
        assert_eq!(t.restore("run"), "run-02");
        assert_eq!(t.restore("go"), "go-01");
        assert_eq!(t.restore("walk"), "walk-01");
        assert_eq!(t.restore("\"Paris\""), "\"Paris\"");
        assert_eq!(t.restore("42"), "42");
        assert_eq!(t.restore("-"), "-");
    }

    #[test]
    fn strip_then_restore_with_own_table() {
        let mut g = SemanticGraph::new(Framework::Amr);
        g.nodes.push(GraphNode::new("w", "want-01"));
        g.nodes.push(GraphNode::new("b", "boy"));
        g.tops.push("w".into());
        let mut t = SenseTable::default();
        let s = strip_senses(&g, &mut t);
        assert_eq!(s.nodes[0].label, "want");
        let r = restore_senses(&s, &t);
        assert_eq!(r, g);
    }
}
