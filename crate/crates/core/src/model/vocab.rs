use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::convert::SenseTable;
use crate::graph::{RelationSequence, ROOT_RELATION};

use super::EncoderInput;

/// End-of-sequence id in the node-label vocabulary.
pub const EOS: usize = 0;
/// Unknown-label id in the node-label and encoder vocabularies.
pub const UNK: usize = 1;

/// String to dense id, with an optional fallback for unseen strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabData", into = "VocabData")]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
    unk: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabData {
    items: Vec<String>,
    unk: Option<usize>,
}

impl From<VocabData> for Vocab {
    fn from(d: VocabData) -> Self {
        let mut v = Vocab::new(None);
        for item in d.items {
            v.push(item);
        }
        v.unk = d.unk;
        v
    }
}

impl From<Vocab> for VocabData {
    fn from(v: Vocab) -> Self {
        VocabData {
            items: v.items,
            unk: v.unk,
        }
    }
}

impl Vocab {
    fn new(unk: Option<usize>) -> Self {
        Vocab {
            items: Vec::new(),
            index: HashMap::new(),
            unk,
        }
    }

    /// Vocabulary starting with `specials`; the special at `unk` (if any)
    /// absorbs unseen strings.
    pub fn with_specials(specials: &[&str], unk: Option<usize>) -> Self {
        let mut v = Vocab::new(unk);
        for s in specials {
            v.push((*s).to_string());
        }
        v
    }

    /// Adds `counts` ordered by descending count then string, keeping at
    /// most `max` entries overall when given.
    pub fn extend_by_count(&mut self, counts: &HashMap<String, usize>, max: Option<usize>) {
        let mut sorted: Vec<(&String, &usize)> = counts.iter().collect();
        sorted.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        for (s, _) in sorted {
            if max.is_some_and(|m| self.items.len() >= m) {
                break;
            }
            self.push(s.clone());
        }
    }

    pub fn push(&mut self, s: String) -> usize {
        if let Some(&i) = self.index.get(&s) {
            return i;
        }
        self.index.insert(s.clone(), self.items.len());
        self.items.push(s);
        self.items.len() - 1
    }

    pub fn get(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Id of `s`, or the unknown id. Vocabularies without one fall back to 0.
    pub fn id(&self, s: &str) -> usize {
        self.get(s).or(self.unk).unwrap_or(0)
    }

    pub fn item(&self, i: usize) -> &str {
        &self.items[i]
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Every vocabulary a model needs, built from training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabularies {
    pub words: Vocab,
    /// Shared by encoder and decoder character CNNs; id 0 pads, id 1 is
    /// unknown.
    pub chars: Vocab,
    pub pos: Vocab,
    pub features: BTreeMap<String, Vocab>,
    /// Decoder node labels; [`EOS`] and [`UNK`] come first.
    pub labels: Vocab,
    /// Relation types; `root` is id 0 and is never predicted.
    pub relations: Vocab,
    #[serde(default)]
    pub senses: SenseTable,
}

impl Vocabularies {
    /// Builds vocabularies from inputs and reference sequences. Label and
    /// word vocabularies keep at most `max_labels` / `max_words` entries.
    pub fn build<'a>(
        data: impl IntoIterator<Item = (&'a EncoderInput, &'a RelationSequence)>,
        max_words: Option<usize>,
        max_labels: Option<usize>,
    ) -> Self {
        let mut words = HashMap::new();
        let mut chars = HashMap::new();
        let mut pos = HashMap::new();
        let mut features: BTreeMap<String, HashMap<String, usize>> = BTreeMap::new();
        let mut labels = HashMap::new();
        let mut relations = HashMap::new();
        let mut count_chars = |s: &str| {
            for c in s.chars() {
                *chars.entry(c.to_string()).or_insert(0) += 1;
            }
        };
        for (input, seq) in data {
            for w in &input.tokens {
                *words.entry(w.clone()).or_insert(0) += 1;
                count_chars(w);
            }
            for p in &input.pos {
                *pos.entry(p.clone()).or_insert(0) += 1;
            }
            for (name, col) in &input.features {
                let m = features.entry(name.clone()).or_default();
                for v in col {
                    *m.entry(v.clone()).or_insert(0) += 1;
                    count_chars(v);
                }
            }
            for r in &seq.relations {
                *labels.entry(r.target_label.clone()).or_insert(0) += 1;
                count_chars(&r.target_label);
                if !r.is_root() {
                    *relations.entry(r.relation.clone()).or_insert(0) += 1;
                }
            }
        }
        let mut v = Vocabularies::empty();
        v.words.extend_by_count(&words, max_words);
        v.chars.extend_by_count(&chars, None);
        v.pos.extend_by_count(&pos, None);
        for (name, counts) in features {
            let mut f = Vocab::with_specials(&["<unk>"], Some(0));
            f.extend_by_count(&counts, None);
            v.features.insert(name, f);
        }
        v.labels.extend_by_count(&labels, max_labels);
        v.relations.extend_by_count(&relations, None);
        v
    }

    /// Vocabularies holding only the reserved entries.
    pub fn empty() -> Self {
        Vocabularies {
            words: Vocab::with_specials(&["<unk>"], Some(0)),
            chars: Vocab::with_specials(&["<pad>", "<unk>"], Some(1)),
            pos: Vocab::with_specials(&["<unk>"], Some(0)),
            features: BTreeMap::new(),
            labels: Vocab::with_specials(&["<eos>", "<unk>"], Some(UNK)),
            relations: Vocab::with_specials(&[ROOT_RELATION], None),
            senses: SenseTable::default(),
        }
    }

    pub fn char_ids(&self, s: &str) -> Vec<usize> {
        let mut buf = [0u8; 4];
        s.chars().map(|c| self.chars.id(c.encode_utf8(&mut buf))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_order_and_round_trip() {
        let mut v = Vocab::with_specials(&["<eos>", "<unk>"], Some(1));
        let counts: HashMap<String, usize> = [("b", 2), ("a", 2), ("c", 5)]
            .into_iter()
            .map(|(k, n)| (k.to_string(), n))
            .collect();
        v.extend_by_count(&counts, Some(4));
        assert_eq!(v.items(), ["<eos>", "<unk>", "c", "a"]);
        assert_eq!(v.id("zzz"), 1);
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.id("a"), 3);
    }
}
