use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Interaction};

/// Feature tokens seen in training, one index per `(field, value)` pair.
///
/// Indices `0..fields.len()` are the per-field unknown tokens used for
/// values never seen in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub fields: Vec<String>,
    /// `(field index, value)` for every known token, indexed by
    /// `token - fields.len()`.
    pub tokens: Vec<(usize, String)>,
    #[serde(skip)]
    index: HashMap<(usize, String), usize>,
}

fn field_values(row: &Interaction) -> impl Iterator<Item = &str> {
    [row.user_id.as_str(), row.item_id.as_str()]
        .into_iter()
        .chain(row.features.iter().map(|(_, v)| v.as_str()))
        .chain(row.feedback_flags.iter().map(|(_, b)| if *b { "1" } else { "0" }))
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.fields.len() + self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn unknown(&self, field: usize) -> usize {
        field
    }

    /// One token per field, in field order.
    pub fn encode(&self, row: &Interaction) -> Vec<usize> {
        field_values(row)
            .enumerate()
            .take(self.fields.len())
            .map(|(f, v)| {
                self.index
                    .get(&(f, v.to_string()))
                    .copied()
                    .unwrap_or_else(|| self.unknown(f))
            })
            .collect()
    }

    pub(crate) fn rebuild_index(&mut self) {
        let offset = self.fields.len();
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, key)| (key.clone(), offset + i))
            .collect();
    }
}

/// Tokens are numbered in order of first appearance.
pub fn build_vocab(train: &Dataset) -> Vocabulary {
    let mut fields = vec!["user_id".to_string(), "item_id".to_string()];
    fields.extend(train.schema.features.iter().cloned());
    fields.extend(train.schema.flags.iter().cloned());
    let offset = fields.len();
    let mut vocab = Vocabulary {
        fields,
        tokens: Vec::new(),
        index: HashMap::new(),
    };
    for row in &train.rows {
        for (f, v) in field_values(row).enumerate() {
            let key = (f, v.to_string());
            if !vocab.index.contains_key(&key) {
                vocab.index.insert(key.clone(), offset + vocab.tokens.len());
                vocab.tokens.push(key);
            }
        }
    }
    vocab
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureSchema;

    fn two_field_dataset() -> Dataset {
        let rows = (0..3)
            .map(|i| Interaction::new(format!("u{i}"), format!("i{i}"), 1.0, 10))
            .collect();
        Dataset::new(FeatureSchema::default(), rows)
    }

    #[test]
    fn counts_tokens_and_unknowns() {
        let vocab = build_vocab(&two_field_dataset());
        assert_eq!(vocab.tokens.len(), 6);
        assert_eq!(vocab.len(), 8);
    }

    #[test]
    fn unseen_values_map_to_unknown() {
        let vocab = build_vocab(&two_field_dataset());
        let tokens = vocab.encode(&Interaction::new("u1", "new", 1.0, 10));
        assert_eq!(tokens[1], vocab.unknown(1));
        assert_ne!(tokens[0], vocab.unknown(0));
    }

    #[test]
    fn empty_value_is_a_token() {
        let mut ds = two_field_dataset();
        ds.schema.features.push("tab".into());
        for r in &mut ds.rows {
            r.features.push(("tab".into(), String::new()));
        }
        let vocab = build_vocab(&ds);
        let t = vocab.encode(&ds.rows[0]);
        assert_ne!(t[2], vocab.unknown(2));
        assert_eq!(vocab.tokens.len(), 7);
    }
}
