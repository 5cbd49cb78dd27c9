use std::cmp::Ordering;
use std::collections::HashSet;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredItem {
    pub id: String,
    pub score: f64,
}

/// Ranking order: score descending, then id ascending.
pub fn rank_order(a_id: &str, a_score: f64, b_id: &str, b_score: f64) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

/// A ranked list with unique ids, sorted by [`rank_order`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoredList {
    items: Vec<ScoredItem>,
}

impl ScoredList {
    /// Sorts arbitrary `(id, score)` pairs; duplicate ids are an error.
    pub fn from_scores<I, S>(scores: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let items: Vec<ScoredItem> = scores
            .into_iter()
            .map(|(id, score)| ScoredItem {
                id: id.into(),
                score,
            })
            .collect();
        let mut seen = HashSet::with_capacity(items.len());
        for item in &items {
            if !seen.insert(item.id.as_str()) {
                return Err(Error::InvalidData(format!("duplicate id `{}` in ranking", item.id)));
            }
        }
        Ok(Self::sorted(items))
    }

    pub(crate) fn sorted(mut items: Vec<ScoredItem>) -> Self {
        items.sort_by(|a, b| rank_order(&a.id, a.score, &b.id, b.score));
        ScoredList { items }
    }

    pub fn items(&self) -> &[ScoredItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.id.as_str())
    }

    pub fn score_of(&self, id: &str) -> Option<f64> {
        self.items.iter().find(|i| i.id == id).map(|i| i.score)
    }

    pub fn truncate(&mut self, k: usize) {
        self.items.truncate(k);
    }

    pub fn into_items(self) -> Vec<ScoredItem> {
        self.items
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_break_by_id() {
        let l = ScoredList::from_scores([("b", 1.0), ("c", 2.0), ("a", 1.0)]).unwrap();
        assert_eq!(l.ids().collect::<Vec<_>>(), vec!["c", "a", "b"]);
    }

    #[test]
    fn duplicates_rejected() {
        assert!(ScoredList::from_scores([("a", 1.0), ("a", 2.0)]).is_err());
    }
}
