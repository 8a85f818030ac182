use crate::scm::DistTable;
use crate::{Error, Real, Result};

/// Integer counts over the product space of named discrete variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointCounts {
    variables: Vec<String>,
    cards: Vec<usize>,
    counts: Vec<u64>,
    total: u64,
}

impl JointCounts {
    pub fn new(variables: &[&str], cards: &[usize]) -> Result<Self> {
        if variables.len() != cards.len() || cards.iter().any(|&c| c == 0) {
            return Err(Error::InvalidArgument("one positive cardinality per variable".into()));
        }
        Ok(Self {
            variables: variables.iter().map(|s| s.to_string()).collect(),
            cards: cards.to_vec(),
            counts: vec![0; cards.iter().product()],
            total: 0,
        })
    }

    fn offset(&self, values: &[usize]) -> usize {
        values.iter().zip(&self.cards).fold(0, |acc, (&v, &c)| {
            assert!(v < c, "value {v} outside cardinality {c}");
            acc * c + v
        })
    }

    pub fn add(&mut self, values: &[usize]) {
        self.add_weighted(values, 1);
    }

    pub fn add_weighted(&mut self, values: &[usize], n: u64) {
        let o = self.offset(values);
        self.counts[o] += n;
        self.total += n;
    }

    pub fn count(&self, values: &[usize]) -> u64 {
        self.counts[self.offset(values)]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Maximum-likelihood table.
    pub fn to_table<T: Real>(&self) -> Result<DistTable<T>> {
        if self.total == 0 {
            return Err(Error::InvalidArgument("no observations".into()));
        }
        DistTable::from_weights(
            self.variables.clone(),
            self.cards.clone(),
            self.counts.iter().map(|&c| T::of(c as f64)).collect(),
        )
    }
}
