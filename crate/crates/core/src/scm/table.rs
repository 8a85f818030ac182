use crate::{Error, Real, Result};

/// A dense probability table over named discrete variables.
///
/// Cells are stored row-major: the last variable varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DistTable<T: Real> {
    variables: Vec<String>,
    cards: Vec<usize>,
    probs: Vec<T>,
}

impl<T: Real> DistTable<T> {
    /// Build a table, checking shape, non-negativity and total mass.
    pub fn new(variables: Vec<String>, cards: Vec<usize>, probs: Vec<T>) -> Result<Self> {
        let t = Self::new_unchecked(variables, cards, probs)?;
        if t.probs.iter().any(|p| !(*p >= T::zero())) {
            return Err(Error::InvalidArgument("negative or NaN probability".into()));
        }
        let total = t.total().as_f64();
        if (total - 1.0).abs() > T::MASS_TOL {
            return Err(Error::InvalidArgument(format!("table mass {total} is not 1")));
        }
        Ok(t)
    }

    fn new_unchecked(variables: Vec<String>, cards: Vec<usize>, probs: Vec<T>) -> Result<Self> {
        if variables.len() != cards.len() {
            return Err(Error::InvalidArgument("one cardinality per variable".into()));
        }
        if cards.iter().any(|&c| c == 0) {
            return Err(Error::InvalidArgument("zero cardinality".into()));
        }
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].contains(v) {
                return Err(Error::InvalidArgument(format!("variable `{v}` repeated")));
            }
        }
        let size: usize = cards.iter().product();
        if probs.len() != size {
            return Err(Error::Dimension { expected: size, got: probs.len() });
        }
        Ok(Self { variables, cards, probs })
    }

    /// Normalize non-negative weights (for example counts) into a table.
    pub fn from_weights(variables: Vec<String>, cards: Vec<usize>, weights: Vec<T>) -> Result<Self> {
        let mut t = Self::new_unchecked(variables, cards, weights)?;
        let total = t.total();
        if !(total > T::zero()) {
            return Err(Error::InvalidArgument("weights have no mass".into()));
        }
        for p in &mut t.probs {
            *p /= total;
        }
        Ok(t)
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn total(&self) -> T {
        self.probs.iter().copied().sum()
    }

    pub fn position(&self, var: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == var)
            .ok_or_else(|| Error::UnknownNode(var.to_string()))
    }

    /// Flat index of a full assignment, in variable order.
    pub fn offset(&self, values: &[usize]) -> usize {
        debug_assert_eq!(values.len(), self.cards.len());
        values.iter().zip(&self.cards).fold(0, |acc, (&v, &c)| {
            debug_assert!(v < c);
            acc * c + v
        })
    }

    pub fn get(&self, values: &[usize]) -> T {
        self.probs[self.offset(values)]
    }

    /// Iterate `(assignment, probability)` over all cells.
    pub fn cells(&self) -> impl Iterator<Item = (Vec<usize>, T)> + '_ {
        let mut idx = vec![0usize; self.cards.len()];
        let mut first = true;
        self.probs.iter().map(move |&p| {
            if !first {
                for d in (0..idx.len()).rev() {
                    idx[d] += 1;
                    if idx[d] < self.cards[d] {
                        break;
                    }
                    idx[d] = 0;
                }
            }
            first = false;
            (idx.clone(), p)
        })
    }

    /// Marginal over `vars`, in the order given.
    pub fn marginal(&self, vars: &[&str]) -> Result<Self> {
        let pos = vars.iter().map(|v| self.position(v)).collect::<Result<Vec<_>>>()?;
        let cards: Vec<usize> = pos.iter().map(|&p| self.cards[p]).collect();
        let mut out = vec![T::zero(); cards.iter().product()];
        for (cell, p) in self.cells() {
            let o = pos.iter().zip(&cards).fold(0, |acc, (&q, &c)| acc * c + cell[q]);
            out[o] += p;
        }
        Self::new_unchecked(vars.iter().map(|s| s.to_string()).collect(), cards, out)
    }

    /// Same table with variables renamed positionally.
    pub fn renamed(mut self, names: &[&str]) -> Result<Self> {
        if names.len() != self.variables.len() {
            return Err(Error::InvalidArgument("one name per variable".into()));
        }
        self.variables = names.iter().map(|s| s.to_string()).collect();
        Self::new_unchecked(self.variables, self.cards, self.probs)
    }

    pub fn cast<U: Real>(&self) -> DistTable<U> {
        DistTable {
            variables: self.variables.clone(),
            cards: self.cards.clone(),
            probs: self.probs.iter().map(|p| U::of(p.as_f64())).collect(),
        }
    }

    /// Largest absolute cell difference to a table of the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.cards != other.cards {
            return Err(Error::InvalidArgument("tables differ in shape".into()));
        }
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
            .fold(0.0, f64::max))
    }

    /// Total-variation distance to a table of the same shape.
    pub fn tv_distance(&self, other: &Self) -> Result<f64> {
        if self.cards != other.cards {
            return Err(Error::InvalidArgument("tables differ in shape".into()));
        }
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
                .sum::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2() -> DistTable<f64> {
        DistTable::new(vec!["a".into(), "b".into()], vec![2, 3], vec![0.1, 0.2, 0.1, 0.3, 0.2, 0.1]).unwrap()
    }

    #[test]
    fn validates_mass_and_shape() {
        assert!(DistTable::<f64>::new(vec!["a".into()], vec![2], vec![0.5, 0.6]).is_err());
        assert!(DistTable::<f64>::new(vec!["a".into()], vec![2], vec![1.5, -0.5]).is_err());
        assert!(DistTable::<f64>::new(vec!["a".into()], vec![3], vec![0.5, 0.5]).is_err());
        assert!(DistTable::<f64>::new(vec!["a".into(), "a".into()], vec![1, 1], vec![1.0]).is_err());
    }

    #[test]
    fn marginal_reorders_and_sums() {
        let t = t2();
        let b = t.marginal(&["b"]).unwrap();
        let expect = [0.4, 0.4, 0.2];
        for (x, y) in b.probs().iter().zip(expect) {
            assert!((x - y).abs() < 1e-12);
        }
        let ba = t.marginal(&["b", "a"]).unwrap();
        assert_eq!(ba.get(&[2, 0]), t.get(&[0, 2]));
        assert_eq!(ba.get(&[1, 1]), t.get(&[1, 1]));
    }

    #[test]
    fn cells_enumerate_in_row_major_order() {
        let t = t2();
        let cells: Vec<_> = t.cells().map(|(c, _)| c).collect();
        assert_eq!(cells[0], vec![0, 0]);
        assert_eq!(cells[3], vec![1, 0]);
        assert_eq!(cells[5], vec![1, 2]);
    }

    #[test]
    fn from_weights_normalizes() {
        let t = DistTable::<f32>::from_weights(vec!["a".into()], vec![2], vec![3.0, 1.0]).unwrap();
        assert_eq!(t.probs(), &[0.75, 0.25]);
        assert!(DistTable::<f32>::from_weights(vec!["a".into()], vec![2], vec![0.0, 0.0]).is_err());
    }
}
