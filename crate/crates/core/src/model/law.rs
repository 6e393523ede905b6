use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;

/// Offspring distribution of one state: probability of each child count,
/// with finite explicitly enumerated support.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringLaw {
    // Sorted by child count, only strictly positive probabilities.
    support: Vec<(u32, f64)>,
}

impl OffspringLaw {
    pub fn new(pairs: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let mut support: Vec<(u32, f64)> = Vec::new();
        for (k, p) in pairs {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidLaw(format!(
                    "P({k}) = {p} is not a probability"
                )));
            }
            if support.iter().any(|&(j, _)| j == k) {
                return Err(Error::InvalidLaw(format!("child count {k} listed twice")));
            }
            if p > 0.0 {
                support.push((k, p));
            }
        }
        support.sort_by_key(|&(k, _)| k);
        let total: f64 = support.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidLaw(format!("probabilities sum to {total}")));
        }
        Ok(Self { support })
    }

    /// The law putting all mass on `k` children.
    pub fn deterministic(k: u32) -> Self {
        Self {
            support: vec![(k, 1.0)],
        }
    }

    pub fn support(&self) -> &[(u32, f64)] {
        &self.support
    }

    pub fn probability(&self, k: u32) -> f64 {
        self.support
            .iter()
            .find(|&&(j, _)| j == k)
            .map_or(0.0, |&(_, p)| p)
    }

    pub fn max_count(&self) -> u32 {
        self.support.last().map_or(0, |&(k, _)| k)
    }

    /// m = sum k d(k).
    pub fn mean(&self) -> f64 {
        self.support.iter().map(|&(k, p)| k as f64 * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.support
            .iter()
            .map(|&(k, p)| (k as f64).powi(2) * p)
            .sum()
    }

    /// The size-biased law n d(n) / m.
    pub fn size_biased(&self) -> Result<Self> {
        let m = self.mean();
        if m <= 0.0 {
            return Err(Error::ZeroMeanOffspring);
        }
        Ok(Self {
            support: self
                .support
                .iter()
                .filter(|&&(k, _)| k > 0)
                .map(|&(k, p)| (k, k as f64 * p / m))
                .collect(),
        })
    }

    /// Mean number of extra children of a size-biased individual,
    /// sum (k-1) k d(k) / m.
    pub fn bar_mean(&self) -> Result<f64> {
        let m = self.mean();
        if m <= 0.0 {
            return Err(Error::ZeroMeanOffspring);
        }
        Ok(self
            .support
            .iter()
            .map(|&(k, p)| (k as f64 - 1.0) * k as f64 * p)
            .sum::<f64>()
            / m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law(pairs: &[(u32, f64)]) -> OffspringLaw {
        OffspringLaw::new(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn rejects_bad_laws() {
        assert!(OffspringLaw::new([(0, 0.5), (1, 0.6)]).is_err());
        assert!(OffspringLaw::new([(0, -0.1), (1, 1.1)]).is_err());
        assert!(OffspringLaw::new([(1, 0.5), (1, 0.5)]).is_err());
        assert!(OffspringLaw::new([(0, f64::NAN)]).is_err());
    }

    #[test]
    fn size_biased_examples() {
        let sb = law(&[(0, 0.6), (2, 0.4)]).size_biased().unwrap();
        assert_eq!(sb.support(), &[(2, 1.0)]);
        assert_eq!(law(&[(1, 1.0)]).size_biased().unwrap(), law(&[(1, 1.0)]));
        let sb = law(&[(1, 0.5), (2, 0.5)]).size_biased().unwrap();
        assert!((sb.probability(1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((sb.probability(2) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            law(&[(0, 1.0)]).size_biased(),
            Err(Error::ZeroMeanOffspring)
        );
    }

    #[test]
    fn size_biased_mean_is_second_moment_over_mean() {
        for pairs in [
            vec![(0, 0.6), (2, 0.4)],
            vec![(1, 0.5), (2, 0.5)],
            vec![(0, 0.1), (1, 0.2), (3, 0.3), (7, 0.4)],
        ] {
            let l = law(&pairs);
            let direct: f64 =
                pairs.iter().map(|&(k, p)| (k * k) as f64 * p).sum::<f64>() / l.mean();
            assert!((l.size_biased().unwrap().mean() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn bar_mean_examples() {
        assert!((law(&[(0, 0.6), (2, 0.4)]).bar_mean().unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(law(&[(1, 1.0)]).bar_mean().unwrap(), 0.0);
        assert!((law(&[(1, 0.5), (2, 0.5)]).bar_mean().unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }
}
