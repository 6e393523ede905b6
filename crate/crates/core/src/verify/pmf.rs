use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::replicas::{fold_replicas, ReplicaRng, Workers};

/// What the keys of a [`TreePmf`] encode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Uncoloured,
    Coloured,
    Path,
}

/// Probability mass function over canonical encodings, with the mass beyond
/// the truncation boundary kept as a separate bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct TreePmf {
    pub scheme: Scheme,
    pub entries: BTreeMap<String, f64>,
    pub beyond: f64,
}

impl TreePmf {
    pub fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            entries: BTreeMap::new(),
            beyond: 0.0,
        }
    }

    pub fn add(&mut self, key: String, p: f64) {
        *self.entries.entry(key).or_insert(0.0) += p;
    }

    pub fn support_len(&self) -> usize {
        self.entries.values().filter(|&&p| p > 0.0).count()
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum::<f64>() + self.beyond
    }

    pub fn get(&self, key: &str) -> f64 {
        self.entries.get(key).copied().unwrap_or(0.0)
    }

    /// Normalised empirical law of `counts` out of `n` draws, `beyond` of
    /// which fell outside the encodable range.
    pub fn from_counts(scheme: Scheme, counts: &HashMap<String, u64>, beyond: u64) -> Self {
        let n = counts.values().sum::<u64>() + beyond;
        let mut pmf = Self::new(scheme);
        if n == 0 {
            return pmf;
        }
        for (k, &c) in counts {
            pmf.entries.insert(k.clone(), c as f64 / n as f64);
        }
        pmf.beyond = beyond as f64 / n as f64;
        pmf
    }
}

/// Half the L1 distance, the beyond-truncation masses compared as one bucket.
pub fn tv_distance(a: &TreePmf, b: &TreePmf) -> Result<f64> {
    if a.scheme != b.scheme {
        return Err(Error::EncodingMismatch(format!(
            "{:?} vs {:?}",
            a.scheme, b.scheme
        )));
    }
    let mut sum = (a.beyond - b.beyond).abs();
    for (k, &p) in &a.entries {
        sum += (p - b.get(k)).abs();
    }
    for (k, &q) in &b.entries {
        if !a.entries.contains_key(k) {
            sum += q;
        }
    }
    Ok(0.5 * sum)
}

/// `2 sqrt(support / n) + 0.005`.
pub fn tv_threshold(support: usize, n: u64) -> f64 {
    2.0 * (support as f64 / n as f64).sqrt() + 0.005
}

/// Empirical law of `n` seeded replicas; `draw` returns `None` for a
/// sample beyond the truncation boundary.
pub fn empirical_pmf<F>(scheme: Scheme, n: u64, seed: u64, workers: Workers, draw: F) -> TreePmf
where
    F: Fn(&mut ReplicaRng) -> Option<String> + Sync,
{
    let (counts, beyond) = fold_replicas(
        n,
        seed,
        workers,
        || (HashMap::<String, u64>::new(), 0u64),
        |acc, _, rng| match draw(rng) {
            Some(k) => *acc.0.entry(k).or_insert(0) += 1,
            None => acc.1 += 1,
        },
        |acc, part| {
            for (k, c) in part.0 {
                *acc.0.entry(k).or_insert(0) += c;
            }
            acc.1 += part.1;
        },
    );
    TreePmf::from_counts(scheme, &counts, beyond)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pmf(pairs: &[(&str, f64)]) -> TreePmf {
        let mut p = TreePmf::new(Scheme::Uncoloured);
        for &(k, v) in pairs {
            p.add(k.to_string(), v);
        }
        p
    }

    #[test]
    fn tv_examples() {
        let a = pmf(&[("A", 0.6), ("B", 0.4)]);
        assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
        let b = pmf(&[("A", 0.5), ("B", 0.5)]);
        assert!((tv_distance(&a, &b).unwrap() - 0.1).abs() < 1e-15);
        let c = pmf(&[("C", 1.0)]);
        assert_eq!(tv_distance(&a, &c).unwrap(), 1.0);
        let mut d = pmf(&[("A", 0.6)]);
        d.beyond = 0.4;
        assert!((tv_distance(&a, &d).unwrap() - 0.4).abs() < 1e-15);
        let other = TreePmf::new(Scheme::Coloured);
        assert!(matches!(
            tv_distance(&a, &other),
            Err(Error::EncodingMismatch(_))
        ));
    }

    fn arb_pmf() -> impl Strategy<Value = TreePmf> {
        prop::collection::vec(0.0f64..1.0, 4).prop_map(|w| {
            let t: f64 = w.iter().sum::<f64>() + 1e-9;
            let mut p = TreePmf::new(Scheme::Uncoloured);
            for (i, v) in w.iter().enumerate() {
                p.add(format!("k{i}"), v / t);
            }
            p
        })
    }

    proptest! {
        #[test]
        fn tv_is_a_metric(a in arb_pmf(), b in arb_pmf(), c in arb_pmf()) {
            let ab = tv_distance(&a, &b).unwrap();
            let ba = tv_distance(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-15);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
            let ac = tv_distance(&a, &c).unwrap();
            let cb = tv_distance(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
        }
    }
}
