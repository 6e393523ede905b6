//! Decorability diagnostics: the constant `C`, hit-probability bounds,
//! population bounds, and the symmetric and translation-invariant criteria
//! evaluated as truncated sums.

use std::fmt::{self, Write as _};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{Measure, Model, OffspringLaw, StateSet};

/// Default truncation depth of the series criteria.
pub const DEFAULT_DEPTH: usize = 500;
/// A series counts as converged when its extrapolated tail is below this.
pub const TAIL_TOL: f64 = 1e-9;
/// Entrywise tolerance of the symmetry gate.
pub const SYMMETRY_TOL: f64 = 1e-14;

/// `sum_k (k - 1) d^sb(k)`.
pub fn bar_mean(law: &OffspringLaw) -> Result<f64> {
    law.bar_mean()
}

/// Per-state value `(1 / h(x)) sum_{y not in B} (bar m_y / m_y) g(x, y) h(y)^2`.
pub fn decorability_profile(model: &Model, set: &StateSet) -> Result<Vec<f64>> {
    let h = model.h_function(set)?;
    let g = model.green()?;
    let n = model.n_states();
    let mut ratio = vec![0.0; n];
    for y in set.complement().iter() {
        let law = model.offspring(y);
        ratio[y] = law.bar_mean()? / law.mean();
    }
    Ok((0..n)
        .map(|x| {
            set.complement()
                .iter()
                .map(|y| ratio[y] * g[(x, y)] * h.get(y) * h.get(y))
                .sum::<f64>()
                / h.get(x)
        })
        .collect())
}

/// The constant `C`: the supremum of [`decorability_profile`].
pub fn decorability_constant(model: &Model, set: &StateSet) -> Result<f64> {
    Ok(decorability_profile(model, set)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// `(h(x) / (4C + 2), min(h(x), 1))`.
pub fn hit_probability_bounds(model: &Model, set: &StateSet, x: usize) -> Result<(f64, f64)> {
    if x >= model.n_states() {
        return Err(Error::UnknownState(x.to_string()));
    }
    let c = decorability_constant(model, set)?;
    let h = model.h_function(set)?.get(x);
    Ok((h / (4.0 * c + 2.0), h.min(1.0)))
}

/// Exact probability that the tree started at `x` hits `B`, from the
/// fixed point `q(x) = sum_k d_x(k) ((p q)(x))^k` of the non-hitting
/// probability, iterated down from `q = 1` off `B`.
pub fn hit_probability(model: &Model, set: &StateSet) -> Result<Measure> {
    model.check_dim(set)?;
    let n = model.n_states();
    let p = model.motion();
    let mut q: Vec<f64> = (0..n)
        .map(|x| if set.contains(x) { 0.0 } else { 1.0 })
        .collect();
    for _ in 0..1_000_000 {
        let pq = p.right_apply(&q);
        let next: Vec<f64> = (0..n)
            .map(|x| {
                if set.contains(x) {
                    0.0
                } else {
                    model
                        .offspring(x)
                        .support()
                        .iter()
                        .map(|&(k, d)| d * pq[x].powi(k as i32))
                        .sum()
                }
            })
            .collect();
        let delta = next
            .iter()
            .zip(&q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        q = next;
        if delta < 1e-16 {
            break;
        }
    }
    Measure::new(q.into_iter().map(|v| (1.0 - v).clamp(0.0, 1.0)).collect())
}

/// Bounds `max_{u in B} g(u, B) (1 + C / h(y))` on expected per-state
/// populations of the B-size-biased tree.
pub fn population_bounds(model: &Model, set: &StateSet) -> Result<Vec<f64>> {
    let c = decorability_constant(model, set)?;
    let h = model.h_function(set)?;
    let g = model.green()?;
    let gb = set
        .iter()
        .map(|u| set.iter().map(|b| g[(u, b)]).sum::<f64>())
        .fold(0.0, f64::max);
    Ok((0..model.n_states())
        .map(|y| gb * (1.0 + c / h.get(y)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Decorable,
    Symmetric,
    NotSymmetric,
    Converged,
    Divergent,
    Inconclusive,
    Finite,
    Infinite,
    NotApplicable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Decorable => "decorable",
            Verdict::Symmetric => "symmetric",
            Verdict::NotSymmetric => "not-symmetric",
            Verdict::Converged => "converged",
            Verdict::Divergent => "divergent",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Finite => "finite",
            Verdict::Infinite => "infinite",
            Verdict::NotApplicable => "n/a",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub name: &'static str,
    pub applicable: bool,
    pub verdict: Verdict,
    pub value: f64,
    pub detail: String,
}

/// Truncated series with a tail estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesDiagnostic {
    pub partial_sum: f64,
    pub last_term: f64,
    pub ratio: f64,
    /// Geometric extrapolation of the tail, infinite when the ratio is at least one.
    pub tail: f64,
}

impl SeriesDiagnostic {
    pub fn from_terms(terms: &[f64]) -> Self {
        let partial_sum: f64 = terms.iter().sum();
        let k = terms.len();
        let last_term = terms.last().copied().unwrap_or(0.0);
        let prev = if k >= 2 { terms[k - 2] } else { 0.0 };
        let ratio = if last_term == 0.0 {
            0.0
        } else if prev == 0.0 {
            f64::INFINITY
        } else {
            last_term / prev
        };
        let tail = if ratio < 1.0 {
            last_term * ratio / (1.0 - ratio)
        } else {
            f64::INFINITY
        };
        Self {
            partial_sum,
            last_term,
            ratio,
            tail,
        }
    }

    pub fn verdict(&self) -> Verdict {
        if self.ratio >= 1.0 {
            Verdict::Divergent
        } else if self.tail < TAIL_TOL {
            Verdict::Converged
        } else {
            Verdict::Inconclusive
        }
    }

    /// Partial sum plus extrapolated tail.
    pub fn estimate(&self) -> f64 {
        self.partial_sum + self.tail
    }
}

/// Terms `k * max_z (Q^k)(r, z)` for `k = 1..=depth`.
pub fn sup_row_terms(q: &DMatrix<f64>, reference: usize, depth: usize) -> Vec<f64> {
    let n = q.nrows();
    let mut row = DMatrix::from_fn(1, n, |_, j| if j == reference { 1.0 } else { 0.0 });
    (1..=depth)
        .map(|k| {
            row = &row * q;
            k as f64 * row.iter().cloned().fold(0.0, f64::max)
        })
        .collect()
}

/// Terms `k * sqrt((Q^{2k})(r, r))` for `k = 1..=depth`.
pub fn return_terms(q: &DMatrix<f64>, reference: usize, depth: usize) -> Vec<f64> {
    let n = q.nrows();
    let q2 = q * q;
    let mut row = DMatrix::from_fn(1, n, |_, j| if j == reference { 1.0 } else { 0.0 });
    (1..=depth)
        .map(|k| {
            row = &row * &q2;
            k as f64 * row[(0, reference)].max(0.0).sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecorabilityReport {
    /// `None` when the Green's function or `h` is unavailable.
    pub constant: Option<f64>,
    pub constant_argmax: Option<usize>,
    pub bounds: Vec<(f64, f64)>,
    pub population_bounds: Vec<f64>,
    pub criteria: Vec<Criterion>,
    pub depth: usize,
    pub reference: usize,
}

impl DecorabilityReport {
    pub fn criterion(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }

    pub fn csv_header() -> &'static str {
        "criterion,applicable,verdict,value"
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.criteria
            .iter()
            .map(|c| format!("{},{},{},{}", c.name, c.applicable, c.verdict, c.value))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "depth {} reference {}", self.depth, self.reference);
        match (self.constant, self.constant_argmax) {
            (Some(c), Some(x)) => {
                let _ = writeln!(s, "C {c} argmax {x}");
            }
            _ => {
                let _ = writeln!(s, "C unavailable");
            }
        }
        for (x, (lo, hi)) in self.bounds.iter().enumerate() {
            let _ = writeln!(s, "hit-bounds {x} {lo} {hi}");
        }
        for (x, b) in self.population_bounds.iter().enumerate() {
            let _ = writeln!(s, "population-bound {x} {b}");
        }
        for c in &self.criteria {
            let _ = writeln!(
                s,
                "criterion {} applicable={} verdict={} value={} {}",
                c.name, c.applicable, c.verdict, c.value, c.detail
            );
        }
        s
    }
}

/// Evaluates every criterion on `model` with reference state `reference`
/// for the symmetric series, truncated at `depth` terms.
pub fn criteria_report(
    model: &Model,
    set: &StateSet,
    depth: usize,
    reference: usize,
) -> DecorabilityReport {
    let depth = depth.max(2);
    let q = model.intensity();
    let mut criteria = Vec::new();

    let sup_m = model.means().iter().cloned().fold(0.0, f64::max);
    criteria.push(if model.translation_invariant() {
        let ok = sup_m < 1.0;
        Criterion {
            name: "translation-invariant",
            applicable: true,
            verdict: if ok {
                Verdict::Decorable
            } else {
                Verdict::Inconclusive
            },
            value: sup_m,
            detail: "value is sup m".into(),
        }
    } else {
        Criterion {
            name: "translation-invariant",
            applicable: false,
            verdict: Verdict::NotApplicable,
            value: f64::NAN,
            detail: "model not declared translation invariant".into(),
        }
    });

    let symmetric = q.is_symmetric(SYMMETRY_TOL);
    criteria.push(Criterion {
        name: "symmetry",
        applicable: true,
        verdict: if symmetric {
            Verdict::Symmetric
        } else {
            Verdict::NotSymmetric
        },
        value: if symmetric { 1.0 } else { 0.0 },
        detail: String::new(),
    });

    let series = |name: &'static str, terms: Option<Vec<f64>>| match terms {
        Some(t) => {
            let d = SeriesDiagnostic::from_terms(&t);
            Criterion {
                name,
                applicable: true,
                verdict: d.verdict(),
                value: d.estimate(),
                detail: format!(
                    "partial={} last={} ratio={} tail={}",
                    d.partial_sum, d.last_term, d.ratio, d.tail
                ),
            }
        }
        None => Criterion {
            name,
            applicable: false,
            verdict: Verdict::NotApplicable,
            value: f64::NAN,
            detail: "requires symmetric Q".into(),
        },
    };
    let ok_ref = symmetric && reference < model.n_states();
    criteria.push(series(
        "sup-row-series",
        ok_ref.then(|| sup_row_terms(q.matrix(), reference, depth)),
    ));
    criteria.push(series(
        "return-series",
        ok_ref.then(|| return_terms(q.matrix(), reference, depth)),
    ));

    let profile = decorability_profile(model, set);
    let (constant, constant_argmax) = match &profile {
        Ok(p) => {
            let (i, c) = p.iter().enumerate().fold(
                (0, 0.0),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
            (Some(c), Some(i))
        }
        Err(_) => (None, None),
    };
    criteria.push(Criterion {
        name: "constant-C",
        applicable: true,
        verdict: if constant.is_some() {
            Verdict::Finite
        } else {
            Verdict::Infinite
        },
        value: constant.unwrap_or(f64::INFINITY),
        detail: match &profile {
            Err(e) => e.to_string(),
            Ok(_) => String::new(),
        },
    });

    let bounds = match (constant, model.h_function(set)) {
        (Some(c), Ok(h)) => h
            .values()
            .iter()
            .map(|&hx| (hx / (4.0 * c + 2.0), hx.min(1.0)))
            .collect(),
        _ => Vec::new(),
    };
    let population_bounds = population_bounds(model, set).unwrap_or_default();
    DecorabilityReport {
        constant,
        constant_argmax,
        bounds,
        population_bounds,
        criteria,
        depth,
        reference,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference::{model_a, model_a_single_child, model_b, model_c, single_state};

    fn b0() -> StateSet {
        StateSet::new(3, [0]).unwrap()
    }

    #[test]
    fn bar_mean_examples() {
        assert!(
            (bar_mean(&OffspringLaw::new([(0, 0.6), (2, 0.4)]).unwrap()).unwrap() - 1.0).abs()
                < 1e-15
        );
        assert_eq!(bar_mean(&OffspringLaw::deterministic(1)).unwrap(), 0.0);
        let l = OffspringLaw::new([(1, 0.5), (2, 0.5)]).unwrap();
        assert!((bar_mean(&l).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_on_model_a() {
        let m = model_a();
        let p = decorability_profile(&m, &b0()).unwrap();
        // Independent evaluation with rational G and h.
        let g =
            [[17.0, 20.0, 8.0], [10.0, 25.0, 10.0], [8.0, 20.0, 17.0]].map(|r| r.map(|v| v / 9.0));
        let h = [1.0, 10.0 / 17.0, 8.0 / 17.0];
        for x in 0..3 {
            let v: f64 = (1..3).map(|y| 1.25 * g[x][y] * h[y] * h[y]).sum::<f64>() / h[x];
            assert!((p[x] - v).abs() < 1e-12);
        }
        let c = decorability_constant(&m, &b0()).unwrap();
        assert!((c - p[2]).abs() < 1e-15 && (c - 3.1536).abs() < 1e-3);
        let all = StateSet::all(3);
        assert_eq!(decorability_constant(&m, &all).unwrap(), 0.0);
        assert_eq!(
            decorability_constant(&model_a_single_child(), &b0()).unwrap(),
            0.0
        );
    }

    #[test]
    fn bounds_and_exact_hit() {
        let m = model_a();
        let (lo, hi) = hit_probability_bounds(&m, &b0(), 1).unwrap();
        assert!((lo - 0.04025).abs() < 1e-4);
        assert!((hi - 10.0 / 17.0).abs() < 1e-14);
        let (_, hi0) = hit_probability_bounds(&m, &b0(), 0).unwrap();
        assert_eq!(hi0, 1.0);
        let hp = hit_probability(&m, &b0()).unwrap();
        assert_eq!(hp.get(0), 1.0);
        for x in 0..3 {
            let (lo, hi) = hit_probability_bounds(&m, &b0(), x).unwrap();
            assert!(lo <= hp.get(x) && hp.get(x) <= hi);
        }
        assert!((hp.get(1) - 0.34006).abs() < 1e-4);
        assert!((hp.get(2) - 0.22579).abs() < 1e-4);
    }

    #[test]
    fn criteria_examples() {
        let c = criteria_report(&model_c(), &StateSet::all(1), DEFAULT_DEPTH, 0);
        let t = c.criterion("sup-row-series").unwrap();
        assert_eq!(t.verdict, Verdict::Converged);
        assert!((t.value - 20.0).abs() < 1e-6);
        let b = criteria_report(&model_b(), &StateSet::all(1), DEFAULT_DEPTH, 0);
        assert_eq!(
            b.criterion("sup-row-series").unwrap().verdict,
            Verdict::Divergent
        );
        assert_eq!(
            b.criterion("return-series").unwrap().verdict,
            Verdict::Divergent
        );
        assert_eq!(
            b.criterion("constant-C").unwrap().verdict,
            Verdict::Infinite
        );
        let a = criteria_report(&model_a(), &b0(), DEFAULT_DEPTH, 0);
        assert!(!a.criterion("sup-row-series").unwrap().applicable);
        assert!(!a.criterion("return-series").unwrap().applicable);
        assert_eq!(a.constant_argmax, Some(2));
        assert!(a.bounds.iter().all(|(lo, hi)| lo <= hi));
        for k in 1..10 {
            let beta = k as f64 / 10.0;
            let r = criteria_report(&single_state(beta), &StateSet::all(1), DEFAULT_DEPTH, 0);
            assert_eq!(
                r.criterion("return-series").unwrap().verdict,
                Verdict::Converged,
                "beta {beta}"
            );
        }
    }

    #[test]
    fn translation_invariant_flag() {
        let m = model_c().with_translation_invariance(true);
        let r = criteria_report(&m, &StateSet::all(1), 50, 0);
        assert_eq!(
            r.criterion("translation-invariant").unwrap().verdict,
            Verdict::Decorable
        );
    }
}
