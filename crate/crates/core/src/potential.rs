//! Exact potential theory of the intensity operator: excessive measures,
//! Riesz decomposition, adjoint chains, taboo kernels, entrance measures and
//! families, the occupation correspondence, and one-sided Kuznetsov paths.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;

use crate::bmc::{sample_spine, SamplerCaps, SpineStatus};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{HTransform, Kernel, Measure, Model, StateSet, Table};
use crate::verify::TestReport;

/// Slack allowed in `nu Q <= nu`.
pub const EXCESS_TOL: f64 = 1e-12;
/// Round-off below zero that is clamped rather than reported.
pub const CLAMP_TOL: f64 = 1e-12;
/// Tolerance of exact identities between measures.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Tolerance of entrance-family consistency.
pub const FAMILY_TOL: f64 = 1e-9;

fn check_len(model: &Model, m: &Measure) -> Result<()> {
    if m.len() != model.n_states() {
        return Err(Error::DimensionMismatch {
            expected: model.n_states(),
            got: m.len(),
        });
    }
    Ok(())
}

fn scale_of(m: &Measure) -> f64 {
    m.values().iter().cloned().fold(1.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Excessiveness {
    pub excessive: bool,
    /// `nu - nu Q` per state.
    pub slack: Vec<f64>,
}

pub fn is_excessive(nu: &Measure, model: &Model) -> Result<Excessiveness> {
    check_len(model, nu)?;
    let nq = model.intensity().left_apply(nu.values());
    let slack: Vec<f64> = nu.values().iter().zip(&nq).map(|(v, w)| v - w).collect();
    let excessive = slack.iter().all(|&s| s >= -EXCESS_TOL);
    Ok(Excessiveness { excessive, slack })
}

/// The slack vector `nu (I - Q)`, or `NotExcessive` at the worst state.
fn require_excessive(nu: &Measure, model: &Model) -> Result<Vec<f64>> {
    let e = is_excessive(nu, model)?;
    if !e.excessive {
        let (state, s) = e
            .slack
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        return Err(Error::NotExcessive { state, excess: -s });
    }
    Ok(e.slack)
}

/// `nu = inv + pot G` with `pot = nu (I - Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RieszPair {
    pub pot: Measure,
    pub inv: Measure,
}

pub fn riesz_decomposition(nu: &Measure, model: &Model) -> Result<RieszPair> {
    let slack = require_excessive(nu, model)?;
    let pot = Measure::from_clamped(slack, EXCESS_TOL).expect("checked by require_excessive");
    let pot_g = potential_of(&pot, model)?;
    let tol = IDENTITY_TOL * scale_of(nu);
    let inv: Vec<f64> = nu
        .values()
        .iter()
        .zip(pot_g.values())
        .map(|(v, w)| v - w)
        .collect();
    let inv = Measure::from_clamped(inv, tol)
        .map_err(|(state, v)| Error::NotExcessive { state, excess: -v })?;
    Ok(RieszPair { pot, inv })
}

/// `rho G`, solved on the states reachable from the support of `rho`, so
/// that only that part of `Q` needs to be subcritical.
pub fn potential_of(rho: &Measure, model: &Model) -> Result<Measure> {
    check_len(model, rho)?;
    let n = model.n_states();
    let q = model.intensity().matrix();
    let mut reach: Vec<bool> = rho.values().iter().map(|&v| v > 0.0).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&x| reach[x]).collect();
    while let Some(x) = stack.pop() {
        for y in 0..n {
            if !reach[y] && q[(x, y)] > 0.0 {
                reach[y] = true;
                stack.push(y);
            }
        }
    }
    let r: Vec<usize> = (0..n).filter(|&x| reach[x]).collect();
    let q_rr = linalg::submatrix(q, &r, &r);
    linalg::ensure_subcritical(&q_rr)?;
    let b: Vec<f64> = r.iter().map(|&x| rho.get(x)).collect();
    let sol = linalg::solve_left_i_minus(&q_rr, &b)?;
    let mut out = vec![0.0; n];
    for (i, &x) in r.iter().enumerate() {
        out[x] = sol[i];
    }
    Measure::from_clamped(out, IDENTITY_TOL * scale_of(rho))
        .map_err(|(x, v)| Error::SolveFailure(format!("negative potential {v} at state {x}")))
}

/// `hat p(x, y) = nu(y) Q(y, x) / nu(x)`, with zero rows where `nu` vanishes.
fn adjoint_matrix(nu: &Measure, model: &Model) -> DMatrix<f64> {
    let q = model.intensity();
    let n = model.n_states();
    DMatrix::from_fn(n, n, |x, y| {
        let vx = nu.get(x);
        if vx > 0.0 {
            nu.get(y) * q.get(y, x) / vx
        } else {
            0.0
        }
    })
}

pub fn adjoint_kernel(nu: &Measure, model: &Model) -> Result<Kernel> {
    check_len(model, nu)?;
    if let Some(x) = (0..nu.len()).find(|&x| nu.get(x) <= 0.0) {
        return Err(Error::ZeroMassState(x));
    }
    let k = Kernel::from_matrix(adjoint_matrix(nu, model))?;
    k.check_substochastic("adjoint", EXCESS_TOL)?;
    Ok(k)
}

/// First-entrance weights into `B`: `H(x, y)` for `y` in `B` is the total
/// `Q`-weight of paths from `x` whose first visit to `B` is at `y`
/// (the empty path when `x` is in `B`).
pub fn hitting_kernel(model: &Model, set: &StateSet) -> Result<DMatrix<f64>> {
    model.check_dim(set)?;
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = model.n_states();
    let q = model.intensity().matrix();
    let off = set.complement().to_vec();
    let on = set.to_vec();
    let inv = linalg::neumann_inverse(&linalg::submatrix(q, &off, &off), linalg_tol())?;
    let a = inv * linalg::submatrix(q, &off, &on);
    let mut hk = DMatrix::zeros(n, n);
    for &b in &on {
        hk[(b, b)] = 1.0;
    }
    for (i, &x) in off.iter().enumerate() {
        for (j, &y) in on.iter().enumerate() {
            hk[(x, y)] = a[(i, j)];
        }
    }
    Ok(hk)
}

fn linalg_tol() -> f64 {
    crate::model::GREEN_TOL
}

/// Taboo return kernel `Q^B` (supported on `B x B`): weight of paths of
/// length at least one from `x` to `y` avoiding `B` strictly in between.
pub fn taboo_return_kernel(model: &Model, set: &StateSet) -> Result<Kernel> {
    let hk = hitting_kernel(model, set)?;
    let q = model.intensity().matrix();
    let n = model.n_states();
    let m = DMatrix::from_fn(n, n, |x, y| {
        if !set.contains(x) || !set.contains(y) {
            return 0.0;
        }
        (0..n)
            .map(|z| {
                if set.contains(z) {
                    if z == y {
                        q[(x, z)]
                    } else {
                        0.0
                    }
                } else {
                    q[(x, z)] * hk[(z, y)]
                }
            })
            .sum()
    });
    Kernel::from_matrix(m)
}

/// Entrance measure `bar mu_B = nu|_B (I - Q^B)`.
pub fn entrance_measure(nu: &Measure, model: &Model, set: &StateSet) -> Result<Measure> {
    require_excessive(nu, model)?;
    let qb = taboo_return_kernel(model, set)?;
    let restricted = nu.restrict(set);
    let back = qb.left_apply(restricted.values());
    let v: Vec<f64> = restricted
        .values()
        .iter()
        .zip(&back)
        .map(|(a, b)| a - b)
        .collect();
    Measure::from_clamped(v, CLAMP_TOL * scale_of(nu))
        .map_err(|(state, v)| Error::NotExcessive { state, excess: -v })
}

/// Increasing sets `B_1 ⊂ B_2 ⊂ ...` with one finite measure per set.
#[derive(Debug, Clone, PartialEq)]
pub struct EntranceFamily {
    sets: Vec<StateSet>,
    measures: Vec<Measure>,
}

impl EntranceFamily {
    pub fn new(sets: Vec<StateSet>, measures: Vec<Measure>) -> Result<Self> {
        if sets.len() != measures.len() {
            return Err(Error::DimensionMismatch {
                expected: sets.len(),
                got: measures.len(),
            });
        }
        for w in sets.windows(2) {
            if !w[0].is_subset_of(&w[1]) {
                return Err(Error::InvalidArgument(
                    "entrance family sets must increase".into(),
                ));
            }
        }
        for (s, m) in sets.iter().zip(&measures) {
            if let Some(x) = (0..m.len()).find(|&x| m.get(x) > 0.0 && !s.contains(x)) {
                return Err(Error::InvalidMeasure(format!(
                    "mass at state {x} outside its set"
                )));
            }
        }
        Ok(Self { sets, measures })
    }

    /// Entrance measures of one excessive measure along the given sets.
    pub fn from_excessive(nu: &Measure, model: &Model, sets: Vec<StateSet>) -> Result<Self> {
        let measures = sets
            .iter()
            .map(|s| entrance_measure(nu, model, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(sets, measures)
    }

    pub fn sets(&self) -> &[StateSet] {
        &self.sets
    }

    pub fn measures(&self) -> &[Measure] {
        &self.measures
    }

    pub fn measures_mut(&mut self) -> &mut [Measure] {
        &mut self.measures
    }
}

/// Exhaustion starting at `B` and adding the remaining states in list order.
pub fn default_exhaustion(set: &StateSet) -> Vec<StateSet> {
    let mut current = set.clone();
    let mut out = vec![current.clone()];
    for x in set.complement().iter() {
        let mut states = current.to_vec();
        states.push(x);
        current = StateSet::new(set.universe_size(), states).expect("in range");
        out.push(current.clone());
    }
    out
}

pub fn entrance_family_check(family: &EntranceFamily, model: &Model) -> TestReport {
    let name = "entrance-family-consistency";
    if family.sets.len() < 2 {
        return TestReport::vacuous(name, "single set");
    }
    let mut worst: f64 = 0.0;
    let mut notes = String::new();
    for k in 0..family.sets.len() - 1 {
        let inner = &family.sets[k];
        let hk = match hitting_kernel(model, inner) {
            Ok(h) => h,
            Err(e) => {
                return TestReport::new(name, f64::INFINITY, FAMILY_TOL).with_note(e.to_string())
            }
        };
        let outer = &family.measures[k + 1];
        for y in 0..model.n_states() {
            let predicted = if inner.contains(y) {
                (0..model.n_states())
                    .map(|x| outer.get(x) * hk[(x, y)])
                    .sum()
            } else {
                0.0
            };
            let d = (predicted - family.measures[k].get(y)).abs();
            if d > worst {
                worst = d;
                notes.clear();
                let _ = write!(notes, "largest discrepancy at set {k}, state {y}");
            }
        }
    }
    TestReport::new(name, worst, FAMILY_TOL).with_note(notes)
}

/// `nu(x) = 1_{B^c}(x) mu(x) / h(x) + sum_{z in B} mu(z) g(z, x)`.
pub fn occupation_to_excessive(mu: &Measure, model: &Model, set: &StateSet) -> Result<Measure> {
    check_len(model, mu)?;
    let h = model.h_function(set)?;
    let g = model.green()?;
    let n = model.n_states();
    let v = (0..n)
        .map(|x| {
            let off = if set.contains(x) {
                0.0
            } else {
                mu.get(x) / h.get(x)
            };
            off + set.iter().map(|z| mu.get(z) * g[(z, x)]).sum::<f64>()
        })
        .collect();
    Measure::new(v)
}

/// Inverse of [`occupation_to_excessive`]: `mu|_B` is the entrance measure
/// and the off-`B` part is solved from the same formula.
pub fn excessive_to_occupation(nu: &Measure, model: &Model, set: &StateSet) -> Result<Measure> {
    let on_b = entrance_measure(nu, model, set)?;
    let h = model.h_function(set)?;
    let g = model.green()?;
    let n = model.n_states();
    let v: Vec<f64> = (0..n)
        .map(|x| {
            if set.contains(x) {
                on_b.get(x)
            } else {
                let below: f64 = set.iter().map(|z| on_b.get(z) * g[(z, x)]).sum();
                h.get(x) * (nu.get(x) - below)
            }
        })
        .collect();
    Measure::from_clamped(v, CLAMP_TOL * scale_of(nu))
        .map_err(|(state, v)| Error::NotExcessive { state, excess: -v })
}

/// Row `g(x, .)` of the Green's function as a measure.
pub fn green_row(model: &Model, x: usize) -> Result<Measure> {
    if x >= model.n_states() {
        return Err(Error::UnknownState(x.to_string()));
    }
    let g = model.green()?;
    Measure::new((0..model.n_states()).map(|y| g[(x, y)]).collect())
}

/// Expected visits per state of the `p^h` chain started at `x` (the start
/// counts, the chain stops on its first entry of `B`).
pub fn ph_occupation(ht: &HTransform, x: usize) -> Result<Vec<f64>> {
    let n = ht.h().len();
    let mut delta = vec![0.0; n];
    delta[x] = 1.0;
    linalg::solve_left_i_minus(ht.kernel().matrix(), &delta)
}

/// Largest deviation between `g(x, .)` and the image of the scaled `p^h`
/// occupation `h(x) * occupation` under [`occupation_to_excessive`], over all `x`.
pub fn ph_occupation_discrepancy(model: &Model, set: &StateSet) -> Result<f64> {
    let ht = model.h_transform(set)?;
    let mut worst: f64 = 0.0;
    for x in 0..model.n_states() {
        let hx = ht.h().get(x);
        let occ: Vec<f64> = ph_occupation(&ht, x)?.into_iter().map(|v| hx * v).collect();
        let mu = Measure::from_clamped(occ, CLAMP_TOL)
            .map_err(|(s, v)| Error::SolveFailure(format!("{v} at {s}")))?;
        let nu = occupation_to_excessive(&mu, model, set)?;
        worst = worst.max(nu.max_abs_diff(green_row(model, x)?.values()));
    }
    Ok(worst)
}

/// A path anchored at its entrance into the anchor set: `backward` holds the
/// states strictly before the anchor in chronological order, `forward` the
/// `p^h` continuation up to its first entry of `B`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KuznetsovPath {
    pub backward: Vec<usize>,
    pub anchor: usize,
    pub forward: Vec<usize>,
    /// The backward (adjoint) chain died, so the path has a first state.
    pub born: bool,
    pub backward_truncated: bool,
    pub forward_truncated: bool,
}

impl KuznetsovPath {
    pub fn states(&self) -> Vec<usize> {
        let mut s = self.backward.clone();
        s.push(self.anchor);
        s.extend_from_slice(&self.forward);
        s
    }

    pub fn anchor_index(&self) -> usize {
        self.backward.len()
    }

    /// `offset state` lines with offset 0 at the anchor.
    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        let base = self.anchor_index() as i64;
        for (i, x) in self.states().into_iter().enumerate() {
            let _ = writeln!(s, "{} {}", i as i64 - base, x);
        }
        s
    }
}

/// Precomputed tables for sampling one-sided Kuznetsov paths of an
/// excessive measure anchored at their entrance into `B'`.
#[derive(Debug, Clone)]
pub struct KuznetsovSampler {
    anchor_set: StateSet,
    ht: HTransform,
    entrance: Measure,
    anchor_weights: Vec<f64>,
    anchor: Table<usize>,
    /// Per state: conditioned backward step, `None` meaning death.
    backward: Vec<Option<Table<Option<usize>>>>,
    has_invariant: bool,
}

impl KuznetsovSampler {
    /// `set` is the norming region of the `p^h` continuation, `anchor_set`
    /// a superset of it where paths are anchored.
    pub fn new(nu: &Measure, model: &Model, set: &StateSet, anchor_set: &StateSet) -> Result<Self> {
        model.check_dim(anchor_set)?;
        if !set.is_subset_of(anchor_set) {
            return Err(Error::InvalidArgument("anchor set must contain B".into()));
        }
        let entrance = entrance_measure(nu, model, anchor_set)?;
        if entrance.total() <= 0.0 {
            return Err(Error::ZeroEntranceMass);
        }
        let ht = model.h_transform(set)?;
        let n = model.n_states();
        let anchor_weights: Vec<f64> = (0..n).map(|x| entrance.get(x) * ht.h().get(x)).collect();
        let anchor = Table::new(anchor_weights.iter().copied().enumerate())
            .ok_or(Error::ZeroEntranceMass)?;

        let hat = adjoint_matrix(nu, model);
        let death: Vec<f64> = (0..n)
            .map(|x| {
                if nu.get(x) > 0.0 {
                    (1.0 - hat.row(x).sum()).max(0.0)
                } else {
                    0.0
                }
            })
            .collect();
        let avoid = avoid_probability(&hat, anchor_set)?;
        // nu(x) a(x) must reproduce the entrance measure on the anchor set.
        let tol = FAMILY_TOL * scale_of(nu);
        for x in anchor_set.iter() {
            let d = (nu.get(x) * avoid[x] - entrance.get(x)).abs();
            if d > tol {
                return Err(Error::SolveFailure(format!(
                    "conditioned adjoint chain disagrees with the entrance measure at state {x} by {d:e}"
                )));
            }
        }
        let outside = anchor_set.complement().to_vec();
        let backward = (0..n)
            .map(|x| {
                if avoid[x] <= 0.0 {
                    return None;
                }
                let steps = outside
                    .iter()
                    .map(|&y| (Some(y), hat[(x, y)] * avoid[y] / avoid[x]))
                    .chain(std::iter::once((None, death[x] / avoid[x])));
                Table::new(steps.collect::<Vec<_>>())
            })
            .collect();
        let has_invariant = riesz_decomposition(nu, model)
            .map(|r| {
                r.inv
                    .values()
                    .iter()
                    .any(|&v| v > IDENTITY_TOL * scale_of(nu))
            })
            .unwrap_or(true);
        Ok(Self {
            anchor_set: anchor_set.clone(),
            ht,
            entrance,
            anchor_weights,
            anchor,
            backward,
            has_invariant,
        })
    }

    pub fn anchor_set(&self) -> &StateSet {
        &self.anchor_set
    }

    pub fn h_transform(&self) -> &HTransform {
        &self.ht
    }

    /// `bar mu_{B'}`.
    pub fn entrance(&self) -> &Measure {
        &self.entrance
    }

    /// Anchor probabilities, proportional to `bar mu_{B'}(x) h(x)`.
    pub fn anchor_law(&self) -> Vec<f64> {
        let t: f64 = self.anchor_weights.iter().sum();
        self.anchor_weights.iter().map(|w| w / t).collect()
    }

    /// Total anchor weight `sum_x bar mu_{B'}(x) h(x)`.
    pub fn mass(&self) -> f64 {
        self.anchor_weights.iter().sum()
    }

    pub fn has_invariant_part(&self) -> bool {
        self.has_invariant
    }

    pub fn sample_anchor<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.anchor.sample(rng)
    }

    /// Backward history before an anchor: `(states in chronological order, born, truncated)`.
    pub fn sample_backward<R: Rng + ?Sized>(
        &self,
        anchor: usize,
        rng: &mut R,
        caps: SamplerCaps,
    ) -> (Vec<usize>, bool, bool) {
        let mut rev = Vec::new();
        let mut cur = anchor;
        loop {
            if rev.len() >= caps.max_generations {
                rev.reverse();
                return (rev, false, true);
            }
            let Some(t) = &self.backward[cur] else {
                rev.reverse();
                return (rev, true, false);
            };
            match t.sample(rng) {
                Some(y) => {
                    rev.push(y);
                    cur = y;
                }
                None => {
                    rev.reverse();
                    return (rev, true, false);
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, caps: SamplerCaps) -> KuznetsovPath {
        let anchor = self.sample_anchor(rng);
        let (backward, born, backward_truncated) = self.sample_backward(anchor, rng, caps);
        let spine = sample_spine(&self.ht, anchor, rng, caps);
        KuznetsovPath {
            backward,
            anchor,
            forward: spine.states[1..].to_vec(),
            born,
            backward_truncated,
            forward_truncated: spine.status != SpineStatus::Complete,
        }
    }
}

/// Probability that the adjoint chain from `x` never (strictly after time
/// zero) enters `set`, dying or wandering forever instead.
fn avoid_probability(hat: &DMatrix<f64>, set: &StateSet) -> Result<Vec<f64>> {
    let n = hat.nrows();
    let off = set.complement().to_vec();
    let enter: Vec<f64> = (0..n)
        .map(|x| set.iter().map(|b| hat[(x, b)]).sum())
        .collect();
    let h_cc = linalg::submatrix(hat, &off, &off);
    let rhs: Vec<f64> = off.iter().map(|&x| enter[x]).collect();
    let mut r = vec![0.0; n];
    let r_off = match linalg::ensure_subcritical(&h_cc) {
        Ok(_) => linalg::solve_right_i_minus(&h_cc, &rhs)?,
        Err(_) => {
            // Minimal solution by monotone iteration.
            let mut v = vec![0.0; off.len()];
            for _ in 0..1_000_000 {
                let next: Vec<f64> = (0..off.len())
                    .map(|i| rhs[i] + (0..off.len()).map(|j| h_cc[(i, j)] * v[j]).sum::<f64>())
                    .collect();
                let delta = next
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                v = next;
                if delta < 1e-15 {
                    break;
                }
            }
            v
        }
    };
    for (i, &x) in off.iter().enumerate() {
        r[x] = r_off[i];
    }
    Ok((0..n)
        .map(|x| {
            let hit = enter[x] + off.iter().map(|&y| hat[(x, y)] * r[y]).sum::<f64>();
            (1.0 - hit).clamp(0.0, 1.0)
        })
        .collect())
}

/// One Kuznetsov path of `nu` anchored at its entrance into `B`.
pub fn kuznetsov_sample<R: Rng + ?Sized>(
    nu: &Measure,
    model: &Model,
    set: &StateSet,
    rng: &mut R,
    caps: SamplerCaps,
) -> Result<KuznetsovPath> {
    let sampler = KuznetsovSampler::new(nu, model, set, set)?;
    let path = sampler.sample(rng, caps);
    if path.backward_truncated && sampler.has_invariant_part() {
        return Err(Error::BackwardNotAlmostSurelyFinite);
    }
    Ok(path)
}
