//! Samplers for the plain branching Markov chain, the B-biased chain, the
//! spine chain, and the colouring and decoration kernels.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::forest::{Colour, Forest, ForestBuilder, Label, Truncation};
use crate::model::{HTransform, Model, StateSet};

/// Resource guard for possibly infinite trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerCaps {
    pub max_generations: usize,
    pub max_population: usize,
}

impl Default for SamplerCaps {
    fn default() -> Self {
        Self {
            max_generations: 10_000,
            max_population: 1_000_000,
        }
    }
}

impl SamplerCaps {
    pub fn new(max_generations: usize, max_population: usize) -> Result<Self> {
        if max_generations == 0 || max_population == 0 {
            return Err(Error::InvalidArgument("caps must be positive".into()));
        }
        Ok(Self {
            max_generations,
            max_population,
        })
    }
}

impl fmt::Display for SamplerCaps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.max_generations, self.max_population)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpineStatus {
    /// Ends at its first entry of B.
    Complete,
    /// The chain died before reaching B.
    KilledBeforeB,
    /// Stopped by the generation cap.
    Truncated,
}

impl fmt::Display for SpineStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpineStatus::Complete => "complete",
            SpineStatus::KilledBeforeB => "killed-before-B",
            SpineStatus::Truncated => "truncated",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinePath {
    pub states: Vec<usize>,
    pub status: SpineStatus,
}

impl SpinePath {
    /// A complete path; checks that only the last state may lie in `B`.
    pub fn new(states: Vec<usize>, set: &StateSet) -> Result<Self> {
        let Some(&last) = states.last() else {
            return Err(Error::InvalidSpine("empty spine".into()));
        };
        let status = if set.contains(last) {
            SpineStatus::Complete
        } else {
            SpineStatus::Truncated
        };
        let path = Self { states, status };
        path.check(set)?;
        Ok(path)
    }

    fn check(&self, set: &StateSet) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::InvalidSpine("empty spine".into()));
        }
        if let Some(k) = self.states[..self.states.len() - 1]
            .iter()
            .position(|&s| set.contains(s))
        {
            return Err(Error::InvalidSpine(format!(
                "spine enters B at step {k} before its end"
            )));
        }
        Ok(())
    }
}

/// Grows a forest generation by generation. Uncoloured and white individuals
/// and blue individuals in `B` reproduce by the plain law; blue individuals
/// off `B` reproduce by the size-biased law with one blue child moved by `p^h`.
struct Grower<'a> {
    model: &'a Model,
    spine: Option<&'a HTransform>,
    caps: SamplerCaps,
    builder: ForestBuilder,
    truncation: Truncation,
}

impl<'a> Grower<'a> {
    fn new(model: &'a Model, spine: Option<&'a HTransform>, caps: SamplerCaps) -> Self {
        Self {
            model,
            spine,
            caps,
            builder: ForestBuilder::new(),
            truncation: Truncation::default(),
        }
    }

    fn full(&mut self) -> bool {
        if self.builder.len() >= self.caps.max_population {
            self.truncation.population_capped = true;
            true
        } else {
            false
        }
    }

    /// Samples all descendants of the `(position, generation)` frontier.
    fn grow<R: Rng + ?Sized>(&mut self, mut frontier: Vec<(usize, usize)>, rng: &mut R) {
        let tables = self.model.tables();
        let mut next = Vec::new();
        while !frontier.is_empty() {
            for &(i, gen) in &frontier {
                if gen >= self.caps.max_generations {
                    self.truncation.generation_capped = true;
                    continue;
                }
                let x = self.builder.location(i);
                let colour = self.builder.colour(i);
                let biased = match (colour, self.spine) {
                    (Colour::Blue, Some(ht)) if !ht.set().contains(x) => Some(ht),
                    _ => None,
                };
                let (count, child_colour) = match biased {
                    Some(ht) => {
                        let n = tables.size_biased[x]
                            .as_ref()
                            .expect("h > 0 off B implies positive mean")
                            .sample(rng);
                        if self.full() {
                            return;
                        }
                        let y = ht
                            .spine_table(x)
                            .expect("p^h row off B is stochastic")
                            .sample(rng);
                        let c = self.builder.push(rng, Some(i), y, Colour::Blue);
                        next.push((c, gen + 1));
                        (n - 1, Colour::White)
                    }
                    None => {
                        let c = if colour == Colour::Uncoloured {
                            Colour::Uncoloured
                        } else {
                            Colour::White
                        };
                        (tables.offspring[x].sample(rng), c)
                    }
                };
                for _ in 0..count {
                    if self.full() {
                        return;
                    }
                    let y = tables.motion[x].sample(rng);
                    let c = self.builder.push(rng, Some(i), y, child_colour);
                    next.push((c, gen + 1));
                }
            }
            std::mem::swap(&mut frontier, &mut next);
            next.clear();
        }
    }

    fn finish(self) -> Forest {
        self.builder.finish(self.truncation)
    }
}

/// Plain BMC from the given initial population (distinct labels).
pub fn sample_bmc<R: Rng + ?Sized>(
    model: &Model,
    initial: &[(Label, usize)],
    rng: &mut R,
    caps: SamplerCaps,
) -> Result<Forest> {
    let mut g = Grower::new(model, None, caps);
    let mut frontier = Vec::with_capacity(initial.len());
    for &(label, x) in initial {
        if x >= model.n_states() {
            return Err(Error::UnknownState(x.to_string()));
        }
        if g.builder.contains_label(label) {
            return Err(Error::InvalidArgument(format!(
                "duplicate initial label {label}"
            )));
        }
        frontier.push((
            g.builder.push_labelled(label, None, x, Colour::Uncoloured),
            0,
        ));
    }
    g.grow(frontier, rng);
    Ok(g.finish())
}

/// Plain BMC from a single individual at `x` with a random label.
pub fn sample_bmc_from<R: Rng + ?Sized>(
    model: &Model,
    x: usize,
    rng: &mut R,
    caps: SamplerCaps,
) -> Forest {
    let mut g = Grower::new(model, None, caps);
    let root = g.builder.push(rng, None, x, Colour::Uncoloured);
    g.grow(vec![(root, 0)], rng);
    g.finish()
}

/// B-biased BMC started from one blue individual at `x`.
pub fn sample_biased_bmc<R: Rng + ?Sized>(
    model: &Model,
    ht: &HTransform,
    x: usize,
    rng: &mut R,
    caps: SamplerCaps,
) -> Forest {
    let mut g = Grower::new(model, Some(ht), caps);
    let root = g.builder.push(rng, None, x, Colour::Blue);
    g.grow(vec![(root, 0)], rng);
    g.finish()
}

/// `p^h` chain from `x`, stopped at its first entry of `B`.
pub fn sample_spine<R: Rng + ?Sized>(
    ht: &HTransform,
    x: usize,
    rng: &mut R,
    caps: SamplerCaps,
) -> SpinePath {
    let mut states = vec![x];
    let mut cur = x;
    loop {
        if ht.set().contains(cur) {
            return SpinePath {
                states,
                status: SpineStatus::Complete,
            };
        }
        if states.len() > caps.max_generations {
            return SpinePath {
                states,
                status: SpineStatus::Truncated,
            };
        }
        match ht.spine_table(cur) {
            Some(t) => cur = t.sample(rng),
            None => {
                return SpinePath {
                    states,
                    status: SpineStatus::KilledBeforeB,
                }
            }
        }
        states.push(cur);
    }
}

/// Picks a uniform B-entrance individual, paints it and its ancestral line
/// blue and everything else white.
pub fn colour<R: Rng + ?Sized>(forest: &Forest, set: &StateSet, rng: &mut R) -> Result<Forest> {
    let entrance = forest.entrance_indices(set);
    if entrance.is_empty() {
        return Err(Error::NoEntrance);
    }
    let chosen = entrance[rng.random_range(0..entrance.len())];
    let mut inds = forest.individuals().to_vec();
    for ind in inds.iter_mut() {
        ind.colour = Colour::White;
    }
    let mut cur = Some(chosen);
    while let Some(i) = cur {
        inds[i].colour = Colour::Blue;
        cur = inds[i].predecessor.and_then(|p| forest.index_of(p));
    }
    Ok(Forest::new(inds, forest.truncation()))
}

/// Grows a coloured tree around a spine: size-biased white attachments at
/// spine states off `B`, a plain white BMC at spine states in `B`.
pub fn decorate<R: Rng + ?Sized>(
    spine: &SpinePath,
    model: &Model,
    set: &StateSet,
    rng: &mut R,
    caps: SamplerCaps,
) -> Result<Forest> {
    spine.check(set)?;
    model.check_dim(set)?;
    if let Some(&s) = spine.states.iter().find(|&&s| s >= model.n_states()) {
        return Err(Error::UnknownState(s.to_string()));
    }
    let tables = model.tables();
    let mut g = Grower::new(model, None, caps);
    let mut spine_idx = Vec::with_capacity(spine.states.len());
    for &s in &spine.states {
        let pred = spine_idx.last().copied();
        spine_idx.push(g.builder.push(rng, pred, s, Colour::Blue));
    }
    let mut frontier = Vec::new();
    for (k, (&i, &x)) in spine_idx.iter().zip(&spine.states).enumerate() {
        if set.contains(x) {
            // The spine vertex itself is the root of the attached BMC.
            let n = tables.offspring[x].sample(rng);
            for _ in 0..n {
                if g.full() {
                    return Ok(g.finish());
                }
                let y = tables.motion[x].sample(rng);
                let c = g.builder.push(rng, Some(i), y, Colour::White);
                frontier.push((c, k + 1));
            }
        } else {
            let n = tables.size_biased[x]
                .as_ref()
                .ok_or(Error::ZeroMeanOffspring)?
                .sample(rng);
            for _ in 1..n {
                if g.full() {
                    return Ok(g.finish());
                }
                let y = tables.motion[x].sample(rng);
                let c = g.builder.push(rng, Some(i), y, Colour::White);
                frontier.push((c, k + 1));
            }
        }
    }
    if spine.status == SpineStatus::Truncated {
        g.truncation.generation_capped = true;
    }
    g.grow(frontier, rng);
    Ok(g.finish())
}

/// Plain BMC from `x` with importance weight `#H_B / h(x)` towards the
/// B-size-biased law.
pub fn reweighted_biased_sampler<R: Rng + ?Sized>(
    model: &Model,
    ht: &HTransform,
    x: usize,
    rng: &mut R,
    caps: SamplerCaps,
) -> (Forest, f64) {
    let forest = sample_bmc_from(model, x, rng, caps);
    let weight = forest.entrance_indices(ht.set()).len() as f64 / ht.h().get(x);
    (forest, weight)
}

/// Total mass of the biased offspring weights at `x`, summed over child
/// counts and location vectors by convolution. Equal to one off `B`.
pub fn biased_weight_total(model: &Model, ht: &HTransform, x: usize) -> f64 {
    let h = ht.h();
    let n = model.n_states();
    let p = model.motion();
    // For each child count, sum over locations of prod p * sum h factorises
    // into k * (p h)(x) * (sum_y p(x, y))^(k - 1).
    let row_mass: f64 = (0..n).map(|y| p.get(x, y)).sum();
    let ph: f64 = (0..n).map(|y| p.get(x, y) * h.get(y)).sum();
    model
        .offspring(x)
        .support()
        .iter()
        .map(|&(k, d)| d * k as f64 * ph * row_mass.powi(k as i32 - 1))
        .sum::<f64>()
        / h.get(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference::{model_a, model_c};
    use crate::model::{Kernel, OffspringLaw};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn b0() -> StateSet {
        StateSet::new(3, [0]).unwrap()
    }

    #[test]
    fn zero_offspring_keeps_initial_generation() {
        let m = Model::from_parts(
            Kernel::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            vec![OffspringLaw::deterministic(0); 2],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = sample_bmc(&m, &[(3, 0), (9, 1)], &mut rng, SamplerCaps::default()).unwrap();
        assert_eq!(f.len(), 2);
        assert!(sample_bmc(&m, &[(3, 0), (3, 1)], &mut rng, SamplerCaps::default()).is_err());
    }

    #[test]
    fn caps_set_flags() {
        let m = crate::model::reference::model_b();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let caps = SamplerCaps::new(3, 1_000_000).unwrap();
        let mut flagged = false;
        for _ in 0..200 {
            let f = sample_bmc_from(&m, 0, &mut rng, caps);
            assert!(f.generations().iter().all(|&g| g <= 3));
            flagged |= f.truncation().generation_capped;
        }
        assert!(flagged);
        let caps = SamplerCaps::new(10_000, 5).unwrap();
        let mut flagged = false;
        for _ in 0..200 {
            let f = sample_bmc_from(&m, 0, &mut rng, caps);
            assert!(f.len() <= 5);
            flagged |= f.truncation().population_capped;
        }
        assert!(flagged);
    }

    #[test]
    fn biased_root_in_b_is_plain() {
        let m = model_a();
        let ht = m.h_transform(&b0()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let f = sample_biased_bmc(&m, &ht, 0, &mut rng, SamplerCaps::default());
            let roots = f.roots();
            assert_eq!(f.individuals()[roots[0]].colour, Colour::Blue);
            assert!(f
                .individuals()
                .iter()
                .skip(1)
                .all(|i| i.colour == Colour::White));
        }
    }

    #[test]
    fn blue_off_b_always_has_two_children() {
        let m = model_a();
        let ht = m.h_transform(&b0()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let f = sample_biased_bmc(&m, &ht, 1, &mut rng, SamplerCaps::default());
            for (i, ind) in f.individuals().iter().enumerate() {
                if ind.colour == Colour::Blue && ind.location != 0 {
                    let kids = f.children_of(i);
                    assert_eq!(kids.len(), 2);
                    let blue = kids
                        .iter()
                        .filter(|&&c| f.individuals()[c].colour == Colour::Blue)
                        .count();
                    assert_eq!(blue, 1);
                }
            }
            assert!(f.validate_tree().is_valid());
        }
    }

    #[test]
    fn spine_examples() {
        let m = model_a();
        let ht = m.h_transform(&b0()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = sample_spine(&ht, 0, &mut rng, SamplerCaps::default());
        assert_eq!(s.states, vec![0]);
        for _ in 0..100 {
            let s = sample_spine(&ht, 2, &mut rng, SamplerCaps::default());
            assert_eq!(s.states[1], 1);
            assert_eq!(s.status, SpineStatus::Complete);
            assert_eq!(*s.states.last().unwrap(), 0);
        }
    }

    #[test]
    fn colour_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let miss = Forest::from_records("1 - 1 none\n2 1 2 none\n").unwrap();
        assert_eq!(
            colour(&miss, &b0(), &mut rng).unwrap_err(),
            Error::NoEntrance
        );
        let one = Forest::from_records("1 - 1 none\n2 1 0 none\n3 2 0 none\n").unwrap();
        let c = colour(&one, &b0(), &mut rng).unwrap();
        let cols: Vec<Colour> = c.individuals().iter().map(|i| i.colour).collect();
        assert_eq!(cols, vec![Colour::Blue, Colour::Blue, Colour::White]);
        let three =
            Forest::from_records("1 - 1 none\n2 1 0 none\n3 1 0 none\n4 1 0 none\n").unwrap();
        let mut counts = [0usize; 3];
        let n = 100_000;
        for _ in 0..n {
            let c = colour(&three, &b0(), &mut rng).unwrap();
            let k = (1..4)
                .find(|&k| c.individuals()[k].colour == Colour::Blue)
                .unwrap();
            counts[k - 1] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.01);
        }
    }

    #[test]
    fn decorate_examples() {
        let m = model_a();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let caps = SamplerCaps::default();
        assert!(matches!(
            decorate(
                &SpinePath {
                    states: vec![],
                    status: SpineStatus::Complete
                },
                &m,
                &b0(),
                &mut rng,
                caps
            ),
            Err(Error::InvalidSpine(_))
        ));
        let bad = SpinePath {
            states: vec![0, 1],
            status: SpineStatus::Truncated,
        };
        assert!(matches!(
            decorate(&bad, &m, &b0(), &mut rng, caps),
            Err(Error::InvalidSpine(_))
        ));
        // Single state in B: the spine vertex is a plain BMC root.
        let s = SpinePath::new(vec![0], &b0()).unwrap();
        let f = decorate(&s, &m, &b0(), &mut rng, caps).unwrap();
        assert_eq!(f.individuals()[0].colour, Colour::Blue);
        // Spine 2 -> 1 -> 0: each off-B vertex gets exactly one white child.
        let s = SpinePath::new(vec![2, 1, 0], &b0()).unwrap();
        let n = 20_000;
        let mut whites = [0usize; 2];
        for _ in 0..n {
            let f = decorate(&s, &m, &b0(), &mut rng, caps).unwrap();
            for (k, w) in whites.iter_mut().enumerate() {
                *w += f
                    .children_of(k)
                    .iter()
                    .filter(|&&c| f.individuals()[c].colour == Colour::White)
                    .count();
            }
            assert!(f.validate_tree().is_valid());
        }
        assert_eq!(whites, [n, n]);
    }

    #[test]
    fn degenerate_decoration_is_bare_spine_plus_endpoint_bmc() {
        let m = crate::model::reference::model_a_single_child();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = SpinePath::new(vec![2, 1, 0], &b0()).unwrap();
        for _ in 0..1000 {
            let f = decorate(&s, &m, &b0(), &mut rng, SamplerCaps::default()).unwrap();
            // Off-B spine vertices carry no white children.
            assert_eq!(f.children_of(0).len(), 1);
            assert_eq!(f.children_of(1).len(), 1);
            // The endpoint BMC is a killed chain: at most one child each.
            assert!(f
                .individuals()
                .iter()
                .enumerate()
                .all(|(i, _)| f.children_of(i).len() <= 1));
        }
    }

    #[test]
    fn biased_weights_sum_to_one() {
        let m = model_a();
        let ht = m.h_transform(&b0()).unwrap();
        for x in 1..3 {
            assert!((biased_weight_total(&m, &ht, x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn model_c_mean_population() {
        let m = model_c();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 20_000;
        let total: usize = (0..n)
            .map(|_| sample_bmc_from(&m, 0, &mut rng, SamplerCaps::default()).len())
            .sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 5.0).abs() < 0.25, "{mean}");
    }

    #[test]
    fn reweighted_sampler_weights() {
        let m = model_a();
        let ht = m.h_transform(&b0()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 50_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let (f, w) = reweighted_biased_sampler(&m, &ht, 1, &mut rng, SamplerCaps::default());
            if f.entrance_indices(ht.set()).is_empty() {
                assert_eq!(w, 0.0);
            }
            sum += w;
        }
        assert!((sum / n as f64 - 1.0).abs() < 0.05);
    }
}
