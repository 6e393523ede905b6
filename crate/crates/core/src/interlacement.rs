//! Quasi-paths hitting a region, the death map, and the branching
//! interlacement sampler built from them.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::bmc::{decorate, SamplerCaps, SpinePath, SpineStatus};
use crate::decorability::decorability_constant;
use crate::error::{Error, Result};
use crate::forest::{Colour, Forest, ForestBuilder, Truncation};
use crate::model::{Measure, Model, StateSet};
use crate::potential::KuznetsovSampler;
use crate::verify::TestReport;

/// z-score cut of the per-state occupation tests.
pub const Z_CUT: f64 = 4.0;

/// A path hitting `B`, stored anchored at its entrance time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuasiPath {
    /// States strictly before the anchor, chronological, all off `B`.
    pub backward: Vec<usize>,
    pub anchor: usize,
    pub forward: Vec<usize>,
    pub backward_truncated: bool,
    pub forward_truncated: bool,
}

impl QuasiPath {
    pub fn states(&self) -> Vec<usize> {
        let mut s = self.backward.clone();
        s.push(self.anchor);
        s.extend_from_slice(&self.forward);
        s
    }

    /// The same path as a linear forest, first state at the root.
    pub fn to_linear_forest<R: Rng + ?Sized>(&self, rng: &mut R) -> Forest {
        let mut b = ForestBuilder::new();
        let mut prev = None;
        for s in self.states() {
            prev = Some(b.push(rng, prev, s, Colour::Uncoloured));
        }
        b.finish(Truncation {
            generation_capped: self.backward_truncated || self.forward_truncated,
            population_capped: false,
        })
    }
}

/// Removes everything after the entrance time.
pub fn death_b(path: &QuasiPath) -> QuasiPath {
    QuasiPath {
        forward: Vec::new(),
        forward_truncated: false,
        ..path.clone()
    }
}

/// Precomputed sampler for the restriction of the quasi-process of an
/// excessive measure to paths hitting `B`.
#[derive(Debug, Clone)]
pub struct HittingSampler<'a> {
    model: &'a Model,
    set: StateSet,
    anchors: KuznetsovSampler,
    mass: f64,
}

impl<'a> HittingSampler<'a> {
    pub fn new(nu: &Measure, model: &'a Model, set: &StateSet) -> Result<Self> {
        model.is_sub_markovian()?;
        let anchors = KuznetsovSampler::new(nu, model, set, set)?;
        let mass = anchors.entrance().total();
        Ok(Self {
            model,
            set: set.clone(),
            anchors,
            mass,
        })
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    pub fn set(&self) -> &StateSet {
        &self.set
    }

    /// `bar mu_B`.
    pub fn entrance(&self) -> &Measure {
        self.anchors.entrance()
    }

    /// `|bar mu_B|`, the rate per unit `u`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R, caps: SamplerCaps) -> QuasiPath {
        let anchor = self.anchors.sample_anchor(rng);
        let (backward, _, backward_truncated) = self.anchors.sample_backward(anchor, rng, caps);
        // Forward: the Q-chain, surviving each step with probability m_x.
        let tables = self.model.tables();
        let means = self.model.means();
        let mut forward = Vec::new();
        let mut cur = anchor;
        let mut forward_truncated = false;
        loop {
            if rng.random::<f64>() >= means[cur] {
                break;
            }
            if forward.len() >= caps.max_generations {
                forward_truncated = true;
                break;
            }
            cur = tables.motion[cur].sample(rng);
            forward.push(cur);
        }
        QuasiPath {
            backward,
            anchor,
            forward,
            backward_truncated,
            forward_truncated,
        }
    }

    pub fn sample_count<R: Rng + ?Sized>(&self, u: f64, rng: &mut R) -> Result<u64> {
        poisson(u * self.mass, rng)
    }

    pub fn sample_paths<R: Rng + ?Sized>(
        &self,
        u: f64,
        rng: &mut R,
        caps: SamplerCaps,
    ) -> Result<Vec<QuasiPath>> {
        let k = self.sample_count(u, rng)?;
        Ok((0..k).map(|_| self.sample_path(rng, caps)).collect())
    }
}

fn poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<u64> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "intensity {rate} must be finite and non-negative"
        )));
    }
    if rate == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(rate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(d.sample(rng) as u64)
}

/// Poisson(`u |bar mu_B|`) paths of the quasi-process of `nu` that hit `B`.
pub fn sample_hitting_quasi_process<R: Rng + ?Sized>(
    nu: &Measure,
    model: &Model,
    set: &StateSet,
    u: f64,
    rng: &mut R,
    caps: SamplerCaps,
) -> Result<Vec<QuasiPath>> {
    HittingSampler::new(nu, model, set)?.sample_paths(u, rng, caps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterlacementSample {
    pub trees: Vec<Forest>,
    /// `|bar mu_B|`.
    pub intensity_mass: f64,
    /// `bar mu_B`, which is also the entrance law per unit `u`.
    pub entrance: Measure,
    pub u: f64,
    pub seed: Option<u64>,
    /// Paths drawn before thinning.
    pub paths: usize,
    /// The constant `C` of the model, when finite.
    pub decorability_constant: Option<f64>,
}

/// Branching interlacement sampler reusing precomputed tables.
#[derive(Debug, Clone)]
pub struct InterlacementSampler<'a> {
    paths: HittingSampler<'a>,
    constant: Option<f64>,
}

impl<'a> InterlacementSampler<'a> {
    pub fn new(nu: &Measure, model: &'a Model, set: &StateSet) -> Result<Self> {
        let paths = HittingSampler::new(nu, model, set)?;
        let constant = decorability_constant(model, set).ok();
        Ok(Self { paths, constant })
    }

    pub fn paths(&self) -> &HittingSampler<'a> {
        &self.paths
    }

    /// Decorates the surviving part of one path and thins it. `None` when
    /// the tree is thinned out.
    pub fn tree_from_path<R: Rng + ?Sized>(
        &self,
        path: &QuasiPath,
        rng: &mut R,
        caps: SamplerCaps,
    ) -> Result<Option<Forest>> {
        let killed = death_b(path);
        let mut states = killed.backward.clone();
        states.push(killed.anchor);
        let spine = SpinePath {
            states,
            status: SpineStatus::Complete,
        };
        let mut tree = decorate(&spine, self.paths.model, &self.paths.set, rng, caps)?;
        if killed.backward_truncated {
            let t = tree.truncation();
            tree.set_truncation(Truncation {
                generation_capped: true,
                ..t
            });
        }
        let entrance = tree.entrance_indices(&self.paths.set).len();
        let keep = rng.random::<f64>() * (entrance as f64) < 1.0;
        Ok(keep.then_some(tree))
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        u: f64,
        rng: &mut R,
        caps: SamplerCaps,
    ) -> Result<InterlacementSample> {
        let k = self.paths.sample_count(u, rng)?;
        let mut trees = Vec::new();
        for _ in 0..k {
            let path = self.paths.sample_path(rng, caps);
            if let Some(t) = self.tree_from_path(&path, rng, caps)? {
                trees.push(t);
            }
        }
        Ok(InterlacementSample {
            trees,
            intensity_mass: self.paths.mass,
            entrance: self.paths.entrance().clone(),
            u,
            seed: None,
            paths: k as usize,
            decorability_constant: self.constant,
        })
    }
}

pub fn sample_branching_interlacement<R: Rng + ?Sized>(
    nu: &Measure,
    model: &Model,
    set: &StateSet,
    u: f64,
    rng: &mut R,
    caps: SamplerCaps,
) -> Result<InterlacementSample> {
    InterlacementSampler::new(nu, model, set)?.sample(u, rng, caps)
}

/// Per-replica statistics of an interlacement sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaSummary {
    pub retained: u64,
    /// Individuals per state over all trees.
    pub occupation: Vec<f64>,
    /// Individuals per state over the progeny of the B-entrance of all trees.
    pub progeny_occupation: Vec<f64>,
    /// B-entrance individuals per state over all trees.
    pub entrance: Vec<f64>,
    pub truncated: bool,
    pub all_hit_b: bool,
}

impl ReplicaSummary {
    pub fn of(sample: &InterlacementSample, n_states: usize, set: &StateSet) -> Self {
        let mut s = Self {
            retained: sample.trees.len() as u64,
            occupation: vec![0.0; n_states],
            progeny_occupation: vec![0.0; n_states],
            entrance: vec![0.0; n_states],
            truncated: false,
            all_hit_b: true,
        };
        for t in &sample.trees {
            s.truncated |= t.truncation().any();
            for ind in t.individuals() {
                s.occupation[ind.location] += 1.0;
            }
            let ent = t.entrance_indices(set);
            s.all_hit_b &= !ent.is_empty();
            for &i in &ent {
                s.entrance[t.individuals()[i].location] += 1.0;
                for j in t.descendants(i) {
                    s.progeny_occupation[t.individuals()[j].location] += 1.0;
                }
            }
        }
        s
    }
}

/// Running first and second moments of per-replica vectors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorMoments {
    pub n: u64,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl VectorMoments {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            sum: vec![0.0; dim],
            sum_sq: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, v: &[f64]) {
        self.n += 1;
        for (i, &x) in v.iter().enumerate() {
            self.sum[i] += x;
            self.sum_sq[i] += x * x;
        }
    }

    pub fn merge(&mut self, other: VectorMoments) {
        self.n += other.n;
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sum_sq[i] += other.sum_sq[i];
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        self.sum.iter().map(|s| s / self.n as f64).collect()
    }

    /// Unbiased sample variance per coordinate.
    pub fn variance(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, q)| {
                if self.n > 1 {
                    ((q - s * s / n) / (n - 1.0)).max(0.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// z-scores of the mean divided by `u` against `target`. A coordinate
    /// with zero variance scores zero on an exact match and infinity otherwise.
    pub fn z_scores(&self, u: f64, target: &[f64]) -> Vec<f64> {
        let n = self.n as f64;
        self.mean()
            .iter()
            .zip(self.variance())
            .zip(target)
            .map(|((m, v), t)| {
                let diff = m / u - t;
                let se = (v / n).sqrt() / u;
                if se > 0.0 {
                    diff / se
                } else if diff.abs() < 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }
}

/// Exact Π_B-occupation per unit `u`: `sum_{z in B} bar mu_B(z) g(z, .)`.
pub fn progeny_occupation_target(entrance: &Measure, model: &Model) -> Result<Vec<f64>> {
    let g = model.green()?;
    let n = model.n_states();
    Ok((0..n)
        .map(|y| (0..n).map(|z| entrance.get(z) * g[(z, y)]).sum())
        .collect())
}

/// Compares per-state z-scores of `moments / u` with `target` against [`Z_CUT`].
pub fn occupation_z_report(
    name: &str,
    moments: &VectorMoments,
    u: f64,
    target: &[f64],
    seed: u64,
) -> TestReport {
    if u == 0.0 || moments.n == 0 {
        return TestReport::vacuous(name, "u = 0");
    }
    let z = moments.z_scores(u, target);
    let worst = z.iter().map(|v| v.abs()).fold(0.0, f64::max);
    TestReport::new(name, worst, Z_CUT)
        .with_samples(moments.n, seed)
        .with_note(format!(
            "z = {:?}",
            z.iter()
                .map(|v| (v * 100.0).round() / 100.0)
                .collect::<Vec<_>>()
        ))
}

/// Π_B-occupation of samples per unit `u` against `bar mu_B G`.
pub fn progeny_occupation_check(
    samples: &[InterlacementSample],
    model: &Model,
    set: &StateSet,
) -> Result<TestReport> {
    let name = "progeny-occupation";
    let Some(first) = samples.first() else {
        return Ok(TestReport::vacuous(name, "no samples"));
    };
    if first.u == 0.0 {
        return Ok(TestReport::vacuous(name, "u = 0"));
    }
    let n = model.n_states();
    let mut m = VectorMoments::new(n);
    for s in samples {
        m.push(&ReplicaSummary::of(s, n, set).progeny_occupation);
    }
    let target = progeny_occupation_target(&first.entrance, model)?;
    Ok(occupation_z_report(
        name,
        &m,
        first.u,
        &target,
        first.seed.unwrap_or(0),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference::model_a;
    use crate::potential::green_row;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn b0() -> StateSet {
        StateSet::new(3, [0]).unwrap()
    }

    #[test]
    fn death_b_examples() {
        let p = QuasiPath {
            backward: vec![2, 1],
            anchor: 0,
            forward: vec![1, 0, 1],
            backward_truncated: false,
            forward_truncated: false,
        };
        let d = death_b(&p);
        assert_eq!(d.backward, vec![2, 1]);
        assert!(d.forward.is_empty());
        assert_eq!(death_b(&d), d);
        let empty = QuasiPath {
            forward: vec![],
            ..p
        };
        assert_eq!(death_b(&empty), empty);
    }

    #[test]
    fn u_zero_gives_nothing() {
        let m = model_a();
        let nu = green_row(&m, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let caps = SamplerCaps::default();
        assert!(
            sample_hitting_quasi_process(&nu, &m, &b0(), 0.0, &mut rng, caps)
                .unwrap()
                .is_empty()
        );
        let s = sample_branching_interlacement(&nu, &m, &b0(), 0.0, &mut rng, caps).unwrap();
        assert!(s.trees.is_empty());
        assert!((s.intensity_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_supercritical_and_non_excessive() {
        let m = crate::model::reference::single_state(0.5);
        let ones = Measure::new(vec![1.0]).unwrap();
        assert!(HittingSampler::new(&ones, &m, &StateSet::all(1)).is_ok());
        let a = model_a();
        let bad = Measure::new(vec![1.0; 3]).unwrap();
        assert!(matches!(
            HittingSampler::new(&bad, &a, &b0()),
            Err(Error::NotExcessive { .. })
        ));
    }

    #[test]
    fn paths_are_anchored_at_entrance() {
        let m = model_a();
        let nu = Measure::new(
            (0..3)
                .map(|y| (0..3).map(|x| green_row(&m, x).unwrap().get(y)).sum())
                .collect(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = HittingSampler::new(&nu, &m, &b0()).unwrap();
        for _ in 0..500 {
            let p = s.sample_path(&mut rng, SamplerCaps::default());
            assert_eq!(p.anchor, 0);
            assert!(p.backward.iter().all(|&x| x != 0));
        }
    }

    #[test]
    fn retained_trees_hit_b() {
        let m = model_a();
        let nu = green_row(&m, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sampler = InterlacementSampler::new(&nu, &m, &b0()).unwrap();
        for _ in 0..300 {
            let s = sampler
                .sample(1.0, &mut rng, SamplerCaps::default())
                .unwrap();
            assert!(ReplicaSummary::of(&s, 3, &b0()).all_hit_b);
            assert!(s.trees.iter().all(|t| t.validate_tree().is_valid()));
        }
    }

    #[test]
    fn moments_z_scores() {
        let mut m = VectorMoments::new(1);
        for v in [1.0, 2.0, 3.0] {
            m.push(&[v]);
        }
        assert_eq!(m.mean(), vec![2.0]);
        assert!((m.variance()[0] - 1.0).abs() < 1e-15);
        assert_eq!(m.z_scores(1.0, &[2.0]), vec![0.0]);
    }
}
