//! State spaces, motion kernels, offspring laws and the exact objects derived
//! from them: intensity operator, Green's function, the harmonic function of
//! a norming region and its h-transform.

mod file;
mod kernel;
mod law;
pub mod reference;

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;

pub use file::{parse_models, ModelEntry};
pub use kernel::{Kernel, Measure, StateSet};
pub use law::OffspringLaw;

use crate::error::{Error, Result};
use crate::linalg;

/// Row-sum tolerance for stochastic kernels and probability laws.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Default entrywise residual tolerance of exact linear solves.
pub const GREEN_TOL: f64 = 1e-10;
/// `G(x, B)` must exceed this for `B` to count as a norming region.
pub const NORMING_EPS: f64 = 1e-12;

/// Categorical sampling table over a finite list of outcomes.
#[derive(Debug, Clone)]
pub(crate) struct Table<T> {
    pub(crate) index: WeightedIndex<f64>,
    pub(crate) outcomes: Vec<T>,
}

impl<T: Copy> Table<T> {
    pub(crate) fn new(pairs: impl IntoIterator<Item = (T, f64)>) -> Option<Self> {
        let (outcomes, weights): (Vec<T>, Vec<f64>) =
            pairs.into_iter().filter(|p| p.1 > 0.0).unzip();
        let index = WeightedIndex::new(weights).ok()?;
        Some(Self { index, outcomes })
    }

    #[inline]
    pub(crate) fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> T {
        use rand::distr::Distribution;
        self.outcomes[self.index.sample(rng)]
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SamplingTables {
    pub(crate) motion: Vec<Table<usize>>,
    pub(crate) offspring: Vec<Table<u32>>,
    pub(crate) size_biased: Vec<Option<Table<u32>>>,
}

/// A branching Markov chain on a finite state space: motion kernel `p`,
/// offspring laws `d_x`, and cached derived quantities.
#[derive(Debug, Clone)]
pub struct Model {
    names: Vec<String>,
    motion: Kernel,
    offspring: Vec<OffspringLaw>,
    means: Vec<f64>,
    intensity: Kernel,
    translation_invariant: bool,
    green: OnceLock<Result<DMatrix<f64>>>,
    tables: SamplingTables,
}

impl Model {
    /// Validates and builds a model. `offspring[x]` is the law at state `x`.
    pub fn new(
        names: Vec<String>,
        motion: Kernel,
        offspring: Vec<Option<OffspringLaw>>,
    ) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::EmptyStateSpace);
        }
        if motion.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: motion.dim(),
            });
        }
        motion.check_stochastic("motion", STOCHASTIC_TOL)?;
        if offspring.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: offspring.len(),
            });
        }
        let offspring = offspring
            .into_iter()
            .enumerate()
            .map(|(x, l)| l.ok_or(Error::MissingOffspringLaw(x)))
            .collect::<Result<Vec<_>>>()?;
        let means: Vec<f64> = offspring.iter().map(OffspringLaw::mean).collect();
        let intensity =
            Kernel::from_matrix(DMatrix::from_fn(n, n, |x, y| means[x] * motion.get(x, y)))?;
        let tables = SamplingTables {
            motion: (0..n)
                .map(|x| Table::new(motion.row(x).into_iter().enumerate()).expect("stochastic row"))
                .collect(),
            offspring: offspring
                .iter()
                .map(|l| Table::new(l.support().iter().copied()).expect("valid law"))
                .collect(),
            size_biased: offspring
                .iter()
                .map(|l| {
                    l.size_biased()
                        .ok()
                        .and_then(|sb| Table::new(sb.support().iter().copied()))
                })
                .collect(),
        };
        Ok(Self {
            names,
            motion,
            offspring,
            means,
            intensity,
            translation_invariant: false,
            green: OnceLock::new(),
            tables,
        })
    }

    /// Convenience constructor with states named `0..n` and one law per state.
    pub fn from_parts(motion: Kernel, offspring: Vec<OffspringLaw>) -> Result<Self> {
        let names = (0..motion.dim()).map(|x| x.to_string()).collect();
        Self::new(names, motion, offspring.into_iter().map(Some).collect())
    }

    /// Marks the model as translation invariant on a group structure of the
    /// state space. Only consulted by the decorability criteria.
    pub fn with_translation_invariance(mut self, flag: bool) -> Self {
        self.translation_invariant = flag;
        self
    }

    pub fn translation_invariant(&self) -> bool {
        self.translation_invariant
    }

    pub fn n_states(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn state_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    pub fn state_set<S: AsRef<str>>(&self, names: &[S]) -> Result<StateSet> {
        let idx = names
            .iter()
            .map(|s| self.state_index(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        StateSet::new(self.n_states(), idx)
    }

    pub fn motion(&self) -> &Kernel {
        &self.motion
    }

    pub fn offspring(&self, x: usize) -> &OffspringLaw {
        &self.offspring[x]
    }

    /// Mean offspring count `m_x` per state.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Intensity operator `Q(x, y) = m_x p(x, y)`.
    pub fn intensity(&self) -> &Kernel {
        &self.intensity
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(self.intensity.matrix())
    }

    pub fn is_sub_markovian(&self) -> Result<()> {
        match self
            .means
            .iter()
            .enumerate()
            .find(|(_, &m)| m > 1.0 + STOCHASTIC_TOL)
        {
            Some((state, &mean)) => Err(Error::NotSubMarkovian { state, mean }),
            None => Ok(()),
        }
    }

    /// Green's function `G = sum_n Q^n`, solved from `(I - Q) G = I` with
    /// entrywise residual at most `tol`.
    pub fn green_function(&self, tol: f64) -> Result<DMatrix<f64>> {
        linalg::neumann_inverse(self.intensity.matrix(), tol)
    }

    /// Cached Green's function at the default tolerance.
    pub fn green(&self) -> Result<&DMatrix<f64>> {
        self.green
            .get_or_init(|| self.green_function(GREEN_TOL))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Checks `G(x, B) > NORMING_EPS` for every state.
    pub fn check_norming(&self, set: &StateSet) -> Result<()> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        self.check_dim(set)?;
        let g = self.green()?;
        let unreachable: Vec<usize> = (0..self.n_states())
            .filter(|&x| set.iter().map(|b| g[(x, b)]).sum::<f64>() <= NORMING_EPS)
            .collect();
        if unreachable.is_empty() {
            Ok(())
        } else {
            Err(Error::NotNormingRegion { unreachable })
        }
    }

    /// `h(x) = E^x[#H_B]`: equal to one on `B`, `Q`-harmonic off `B`.
    pub fn h_function(&self, set: &StateSet) -> Result<Measure> {
        self.check_norming(set)?;
        let n = self.n_states();
        let q = self.intensity.matrix();
        let off: Vec<usize> = set.complement().to_vec();
        let on: Vec<usize> = set.to_vec();
        let q_cc = linalg::submatrix(q, &off, &off);
        let rhs: Vec<f64> = off
            .iter()
            .map(|&x| on.iter().map(|&b| q[(x, b)]).sum())
            .collect();
        let h_off = linalg::solve_right_i_minus(&q_cc, &rhs)?;
        let mut h = vec![1.0; n];
        for (i, &x) in off.iter().enumerate() {
            h[x] = h_off[i];
        }
        if let Some(x) = (0..n).find(|&x| h[x].is_nan() || h[x] <= 0.0) {
            return Err(Error::NotNormingRegion {
                unreachable: vec![x],
            });
        }
        Measure::new(h)
    }

    /// Builds the h-transform bundle for a norming region.
    pub fn h_transform(&self, set: &StateSet) -> Result<HTransform> {
        let h = self.h_function(set)?;
        let kernel = h_transform_kernel(self, set, &h)?;
        let spine = (0..self.n_states())
            .map(|x| Table::new(kernel.row(x).into_iter().enumerate()))
            .collect();
        Ok(HTransform {
            set: set.clone(),
            h,
            kernel,
            spine,
        })
    }

    pub(crate) fn tables(&self) -> &SamplingTables {
        &self.tables
    }

    pub(crate) fn check_dim(&self, set: &StateSet) -> Result<()> {
        if set.universe_size() != self.n_states() {
            return Err(Error::DimensionMismatch {
                expected: self.n_states(),
                got: set.universe_size(),
            });
        }
        Ok(())
    }
}

/// `p^h(x, y) = 1_{B^c}(x) Q(x, y) h(y) / h(x)`.
pub fn h_transform_kernel(model: &Model, set: &StateSet, h: &Measure) -> Result<Kernel> {
    let n = model.n_states();
    if h.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h.len(),
        });
    }
    model.check_dim(set)?;
    let q = model.intensity();
    let m = DMatrix::from_fn(n, n, |x, y| {
        if set.contains(x) {
            0.0
        } else {
            q.get(x, y) * h.get(y) / h.get(x)
        }
    });
    let kernel = Kernel::from_matrix(m)?;
    for x in set.complement().iter() {
        let s = kernel.row_sum(x);
        if (s - 1.0).abs() > GREEN_TOL {
            return Err(Error::RowSumViolation {
                what: "h-transform",
                row: x,
                sum: s,
                expected: "1",
            });
        }
    }
    Ok(kernel)
}

/// The harmonic function of a norming region together with the spine
/// kernel `p^h` and its sampling table.
#[derive(Debug, Clone)]
pub struct HTransform {
    set: StateSet,
    h: Measure,
    kernel: Kernel,
    spine: Vec<Option<Table<usize>>>,
}

impl HTransform {
    pub fn set(&self) -> &StateSet {
        &self.set
    }

    pub fn h(&self) -> &Measure {
        &self.h
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub(crate) fn spine_table(&self, x: usize) -> Option<&Table<usize>> {
        self.spine[x].as_ref()
    }

    /// Replaces `h` without re-deriving the kernel. Used to check that the
    /// verification suite notices a corrupted harmonic function.
    pub fn with_corrupted_h(mut self, factor: f64) -> Self {
        let mut v = self.h.clone().into_values();
        for (x, hx) in v.iter_mut().enumerate() {
            if !self.set.contains(x) {
                *hx *= factor;
            }
        }
        self.h = Measure::new(v).expect("positive factor");
        self
    }
}

#[cfg(test)]
mod tests {
    use super::reference::*;
    use super::*;

    #[test]
    fn build_errors() {
        assert_eq!(
            Model::new(vec![], Kernel::zeros(0), vec![]).unwrap_err(),
            Error::EmptyStateSpace
        );
        let motion = Kernel::from_rows(&[vec![0.5, 0.7], vec![0.5, 0.5]]).unwrap();
        let law = OffspringLaw::deterministic(1);
        let err = Model::from_parts(motion, vec![law.clone(), law.clone()]).unwrap_err();
        assert!(matches!(err, Error::RowSumViolation { row: 0, .. }));
        let motion = Kernel::from_rows(&[vec![1.0]]).unwrap();
        let err = Model::new(vec!["a".into()], motion, vec![None]).unwrap_err();
        assert_eq!(err, Error::MissingOffspringLaw(0));
    }

    #[test]
    fn model_a_intensity_and_green() {
        let m = model_a();
        assert!(m.means().iter().all(|&v| (v - 0.8).abs() < 1e-15));
        let q = m.intensity();
        assert!((q.get(1, 0) - 0.4).abs() < 1e-15);
        assert!((q.get(0, 1) - 0.8).abs() < 1e-15);
        let g = m.green().unwrap();
        let expect = [[17.0, 20.0, 8.0], [10.0, 25.0, 10.0], [8.0, 20.0, 17.0]];
        for x in 0..3 {
            for y in 0..3 {
                assert!((g[(x, y)] - expect[x][y] / 9.0).abs() < 1e-12);
            }
        }
        // Truncated Neumann series as an independent route.
        let mut sum = DMatrix::identity(3, 3);
        let mut pow = DMatrix::identity(3, 3);
        for _ in 0..200 {
            pow = &pow * q.matrix();
            sum += &pow;
        }
        assert!((sum - g).amax() < 1e-10);
        let i = DMatrix::<f64>::identity(3, 3);
        assert!(((&i - q.matrix()) * g - &i).amax() < 1e-10);
        assert!((g * (&i - q.matrix()) - &i).amax() < 1e-10);
    }

    #[test]
    fn zero_offspring_gives_zero_intensity() {
        let m = Model::from_parts(
            Kernel::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            vec![OffspringLaw::deterministic(0); 2],
        )
        .unwrap();
        assert!(m.intensity().matrix().iter().all(|&v| v == 0.0));
        assert_eq!(m.green().unwrap(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn model_c_and_b_green() {
        assert!((model_c().intensity().get(0, 0) - 0.8).abs() < 1e-15);
        assert!((model_c().green().unwrap()[(0, 0)] - 5.0).abs() < 1e-12);
        assert!(matches!(
            model_b().green(),
            Err(Error::DivergentGreen { .. })
        ));
    }

    #[test]
    fn h_function_and_transform_on_model_a() {
        let m = model_a();
        let b = StateSet::new(3, [0]).unwrap();
        let ht = m.h_transform(&b).unwrap();
        let h = ht.h();
        assert_eq!(h.get(0), 1.0);
        assert!((h.get(1) - 10.0 / 17.0).abs() < 1e-14);
        assert!((h.get(2) - 8.0 / 17.0).abs() < 1e-14);
        let k = ht.kernel();
        assert!((k.get(1, 0) - 0.68).abs() < 1e-14);
        assert!((k.get(1, 2) - 0.32).abs() < 1e-14);
        assert!((k.get(2, 1) - 1.0).abs() < 1e-14);
        assert!(k.row(0).iter().all(|&v| v == 0.0));
        // First-entrance decomposition g(x, b) = h(x) g(b, b).
        let g = m.green().unwrap();
        for x in 0..3 {
            assert!((g[(x, 0)] - h.get(x) * g[(0, 0)]).abs() < 1e-12);
        }
    }

    #[test]
    fn h_is_one_on_full_set() {
        let m = model_a();
        let h = m.h_function(&StateSet::all(3)).unwrap();
        assert!(h.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn norming_region_detection() {
        // State 1 is absorbing with no offspring reaching state 0.
        let m = Model::from_parts(
            Kernel::from_rows(&[vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap(),
            vec![
                OffspringLaw::deterministic(1),
                OffspringLaw::new([(0, 0.5), (1, 0.5)]).unwrap(),
            ],
        )
        .unwrap();
        let err = m.h_function(&StateSet::new(2, [0]).unwrap()).unwrap_err();
        assert_eq!(
            err,
            Error::NotNormingRegion {
                unreachable: vec![1]
            }
        );
        assert_eq!(
            m.h_function(&StateSet::new(2, []).unwrap()).unwrap_err(),
            Error::EmptySet
        );
    }
}
