//! The acceptance matrix as callable checks. Shared by the `acceptance` test
//! target and the `verify` command.

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use super::encoding::{encode_truncated, linear_states};
use super::enumerate::{enumerate_reweighted_coloured, enumerate_truncated_biased, DEFAULT_BUDGET};
use super::pmf::{empirical_pmf, tv_distance, tv_threshold, Scheme, TreePmf};
use super::stats::{
    binomial_z, chi_square_critical, chi_square_gof, chi_square_homogeneity, two_sample_z,
};
use super::TestReport;
use crate::bmc::{decorate, sample_bmc_from, sample_spine, SamplerCaps};
use crate::decorability::{
    criteria_report, decorability_profile, hit_probability, hit_probability_bounds, Verdict,
    DEFAULT_DEPTH,
};
use crate::error::{Error, Result};
use crate::interlacement::{
    occupation_z_report, progeny_occupation_target, HittingSampler, InterlacementSample,
    InterlacementSampler, ReplicaSummary, VectorMoments,
};
use crate::linalg;
use crate::model::reference::{
    model_a, model_a_single_child, model_b, model_c, single_state, two_block_toy,
};
use crate::model::{HTransform, Measure, Model, StateSet};
use crate::potential::{
    default_exhaustion, entrance_family_check, entrance_measure, excessive_to_occupation,
    green_row, occupation_to_excessive, ph_occupation_discrepancy, potential_of,
    riesz_decomposition, taboo_return_kernel, EntranceFamily, KuznetsovSampler,
};
use crate::replicas::{fold_replicas, map_replicas, Workers};

/// Tolerance of the exact identities.
pub const EXACT_TOL: f64 = 1e-9;
/// Tolerance of the Riesz decomposition checks.
pub const RIESZ_TOL: f64 = 1e-10;
/// Significance level of the chi-square tests.
pub const CHI_ALPHA: f64 = 1e-3;
/// Cut for the "within 3 sigma" checks.
pub const SIGMA3: f64 = 3.0;
/// Cut for per-state occupation z-scores.
pub const SIGMA4: f64 = 4.0;
/// Allowed deviation of the retained-count dispersion from one.
pub const DISPERSION_TOL: f64 = 0.03;

/// Smallest replica count used when sizes are scaled down.
const MIN_RUNS: u64 = 2_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub workers: Workers,
    /// Multiplies every replica count (1.0 runs the full matrix).
    pub scale: f64,
    /// Multiplies `h` off `B` in the spine checks.
    pub corrupt_h: Option<f64>,
    pub caps: SamplerCaps,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            workers: Workers::default(),
            scale: 1.0,
            corrupt_h: None,
            caps: SamplerCaps::default(),
        }
    }
}

impl SuiteConfig {
    pub fn runs(&self, full: u64) -> u64 {
        ((full as f64 * self.scale).round() as u64).max(MIN_RUNS.min(full))
    }

    /// Seed of the `k`-th sub-check.
    pub fn sub_seed(&self, k: u64) -> u64 {
        self.seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub report: TestReport,
    pub elapsed: Duration,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<36} {} ({:.2}s)",
            self.id,
            self.title,
            if self.report.passed { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64()
        )
    }
}

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "exact potential theory"),
    (2, "riesz decomposition"),
    (3, "spine identity, exact leg"),
    (4, "spine identity, sampling leg"),
    (5, "hit-probability bounds"),
    (6, "kuznetsov anchoring"),
    (7, "branching interlacement"),
    (8, "degenerate-branching reduction"),
    (9, "decorability criteria"),
    (10, "determinism"),
];

/// Runs one criterion of the matrix. Errors are reported as failures.
pub fn run_criterion(id: u8, cfg: &SuiteConfig) -> CriterionResult {
    let title = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .map(|c| c.1)
        .unwrap_or("unknown");
    let start = Instant::now();
    let result = match id {
        1 => exact_potential_suite(),
        2 => riesz_suite(),
        3 => spine_exact_suite(cfg),
        4 => spine_sampling_suite(cfg),
        5 => hit_bounds_suite(cfg),
        6 => kuznetsov_suite(cfg),
        7 => interlacement_suite(cfg),
        8 => degenerate_suite(cfg),
        9 => decorability_suite(),
        10 => determinism_suite(cfg),
        _ => Err(Error::InvalidArgument(format!("no criterion {id}"))),
    };
    let report = result
        .unwrap_or_else(|e| TestReport::new(title, f64::INFINITY, 0.0).with_note(e.to_string()));
    CriterionResult {
        id,
        title,
        report,
        elapsed: start.elapsed(),
    }
}

pub fn run_all(cfg: &SuiteConfig) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .map(|&(id, _)| run_criterion(id, cfg))
        .collect()
}

fn b(n: usize, xs: &[usize]) -> StateSet {
    StateSet::new(n, xs.iter().copied()).expect("states in range")
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn exact(name: impl Into<String>, d: f64) -> TestReport {
    TestReport::new(name, d, EXACT_TOL)
}

/// `nu|_B (G|_{BxB})^{-1}`, an entrance measure computed without `Q^B`.
fn entrance_by_inverse(nu: &Measure, model: &Model, set: &StateSet) -> Result<Vec<f64>> {
    let on = set.to_vec();
    let gbb = linalg::submatrix(model.green()?, &on, &on);
    let inv = gbb
        .try_inverse()
        .ok_or_else(|| Error::SolveFailure("G restricted to B is singular".into()))?;
    let mut out = vec![0.0; model.n_states()];
    for (j, &y) in on.iter().enumerate() {
        out[y] = on
            .iter()
            .enumerate()
            .map(|(i, &x)| nu.get(x) * inv[(i, j)])
            .sum();
    }
    Ok(out)
}

/// Criterion 1: Green's function, `h`, the taboo return kernel and the
/// occupation/excessive correspondence on MODEL-A.
pub fn exact_potential_suite() -> Result<TestReport> {
    let m = model_a();
    let n = m.n_states();
    let q = m.intensity().matrix();
    let g = m.green()?;
    let id = DMatrix::<f64>::identity(n, n);
    let mut parts = vec![exact("(I-Q)G=I", max_abs(&((&id - q) * g - &id)))];

    let g0 = green_row(&m, 0)?;
    let g1 = green_row(&m, 1)?;
    let g2 = green_row(&m, 2)?;
    let nus = [
        ("g(0,.)", g0.clone()),
        ("g(1,.)", g1),
        ("g(0,.)+2g(2,.)", g0.add(&g2.scale(2.0))),
    ];

    for set in [b(n, &[0]), b(n, &[0, 1])] {
        let tag = format!("B={:?}", set.to_vec());
        let h = m.h_function(&set)?;
        let qh = m.intensity().right_apply(h.values());
        let resid = (0..n)
            .map(|x| {
                if set.contains(x) {
                    (h.get(x) - 1.0).abs()
                } else {
                    (h.get(x) - qh[x]).abs()
                }
            })
            .fold(0.0, f64::max);
        parts.push(exact(format!("h system {tag}"), resid));
        if set.len() == 1 {
            let d = (h.get(1) - 10.0 / 17.0)
                .abs()
                .max((h.get(2) - 8.0 / 17.0).abs());
            parts.push(exact(format!("h values {tag}"), d));
        }

        let on = set.to_vec();
        let qb = taboo_return_kernel(&m, &set)?;
        let gbb = linalg::submatrix(g, &on, &on);
        let qbb = linalg::submatrix(qb.matrix(), &on, &on);
        let k = on.len();
        let idb = DMatrix::<f64>::identity(k, k);
        parts.push(exact(
            format!("G_BB(I-Q^B)=I {tag}"),
            max_abs(&(&gbb * (&idb - &qbb) - &idb)),
        ));
        parts.push(exact(
            format!("p^h occupation {tag}"),
            ph_occupation_discrepancy(&m, &set)?,
        ));

        for (label, nu) in &nus {
            let mu = excessive_to_occupation(nu, &m, &set)?;
            let back = occupation_to_excessive(&mu, &m, &set)?;
            let again = excessive_to_occupation(&back, &m, &set)?;
            let d = nu
                .max_abs_diff(back.values())
                .max(mu.max_abs_diff(again.values()));
            parts.push(exact(format!("round-trip {label} {tag}"), d));

            let ent = entrance_measure(nu, &m, &set)?;
            let d_restr = on
                .iter()
                .map(|&y| {
                    (nu.get(y) - on.iter().map(|&z| ent.get(z) * g[(z, y)]).sum::<f64>()).abs()
                })
                .fold(0.0, f64::max);
            let d_ent = ent.max_abs_diff(&entrance_by_inverse(nu, &m, &set)?);
            parts.push(exact(format!("nu|_B = mu_B G_BB {label} {tag}"), d_restr));
            parts.push(exact(format!("mu_B = nu|_B(I-Q^B) {label} {tag}"), d_ent));

            let fam = EntranceFamily::from_excessive(nu, &m, default_exhaustion(&set))?;
            parts.push(entrance_family_check(&fam, &m));
        }
    }
    Ok(TestReport::all("exact-potential", &parts))
}

/// Criterion 2: decomposition of a pure potential on MODEL-A and of a measure
/// with an invariant part on a two-block toy model.
pub fn riesz_suite() -> Result<TestReport> {
    let a = model_a();
    let r = riesz_decomposition(&green_row(&a, 0)?, &a)?;
    let mut parts = vec![
        TestReport::new(
            "pot = delta_0",
            r.pot.max_abs_diff(Measure::delta(3, 0).values()),
            RIESZ_TOL,
        ),
        TestReport::new(
            "inv = 0",
            r.inv.values().iter().fold(0.0, |acc, v| acc.max(v.abs())),
            RIESZ_TOL,
        ),
    ];

    let toy = two_block_toy();
    let nu = Measure::new(vec![1.0, 1.0, 4.0 / 3.0, 2.0 / 3.0])?;
    let r = riesz_decomposition(&nu, &toy)?;
    let inv_q = toy.intensity().left_apply(r.inv.values());
    parts.push(TestReport::new(
        "inv Q = inv",
        r.inv.max_abs_diff(&inv_q),
        RIESZ_TOL,
    ));
    let rebuilt = potential_of(&r.pot, &toy)?.add(&r.inv);
    parts.push(TestReport::new(
        "pot G + inv = nu",
        nu.max_abs_diff(rebuilt.values()),
        RIESZ_TOL,
    ));
    parts.push(
        TestReport::new(
            "inv non-trivial",
            if r.inv.total() > 0.5 { 0.0 } else { 1.0 },
            0.0,
        )
        .with_note(format!("|inv| = {}", r.inv.total())),
    );
    parts.push(TestReport::new(
        "inv = (1,1,0,0)",
        r.inv.max_abs_diff(&[1.0, 1.0, 0.0, 0.0]),
        RIESZ_TOL,
    ));
    Ok(TestReport::all("riesz", &parts))
}

fn spine_h(model: &Model, set: &StateSet, corrupt: Option<f64>) -> Result<HTransform> {
    let ht = model.h_transform(set)?;
    Ok(match corrupt {
        Some(f) => ht.with_corrupted_h(f),
        None => ht,
    })
}

/// TV between the reweighted plain law (with the true `h`) and the biased law
/// enumerated with `ht`.
pub fn spine_exact_leg(
    model: &Model,
    ht: &HTransform,
    x: usize,
    depth: usize,
) -> Result<TestReport> {
    let truth = model.h_transform(ht.set())?;
    let a = enumerate_reweighted_coloured(model, &truth, x, depth, DEFAULT_BUDGET)?;
    let b = enumerate_truncated_biased(model, ht, x, depth, DEFAULT_BUDGET)?;
    Ok(TestReport::new(
        format!("spine-exact x={x} depth={depth}"),
        tv_distance(&a, &b)?,
        EXACT_TOL,
    )
    .with_note(format!("support {}", b.support_len())))
}

/// Empirical law of `decorate(sample_spine(x))` cut after `depth` generations.
#[allow(clippy::too_many_arguments)]
pub fn decorated_spine_pmf(
    model: &Model,
    ht: &HTransform,
    x: usize,
    depth: usize,
    n: u64,
    seed: u64,
    workers: Workers,
    caps: SamplerCaps,
) -> TreePmf {
    let set = ht.set().clone();
    empirical_pmf(Scheme::Coloured, n, seed, workers, |rng| {
        let spine = sample_spine(ht, x, rng, caps);
        let tree = decorate(&spine, model, &set, rng, caps).ok()?;
        if tree.truncation().any() {
            return None;
        }
        Some(encode_truncated(&tree, depth))
    })
}

#[allow(clippy::too_many_arguments)]
pub fn spine_sampling_leg(
    model: &Model,
    ht: &HTransform,
    x: usize,
    depth: usize,
    n: u64,
    seed: u64,
    workers: Workers,
    caps: SamplerCaps,
) -> Result<TestReport> {
    let exact = enumerate_truncated_biased(model, ht, x, depth, DEFAULT_BUDGET)?;
    let emp = decorated_spine_pmf(model, ht, x, depth, n, seed, workers, caps);
    let support = exact.support_len();
    Ok(TestReport::new(
        format!("spine-sampling x={x} depth={depth}"),
        tv_distance(&exact, &emp)?,
        tv_threshold(support, n),
    )
    .with_samples(n, seed)
    .with_note(format!("support {support}")))
}

/// Both legs of the spine identity.
#[allow(clippy::too_many_arguments)]
pub fn spine_identity_test(
    model: &Model,
    ht: &HTransform,
    x: usize,
    depth: usize,
    n: u64,
    seed: u64,
    workers: Workers,
    caps: SamplerCaps,
) -> Result<TestReport> {
    let a = spine_exact_leg(model, ht, x, depth)?;
    let c = spine_sampling_leg(model, ht, x, depth, n, seed, workers, caps)?;
    Ok(
        TestReport::all(format!("spine-identity x={x} depth={depth}"), &[a, c])
            .with_samples(n, seed),
    )
}

/// Criterion 3.
pub fn spine_exact_suite(cfg: &SuiteConfig) -> Result<TestReport> {
    let m = model_a();
    let ht = spine_h(&m, &b(3, &[0]), cfg.corrupt_h)?;
    let parts = [
        spine_exact_leg(&m, &ht, 1, 2)?,
        spine_exact_leg(&m, &ht, 2, 2)?,
    ];
    Ok(TestReport::all("spine-exact", &parts))
}

/// Criterion 4.
pub fn spine_sampling_suite(cfg: &SuiteConfig) -> Result<TestReport> {
    let m = model_a();
    let ht = spine_h(&m, &b(3, &[0]), cfg.corrupt_h)?;
    let n = cfg.runs(1_000_000);
    let parts = [
        spine_sampling_leg(&m, &ht, 1, 2, n, cfg.sub_seed(41), cfg.workers, cfg.caps)?,
        spine_sampling_leg(&m, &ht, 2, 2, n, cfg.sub_seed(42), cfg.workers, cfg.caps)?,
    ];
    Ok(TestReport::all("spine-sampling", &parts).with_samples(n, cfg.seed))
}

/// Monte Carlo hit frequencies of `B` from every state, checked against the
/// lower/upper bounds and against the exact hit probabilities.
pub fn hit_bounds_test(
    model: &Model,
    set: &StateSet,
    n: u64,
    seed: u64,
    workers: Workers,
    caps: SamplerCaps,
) -> Result<TestReport> {
    let exact = hit_probability(model, set)?;
    let mut parts = Vec::new();
    for x in 0..model.n_states() {
        let (lo, hi) = hit_probability_bounds(model, set, x)?;
        let sub = seed ^ (x as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let hits = fold_replicas(
            n,
            sub,
            workers,
            || 0u64,
            |acc, _, rng| {
                let f = sample_bmc_from(model, x, rng, caps);
                if !f.entrance_indices(set).is_empty() {
                    *acc += 1;
                }
            },
            |acc, p| *acc += p,
        );
        let p = hits as f64 / n as f64;
        let violation = (lo - p).max(p - hi).max(0.0);
        parts.push(
            TestReport::new(format!("bounds x={x}"), violation, 0.0)
                .with_samples(n, sub)
                .with_note(format!("{lo:.5} <= {p:.5} <= {hi:.5}")),
        );
        let z = binomial_z(hits, n, exact.get(x)).abs();
        parts.push(
            TestReport::new(format!("exact x={x}"), z, SIGMA4)
                .with_note(format!("exact {:.5}", exact.get(x))),
        );
    }
    Ok(TestReport::all("hit-bounds", &parts).with_samples(n, seed))
}

/// Criterion 5.
pub fn hit_bounds_suite(cfg: &SuiteConfig) -> Result<TestReport> {
    let m = model_a();
    let set = b(3, &[0]);
    let profile = decorability_profile(&m, &set)?;
    let (argmax, c) =
        profile.iter().enumerate().fold(
            (0, 0.0),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
    let parts = [
        TestReport::new("C", (c - 3.1536).abs(), 1e-3).with_note(format!("C = {c:.5}")),
        TestReport::new("argmax C = 2", argmax.abs_diff(2) as f64, 0.0),
        hit_bounds_test(
            &m,
            &set,
            cfg.runs(1_000_000),
            cfg.sub_seed(51),
            cfg.workers,
            cfg.caps,
        )?,
    ];
    Ok(TestReport::all("hit-probability", &parts).with_samples(cfg.runs(1_000_000), cfg.seed))
}

/// Anchor frequencies of Kuznetsov paths anchored in `set` against the
/// normalised entrance measure, computed as `nu|_B (G|_{BxB})^{-1}`.
pub fn anchor_frequency_test(
    nu: &Measure,
    model: &Model,
    set: &StateSet,
    n: u64,
    seed: u64,
    workers: Workers,
    caps: SamplerCaps,
) -> Result<TestReport> {
    let sampler = KuznetsovSampler::new(nu, model, set, set)?;
    let dim = model.n_states();
    let counts = fold_replicas(
        n,
        seed,
        workers,
        || vec![0u64; dim],
        |acc, _, rng| acc[sampler.sample(rng, caps).anchor] += 1,
        |acc, p| acc.iter_mut().zip(p).for_each(|(a, b)| *a += b),
    );
    let ent = entrance_by_inverse(nu, model, set)?;
    let total: f64 = ent.iter().sum();
    let z: Vec<f64> = (0..dim)
        .map(|x| binomial_z(counts[x], n, ent[x] / total))
        .collect();
    let worst = z.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
    Ok(TestReport::new(
        format!("anchor-frequency B={:?}", set.to_vec()),
        worst,
        SIGMA3,
    )
    .with_samples(n, seed)
    .with_note(format!("counts {counts:?}")))
}

/// Exact law of the first `steps` forward states of the `p^h` chain from `x`.
fn forward_prefix_law(ht: &HTransform, x: usize, steps: usize) -> BTreeMap<Vec<usize>, f64> {
    let mut out = BTreeMap::new();
    let mut stack = vec![(Vec::new(), x, 1.0)];
    while let Some((path, cur, p)) = stack.pop() {
        if ht.set().contains(cur) || path.len() == steps {
            *out.entry(path).or_insert(0.0) += p;
            continue;
        }
        for (y, &k) in ht.kernel().row(cur).iter().enumerate() {
            if k > 0.0 {
                let mut next = path.clone();
                next.push(y);
                stack.push((next, y, p * k));
            }
        }
    }
    out
}

type PrefixCounts = HashMap<(Option<usize>, Vec<usize>), u64>;

/// Forward prefixes of Kuznetsov paths anchored at `anchor`, keyed by the
/// last backward state (`None` when the path is born at the anchor).
#[allow(clippy::too_many_arguments)]
fn forward_prefixes(
    sampler: &KuznetsovSampler,
    anchor: usize,
    steps: usize,
    n: u64,
    seed: u64,
    workers: Workers,
    caps: SamplerCaps,
) -> PrefixCounts {
    fold_replicas(
        n,
        seed,
        workers,
        PrefixCounts::new,
        |acc, _, rng| {
            let p = sampler.sample(rng, caps);
            if p.anchor != anchor || p.forward_truncated {
                return;
            }
            let prefix = p.forward[..p.forward.len().min(steps)].to_vec();
            *acc.entry((p.backward.last().copied(), prefix)).or_insert(0) += 1;
        },
        |acc, part| {
            for (k, c) in part {
                *acc.entry(k).or_insert(0) += c;
            }
        },
    )
}

/// Goodness of fit of the forward part of paths anchored at `anchor` in
/// `anchor_set` against the `p^h` law, and independence of the forward part
/// from the last backward state.
#[allow(clippy::too_many_arguments)]
pub fn forward_law_test(
    nu: &Measure,
    model: &Model,
    set: &StateSet,
    anchor_set: &StateSet,
    anchor: usize,
    steps: usize,
    n: u64,
    seed: u64,
    workers: Workers,
    caps: SamplerCaps,
) -> Result<TestReport> {
    let sampler = KuznetsovSampler::new(nu, model, set, anchor_set)?;
    let counts = forward_prefixes(&sampler, anchor, steps, n, seed, workers, caps);
    let law = forward_prefix_law(sampler.h_transform(), anchor, steps);
    let mut pooled: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    for ((_, prefix), c) in &counts {
        *pooled.entry(prefix.clone()).or_insert(0) += c;
    }
    let keys: Vec<Vec<usize>> = law
        .keys()
        .chain(pooled.keys())
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let observed: Vec<u64> = keys
        .iter()
        .map(|k| pooled.get(k).copied().unwrap_or(0))
        .collect();
    let probs: Vec<f64> = keys
        .iter()
        .map(|k| law.get(k).copied().unwrap_or(0.0))
        .collect();
    let kept: u64 = observed.iter().sum();
    let (stat, df) = chi_square_gof(&observed, &probs);
    let gof = TestReport::new(
        format!("forward-gof anchor={anchor}"),
        stat,
        chi_square_critical(df, CHI_ALPHA),
    )
    .with_samples(kept, seed)
    .with_note(format!("df {df}"));

    let mut rows: BTreeMap<Option<usize>, Vec<u64>> = BTreeMap::new();
    for ((last, prefix), c) in &counts {
        let j = keys.iter().position(|k| k == prefix).expect("key present");
        rows.entry(*last).or_insert_with(|| vec![0; keys.len()])[j] += c;
    }
    let table: Vec<Vec<u64>> = rows.into_values().collect();
    let (stat, df) = chi_square_homogeneity(&table);
    let indep = TestReport::new(
        format!("forward-independence anchor={anchor}"),
        stat,
        chi_square_critical(df, CHI_ALPHA),
    )
    .with_samples(kept, seed)
    .with_note(format!("df {df}, {} history classes", table.len()));
    Ok(
        TestReport::all(format!("forward-law anchor={anchor}"), &[gof, indep])
            .with_samples(kept, seed),
    )
}

/// Criterion 6.
pub fn kuznetsov_suite(cfg: &SuiteConfig) -> Result<TestReport> {
    let m = model_a();
    let n = cfg.runs(100_000);
    let g1 = green_row(&m, 1)?;
    let all = green_row(&m, 0)?.add(&g1).add(&green_row(&m, 2)?);
    let b0 = b(3, &[0]);
    let b01 = b(3, &[0, 1]);
    let parts = [
        anchor_frequency_test(&g1, &m, &b0, n, cfg.sub_seed(61), cfg.workers, cfg.caps)?,
        anchor_frequency_test(
            &g1,
            &m,
            &b(3, &[0, 2]),
            n,
            cfg.sub_seed(62),
            cfg.workers,
            cfg.caps,
        )?,
        anchor_frequency_test(&all, &m, &b01, n, cfg.sub_seed(63), cfg.workers, cfg.caps)?,
        forward_law_test(
            &g1,
            &m,
            &b0,
            &b01,
            1,
            3,
            n,
            cfg.sub_seed(64),
            cfg.workers,
            cfg.caps,
        )?,
        forward_law_test(
            &all,
            &m,
            &b0,
            &b01,
            1,
            3,
            n,
            cfg.sub_seed(65),
            cfg.workers,
            cfg.caps,
        )?,
    ];
    Ok(TestReport::all("kuznetsov", &parts).with_samples(n, cfg.seed))
}

#[derive(Debug, Clone)]
struct InterlacementStats {
    occupation: VectorMoments,
    progeny: VectorMoments,
    retained: VectorMoments,
    histogram: Vec<u64>,
    error: Option<Error>,
}

impl InterlacementStats {
    fn new(dim: usize) -> Self {
        Self {
            occupation: VectorMoments::new(dim),
            progeny: VectorMoments::new(dim),
            retained: VectorMoments::new(1),
            histogram: Vec::new(),
            error: None,
        }
    }

    fn push(&mut self, s: &ReplicaSummary) {
        self.occupation.push(&s.occupation);
        self.progeny.push(&s.progeny_occupation);
        self.retained.push(&[s.retained as f64]);
        let k = s.retained as usize;
        if self.histogram.len() <= k {
            self.histogram.resize(k + 1, 0);
        }
        self.histogram[k] += 1;
    }

    fn merge(&mut self, other: Self) {
        self.occupation.merge(other.occupation);
        self.progeny.merge(other.progeny);
        self.retained.merge(other.retained);
        if self.histogram.len() < other.histogram.len() {
            self.histogram.resize(other.histogram.len(), 0);
        }
        for (a, b) in self.histogram.iter_mut().zip(other.histogram) {
            *a += b;
        }
        if self.error.is_none() {
            self.error = other.error;
        }
    }
}

/// Replicas of the interlacement at level `u` built as a superposition of
/// independent samples at the levels in `levels` (summing to `u`).
#[allow(clippy::too_many_arguments)]
fn interlacement_stats(
    sampler: &InterlacementSampler,
    levels: &[f64],
    observe: &StateSet,
    n: u64,
    seed: u64,
    workers: Workers,
    caps: SamplerCaps,
) -> Result<InterlacementStats> {
    let dim = sampler.paths().model().n_states();
    let stats = fold_replicas(
        n,
        seed,
        workers,
        || InterlacementStats::new(dim),
        |acc, _, rng| {
            let mut trees = Vec::new();
            let mut last: Option<InterlacementSample> = None;
            for &u in levels {
                match sampler.sample(u, rng, caps) {
                    Ok(mut s) => {
                        trees.append(&mut s.trees);
                        last = Some(s);
                    }
                    Err(e) => {
                        acc.error.get_or_insert(e);
                        return;
                    }
                }
            }
            if let Some(mut s) = last {
                s.trees = trees;
                acc.push(&ReplicaSummary::of(&s, dim, observe));
            }
        },
        InterlacementStats::merge,
    );
    match stats.error {
        Some(e) => Err(e),
        None => Ok(stats),
    }
}

/// Π_B-occupation of the interlacement sampled on `bprime` (containing `set`)
/// against the exact `bar mu_B G`, per state.
#[allow(clippy::too_many_arguments)]
pub fn interlacement_qp_test(
    model: &Model,
    set: &StateSet,
    bprime: &StateSet,
    nu: &Measure,
    u: f64,
    n_runs: u64,
    seed: u64,
    workers: Workers,
    caps: SamplerCaps,
) -> Result<TestReport> {
    let name = format!("progeny-occupation B'={:?}", bprime.to_vec());
    if !set.is_subset_of(bprime) {
        return Err(Error::InvalidArgument("B' must contain B".into()));
    }
    let sampler = InterlacementSampler::new(nu, model, bprime)?;
    if u == 0.0 {
        return Ok(TestReport::vacuous(name, "u = 0"));
    }
    let stats = interlacement_stats(&sampler, &[u], set, n_runs, seed, workers, caps)?;
    let target = progeny_occupation_target(&entrance_measure(nu, model, set)?, model)?;
    Ok(occupation_z_report(&name, &stats.progeny, u, &target, seed))
}

/// Criterion 7.
pub fn interlacement_suite(cfg: &SuiteConfig) -> Result<TestReport> {
    let m = model_a();
    let set = b(3, &[0]);
    let nu = green_row(&m, 0)?;
    let n = cfg.runs(100_000);
    let sampler = InterlacementSampler::new(&nu, &m, &set)?;
    let one = interlacement_stats(
        &sampler,
        &[1.0],
        &set,
        n,
        cfg.sub_seed(71),
        cfg.workers,
        cfg.caps,
    )?;
    let mut parts = Vec::new();

    let z0 = one.occupation.z_scores(1.0, nu.values());
    parts.push(
        TestReport::new("occupation at 0 = 17/9", z0[0].abs(), SIGMA3)
            .with_note(format!("mean {:.5}", one.occupation.mean()[0])),
    );
    parts.push(occupation_z_report(
        "occupation = nu",
        &one.occupation,
        1.0,
        nu.values(),
        cfg.sub_seed(71),
    ));
    let target = progeny_occupation_target(sampler.paths().entrance(), &m)?;
    parts.push(occupation_z_report(
        "progeny occupation",
        &one.progeny,
        1.0,
        &target,
        cfg.sub_seed(71),
    ));

    let mean = one.retained.mean()[0];
    let disp = one.retained.variance()[0] / mean;
    parts.push(
        TestReport::new("dispersion", (disp - 1.0).abs(), DISPERSION_TOL)
            .with_note(format!("var/mean {disp:.4}")),
    );

    let split = interlacement_stats(
        &sampler,
        &[0.5, 0.5],
        &set,
        n,
        cfg.sub_seed(72),
        cfg.workers,
        cfg.caps,
    )?;
    let (stat, df) = chi_square_homogeneity(&[one.histogram.clone(), split.histogram.clone()]);
    parts.push(
        TestReport::new(
            "superposition counts",
            stat,
            chi_square_critical(df, CHI_ALPHA),
        )
        .with_note(format!("df {df}")),
    );
    let z = two_sample_z(
        one.occupation.mean()[0],
        one.occupation.variance()[0],
        one.occupation.n,
        split.occupation.mean()[0],
        split.occupation.variance()[0],
        split.occupation.n,
    );
    parts.push(TestReport::new("superposition occupation", z.abs(), SIGMA4));

    parts.push(interlacement_qp_test(
        &m,
        &set,
        &b(3, &[0, 1]),
        &nu,
        1.0,
        n,
        cfg.sub_seed(73),
        cfg.workers,
        cfg.caps,
    )?);
    Ok(TestReport::all("interlacement", &parts).with_samples(n, cfg.seed))
}

fn path_key(states: &[usize], max_len: usize) -> String {
    let s: Vec<String> = states.iter().take(max_len).map(|x| x.to_string()).collect();
    let mut key = s.join("-");
    if states.len() > max_len {
        key.push_str("-+");
    }
    key
}

/// Compares the tree interlacement of a model with at most one child per
/// individual with the path interlacement of the same intensity operator:
/// pooled laws of path prefixes (TV) and mean counts per replica (z).
#[allow(clippy::too_many_arguments)]
pub fn degenerate_reduction_test(
    model: &Model,
    set: &StateSet,
    nu: &Measure,
    u: f64,
    n_runs: u64,
    max_len: usize,
    seed: u64,
    workers: Workers,
    caps: SamplerCaps,
) -> Result<TestReport> {
    if let Some(x) =
        (0..model.n_states()).find(|&x| model.offspring(x).support().iter().any(|&(k, _)| k > 1))
    {
        return Err(Error::InvalidArgument(format!(
            "state {x} can have more than one child"
        )));
    }
    let trees = InterlacementSampler::new(nu, model, set)?;
    let paths = HittingSampler::new(nu, model, set)?;
    type Acc = (HashMap<String, u64>, VectorMoments, u64, Option<Error>);
    let fresh = || (HashMap::new(), VectorMoments::new(1), 0u64, None);
    let merge = |acc: &mut Acc, part: Acc| {
        for (k, c) in part.0 {
            *acc.0.entry(k).or_insert(0) += c;
        }
        acc.1.merge(part.1);
        acc.2 += part.2;
        if acc.3.is_none() {
            acc.3 = part.3;
        }
    };
    let seed_b = seed ^ 0xB5AD_4ECE_DA1C_E2A9;
    let branching: Acc = fold_replicas(
        n_runs,
        seed,
        workers,
        fresh,
        |acc, _, rng| match trees.sample(u, rng, caps) {
            Ok(s) => {
                acc.1.push(&[s.trees.len() as f64]);
                for t in &s.trees {
                    match linear_states(t) {
                        Some(states) => *acc.0.entry(path_key(&states, max_len)).or_insert(0) += 1,
                        None => acc.2 += 1,
                    }
                }
            }
            Err(e) => {
                acc.3.get_or_insert(e);
            }
        },
        merge,
    );
    let classical: Acc = fold_replicas(
        n_runs,
        seed_b,
        workers,
        fresh,
        |acc, _, rng| match paths.sample_paths(u, rng, caps) {
            Ok(ps) => {
                acc.1.push(&[ps.len() as f64]);
                for p in &ps {
                    *acc.0.entry(path_key(&p.states(), max_len)).or_insert(0) += 1;
                }
            }
            Err(e) => {
                acc.3.get_or_insert(e);
            }
        },
        merge,
    );
    if let Some(e) = branching.3.or(classical.3) {
        return Err(e);
    }
    let pa = TreePmf::from_counts(Scheme::Path, &branching.0, 0);
    let pb = TreePmf::from_counts(Scheme::Path, &classical.0, 0);
    let support = pa
        .entries
        .keys()
        .chain(pb.entries.keys())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let n_paths = branching
        .0
        .values()
        .sum::<u64>()
        .min(classical.0.values().sum::<u64>())
        .max(1);
    let tv = TestReport::new(
        "path-law tv",
        tv_distance(&pa, &pb)?,
        tv_threshold(support, n_paths),
    )
    .with_samples(n_paths, seed)
    .with_note(format!("support {support}"));
    let z = two_sample_z(
        branching.1.mean()[0],
        branching.1.variance()[0],
        branching.1.n,
        classical.1.mean()[0],
        classical.1.variance()[0],
        classical.1.n,
    );
    let counts = TestReport::new("count per replica", z.abs(), SIGMA4);
    let linear = TestReport::new("trees are paths", branching.2 as f64, 0.0);
    Ok(TestReport::all("degenerate-reduction", &[tv, counts, linear]).with_samples(n_runs, seed))
}

/// Criterion 8.
pub fn degenerate_suite(cfg: &SuiteConfig) -> Result<TestReport> {
    let m = model_a_single_child();
    let nu = green_row(&m, 0)?
        .add(&green_row(&m, 1)?)
        .add(&green_row(&m, 2)?);
    degenerate_reduction_test(
        &m,
        &b(3, &[0]),
        &nu,
        1.0,
        cfg.runs(100_000),
        6,
        cfg.sub_seed(81),
        cfg.workers,
        cfg.caps,
    )
}

/// Criterion 9.
pub fn decorability_suite() -> Result<TestReport> {
    let mut parts = Vec::new();
    let c = model_c();
    let beta = c.intensity().get(0, 0);
    let closed = beta / ((1.0 - beta) * (1.0 - beta));
    let rc = criteria_report(&c, &StateSet::all(1), DEFAULT_DEPTH, 0);
    let series = rc
        .criterion("sup-row-series")
        .ok_or_else(|| Error::InvalidArgument("missing criterion".into()))?;
    parts.push(TestReport::new(
        "MODEL-C closed form = 20",
        (closed - 20.0).abs(),
        1e-12,
    ));
    parts.push(
        TestReport::new(
            "MODEL-C series = closed form",
            (series.value - closed).abs(),
            1e-6,
        )
        .with_note(format!("series {}", series.value)),
    );
    parts.push(TestReport::new(
        "MODEL-C converged",
        (series.verdict != Verdict::Converged) as u8 as f64,
        0.0,
    ));

    let rb = criteria_report(&model_b(), &StateSet::all(1), DEFAULT_DEPTH, 0);
    for name in ["sup-row-series", "return-series"] {
        let v = rb.criterion(name).map(|c| c.verdict);
        parts.push(TestReport::new(
            format!("MODEL-B {name} divergent"),
            (v != Some(Verdict::Divergent)) as u8 as f64,
            0.0,
        ));
    }
    for k in 1..10 {
        let beta = k as f64 / 10.0;
        let r = criteria_report(&single_state(beta), &StateSet::all(1), DEFAULT_DEPTH, 0);
        let v = r.criterion("return-series").map(|c| c.verdict);
        parts.push(TestReport::new(
            format!("beta={beta} return-series"),
            (v != Some(Verdict::Converged)) as u8 as f64,
            0.0,
        ));
    }
    Ok(TestReport::all("decorability", &parts))
}

/// Per-criterion scale of the seed sweep in [`determinism_suite`]. The two
/// slow sampling criteria run reduced (their thresholds widen with `1/sqrt(n)`);
/// the others run at full size since the dispersion band is fixed.
pub const SEED_SWEEP: [(u8, f64); 5] = [(4, 0.05), (5, 0.05), (6, 1.0), (7, 1.0), (8, 1.0)];

/// Criterion 10: bit-identical reruns, worker-count independence, and the
/// stochastic criteria passing for ten consecutive seeds (sizes per [`SEED_SWEEP`]).
pub fn determinism_suite(cfg: &SuiteConfig) -> Result<TestReport> {
    let m = model_a();
    let set = b(3, &[0]);
    let ht = m.h_transform(&set)?;
    let n = cfg.runs(20_000);
    let run = |w| decorated_spine_pmf(&m, &ht, 1, 3, n, cfg.seed, w, cfg.caps);
    let single = run(Workers::SINGLE);
    let mut parts = vec![
        TestReport::new(
            "rerun identical",
            (single != run(Workers::SINGLE)) as u8 as f64,
            0.0,
        ),
        TestReport::new(
            "worker independent",
            (single != run(Workers(0))) as u8 as f64,
            0.0,
        ),
    ];

    let nu = green_row(&m, 0)?;
    let sampler = InterlacementSampler::new(&nu, &m, &set)?;
    let draw = |w| {
        map_replicas(n.min(5_000), cfg.seed, w, |_, rng| {
            sampler
                .sample(1.0, rng, cfg.caps)
                .map(|s| s.trees.iter().map(|t| t.to_records()).collect::<Vec<_>>())
        })
    };
    let first = draw(Workers::SINGLE);
    parts.push(TestReport::new(
        "interlacement rerun identical",
        (first != draw(Workers::SINGLE)) as u8 as f64,
        0.0,
    ));
    parts.push(TestReport::new(
        "interlacement worker independent",
        (first != draw(Workers(0))) as u8 as f64,
        0.0,
    ));

    let mut failing = Vec::new();
    for k in 0..10u64 {
        for &(id, scale) in SEED_SWEEP.iter() {
            let sweep = SuiteConfig {
                seed: cfg.seed.wrapping_add(k),
                scale: cfg.scale * scale,
                ..*cfg
            };
            let r = run_criterion(id, &sweep);
            if !r.report.passed {
                failing.push(format!("seed {} criterion {id}: {}", sweep.seed, r.report));
            }
        }
    }
    parts.push(
        TestReport::new("verdicts stable over 10 seeds", failing.len() as f64, 0.0)
            .with_note(failing.join(", ")),
    );
    Ok(TestReport::all("determinism", &parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_suites_pass() {
        assert!(exact_potential_suite().unwrap().passed);
        assert!(riesz_suite().unwrap().passed);
        assert!(decorability_suite().unwrap().passed);
        assert!(spine_exact_suite(&SuiteConfig::default()).unwrap().passed);
    }

    #[test]
    fn corrupted_h_fails_exact_leg() {
        let cfg = SuiteConfig {
            corrupt_h: Some(1.1),
            ..SuiteConfig::default()
        };
        assert!(!spine_exact_suite(&cfg).unwrap().passed);
    }

    #[test]
    fn forward_prefix_law_sums_to_one() {
        let m = model_a();
        let ht = m.h_transform(&b(3, &[0])).unwrap();
        let law = forward_prefix_law(&ht, 2, 3);
        assert!((law.values().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((law[&vec![1, 0]] - 0.68).abs() < 1e-12);
    }
}
