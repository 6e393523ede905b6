//! Small reference models used across tests, the CLI and the verification
//! suite.

use super::{Kernel, Model, OffspringLaw};

fn binary_law() -> OffspringLaw {
    OffspringLaw::new([(0, 0.6), (2, 0.4)]).expect("valid law")
}

fn a_motion() -> Kernel {
    Kernel::from_rows(&[
        vec![0.0, 1.0, 0.0],
        vec![0.5, 0.0, 0.5],
        vec![0.0, 1.0, 0.0],
    ])
    .expect("valid kernel")
}

/// Three-state path `0 - 1 - 2` with reflecting ends and binary branching
/// `{0: 0.6, 2: 0.4}` everywhere (`m = 0.8`).
pub fn model_a() -> Model {
    Model::from_parts(a_motion(), vec![binary_law(); 3]).expect("model A")
}

/// Same motion as [`model_a`] with at most one child, `{0: 0.2, 1: 0.8}`:
/// a killed Markov chain with the same intensity operator.
pub fn model_a_single_child() -> Model {
    let law = OffspringLaw::new([(0, 0.2), (1, 0.8)]).expect("valid law");
    Model::from_parts(a_motion(), vec![law; 3]).expect("single-child model")
}

/// One state, critical binary branching (`m = 1`).
pub fn model_b() -> Model {
    Model::from_parts(
        Kernel::from_rows(&[vec![1.0]]).expect("valid kernel"),
        vec![OffspringLaw::new([(0, 0.5), (2, 0.5)]).expect("valid law")],
    )
    .expect("model B")
}

/// One state, subcritical binary branching (`m = 0.8`).
pub fn model_c() -> Model {
    single_state(0.8)
}

/// One state with `Q = beta`, realised by the law `{0: 1 - beta, 1: beta}`.
pub fn single_state(beta: f64) -> Model {
    Model::from_parts(
        Kernel::from_rows(&[vec![1.0]]).expect("valid kernel"),
        vec![if beta == 0.8 {
            binary_law()
        } else {
            OffspringLaw::new([(0, 1.0 - beta), (1, beta)]).expect("valid law")
        }],
    )
    .expect("single-state model")
}

/// Four states in two closed blocks: `{0, 1}` swapped deterministically with
/// one child (critical, doubly stochastic) and `{2, 3}` swapped with
/// `{0: 0.5, 1: 0.5}` offspring (`Q = 0.5 P` on that block).
pub fn two_block_toy() -> Model {
    let motion = Kernel::from_rows(&[
        vec![0.0, 1.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
        vec![0.0, 0.0, 1.0, 0.0],
    ])
    .expect("valid kernel");
    let half = OffspringLaw::new([(0, 0.5), (1, 0.5)]).expect("valid law");
    Model::from_parts(
        motion,
        vec![
            OffspringLaw::deterministic(1),
            OffspringLaw::deterministic(1),
            half.clone(),
            half,
        ],
    )
    .expect("toy model")
}

/// The reference models in model-file syntax, as shipped with the CLI.
pub const REFERENCE_MODELS: &str = "\
# Reference models.
model A
states 0 1 2
motion
0 1 1
1 0 0.5
1 2 0.5
2 1 1
offspring
*: 0 0.6 2 0.4
B 0

model A1
states 0 1 2
motion
0 1 1
1 0 0.5
1 2 0.5
2 1 1
offspring
*: 0 0.2 1 0.8
B 0

model B
states 0
motion
0 0 1
offspring
0: 0 0.5 2 0.5
B 0

model C
states 0
motion
0 0 1
offspring
0: 0 0.6 2 0.4
B 0
";
