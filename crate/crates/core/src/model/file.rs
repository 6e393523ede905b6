//! Line-oriented model files.
//!
//! ```text
//! # comments start with '#'
//! model A                 # starts a named model (optional for single-model files)
//! states 0 1 2            # ordered state identifiers
//! motion                  # followed by sparse triplets `x y prob`
//! 0 1 1
//! 1 0 0.5
//! 1 2 0.5
//! 2 1 1
//! offspring               # followed by `state: count prob [count prob ...]`
//! *: 0 0.6 2 0.4          # `*` applies to every state without its own line
//! B 0                     # optional default norming region
//! translation-invariant   # optional flag
//! ```
//!
//! Keywords are `model`, `states`, `motion`, `offspring`, `B`,
//! `translation-invariant` and `end`; any other line outside a block is an
//! error, and state identifiers may not be keywords.

use super::{Kernel, Model, OffspringLaw, StateSet};
use crate::error::{Error, Result};

const KEYWORDS: &[&str] = &[
    "model",
    "states",
    "motion",
    "offspring",
    "B",
    "translation-invariant",
    "end",
];

/// One model of a model file together with its declared default region.
#[derive(Debug, Clone)]
pub struct ModelEntry {
    pub name: String,
    pub model: Model,
    pub region: Option<StateSet>,
}

type OffspringLine = (usize, String, Vec<(u32, f64)>);

#[derive(Default)]
struct Draft {
    name: String,
    start_line: usize,
    states: Option<(usize, Vec<String>)>,
    motion: Vec<(usize, String, String, f64)>,
    offspring: Vec<OffspringLine>,
    region: Option<(usize, Vec<String>)>,
    translation_invariant: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Block {
    None,
    Motion,
    Offspring,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses every model in `text`.
pub fn parse_models(text: &str) -> Result<Vec<ModelEntry>> {
    let mut drafts: Vec<Draft> = Vec::new();
    let mut block = Block::None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let head = tokens.next().expect("non-empty line");
        let rest: Vec<&str> = tokens.collect();
        if KEYWORDS.contains(&head) {
            block = Block::None;
            if head == "model" {
                let [name] = rest.as_slice() else {
                    return Err(err(line_no, "expected `model <name>`"));
                };
                drafts.push(Draft {
                    name: name.to_string(),
                    start_line: line_no,
                    ..Draft::default()
                });
                continue;
            }
            if drafts.is_empty() {
                drafts.push(Draft {
                    name: "default".into(),
                    start_line: line_no,
                    ..Draft::default()
                });
            }
            let d = drafts.last_mut().expect("draft");
            match head {
                "states" => {
                    if d.states.is_some() {
                        return Err(err(line_no, "duplicate `states`"));
                    }
                    if let Some(k) = rest.iter().find(|t| KEYWORDS.contains(t)) {
                        return Err(err(line_no, format!("state identifier `{k}` is a keyword")));
                    }
                    d.states = Some((line_no, rest.iter().map(|s| s.to_string()).collect()));
                }
                "motion" | "offspring" => {
                    if !rest.is_empty() {
                        return Err(err(line_no, format!("`{head}` takes no arguments")));
                    }
                    block = if head == "motion" {
                        Block::Motion
                    } else {
                        Block::Offspring
                    };
                }
                "B" => d.region = Some((line_no, rest.iter().map(|s| s.to_string()).collect())),
                "translation-invariant" => d.translation_invariant = true,
                "end" => {}
                _ => unreachable!(),
            }
            continue;
        }
        let Some(d) = drafts.last_mut() else {
            return Err(err(line_no, format!("unknown key `{head}`")));
        };
        match block {
            Block::None => return Err(err(line_no, format!("unknown key `{head}`"))),
            Block::Motion => {
                let [y, p] = rest.as_slice() else {
                    return Err(err(line_no, "motion lines are `x y prob`"));
                };
                let p: f64 = p
                    .parse()
                    .map_err(|_| err(line_no, format!("bad probability `{p}`")))?;
                d.motion.push((line_no, head.to_string(), y.to_string(), p));
            }
            Block::Offspring => {
                let Some(state) = head.strip_suffix(':') else {
                    return Err(err(line_no, "offspring lines are `state: count prob ...`"));
                };
                if rest.is_empty() || rest.len() % 2 != 0 {
                    return Err(err(line_no, "expected `count prob` pairs"));
                }
                let pairs = rest
                    .chunks(2)
                    .map(|c| {
                        let k: u32 = c[0]
                            .parse()
                            .map_err(|_| err(line_no, format!("bad count `{}`", c[0])))?;
                        let p: f64 = c[1]
                            .parse()
                            .map_err(|_| err(line_no, format!("bad probability `{}`", c[1])))?;
                        Ok((k, p))
                    })
                    .collect::<Result<Vec<_>>>()?;
                d.offspring.push((line_no, state.to_string(), pairs));
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    drafts
        .into_iter()
        .map(|d| {
            if !seen.insert(d.name.clone()) {
                return Err(err(d.start_line, format!("duplicate model `{}`", d.name)));
            }
            finish(d)
        })
        .collect()
}

fn finish(d: Draft) -> Result<ModelEntry> {
    let (states_line, names) = d
        .states
        .ok_or_else(|| err(d.start_line, format!("model `{}` has no `states`", d.name)))?;
    if names.is_empty() {
        return Err(err(states_line, "empty state list"));
    }
    let n = names.len();
    let index = |line: usize, s: &str| -> Result<usize> {
        names
            .iter()
            .position(|t| t == s)
            .ok_or_else(|| err(line, format!("unknown state `{s}`")))
    };
    let mut triplets = Vec::with_capacity(d.motion.len());
    for (line, x, y, p) in &d.motion {
        if !(p.is_finite() && *p >= 0.0) {
            return Err(err(*line, format!("negative probability {p}")));
        }
        triplets.push((index(*line, x)?, index(*line, y)?, *p));
    }
    let motion = Kernel::from_triplets(n, &triplets)?;
    for (x, name) in names.iter().enumerate() {
        let s = motion.row_sum(x);
        if (s - 1.0).abs() > super::STOCHASTIC_TOL {
            let line = d
                .motion
                .iter()
                .rev()
                .find(|m| &m.1 == name)
                .map_or(states_line, |m| m.0);
            return Err(err(line, format!("motion row `{name}` sums to {s}")));
        }
    }
    let mut laws: Vec<Option<OffspringLaw>> = vec![None; n];
    let mut default = None;
    for (line, state, pairs) in d.offspring {
        let law = OffspringLaw::new(pairs).map_err(|e| err(line, e.to_string()))?;
        if state == "*" {
            default = Some(law);
        } else {
            let x = index(line, &state)?;
            if laws[x].is_some() {
                return Err(err(line, format!("duplicate offspring law for `{state}`")));
            }
            laws[x] = Some(law);
        }
    }
    for l in laws.iter_mut() {
        if l.is_none() {
            *l = default.clone();
        }
    }
    let model = Model::new(names.clone(), motion, laws)
        .map_err(|e| err(d.start_line, e.to_string()))?
        .with_translation_invariance(d.translation_invariant);
    let region = match d.region {
        Some((line, states)) => Some(StateSet::new(
            n,
            states
                .iter()
                .map(|s| index(line, s))
                .collect::<Result<Vec<_>>>()?,
        )?),
        None => None,
    };
    Ok(ModelEntry {
        name: d.name,
        model,
        region,
    })
}

#[cfg(test)]
mod tests {
    use super::super::reference::{model_a, REFERENCE_MODELS};
    use super::*;

    #[test]
    fn reference_file_matches_constructors() {
        let entries = parse_models(REFERENCE_MODELS).unwrap();
        let names: Vec<_> = entries.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["A", "A1", "B", "C"]);
        let a = &entries[0];
        assert_eq!(a.model.intensity(), model_a().intensity());
        assert_eq!(a.region.as_ref().unwrap().to_vec(), vec![0]);
    }

    #[test]
    fn reports_offending_line() {
        let text = "states a b\nmotion\na b 1\nb a 0.5\nb b 0.7\noffspring\n*: 1 1\n";
        match parse_models(text).unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 5);
                assert!(message.contains("sums to"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
        let text = "states a\nmotion\na a\n";
        assert!(matches!(
            parse_models(text),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = "states a\nmotion\na a 1\noffspring\n*: 1 1\ncolour blue\n";
        // `colour blue` sits inside the offspring block and is not `state:`.
        assert!(matches!(
            parse_models(text),
            Err(Error::Parse { line: 6, .. })
        ));
        let text = "frobnicate 3\n";
        assert!(matches!(
            parse_models(text),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn missing_law_is_reported() {
        let text = "states a b\nmotion\na b 1\nb a 1\noffspring\na: 1 1\n";
        let e = parse_models(text).unwrap_err();
        assert!(e.to_string().contains("no offspring law"), "{e}");
    }
}
