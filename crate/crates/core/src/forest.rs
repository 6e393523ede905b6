//! Finite ordered forests in point-process representation: individuals carry
//! a label, an optional predecessor label, a location and a colour.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Measure, StateSet};

pub type Label = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Colour {
    White,
    Blue,
    Uncoloured,
}

impl Colour {
    pub fn code(self) -> char {
        match self {
            Colour::White => 'w',
            Colour::Blue => 'b',
            Colour::Uncoloured => 'u',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'w' => Some(Colour::White),
            'b' => Some(Colour::Blue),
            'u' => Some(Colour::Uncoloured),
            _ => None,
        }
    }
}

impl fmt::Display for Colour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Colour::White => "white",
            Colour::Blue => "blue",
            Colour::Uncoloured => "none",
        })
    }
}

impl FromStr for Colour {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "white" => Ok(Colour::White),
            "blue" => Ok(Colour::Blue),
            "none" => Ok(Colour::Uncoloured),
            _ => Err(Error::InvalidArgument(format!("unknown colour `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Individual {
    pub label: Label,
    pub predecessor: Option<Label>,
    pub location: usize,
    pub colour: Colour,
}

/// Set when a sampler stopped before the forest was complete.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Truncation {
    pub generation_capped: bool,
    pub population_capped: bool,
}

impl Truncation {
    pub fn any(&self) -> bool {
        self.generation_capped || self.population_capped
    }

    pub fn merge(self, other: Truncation) -> Truncation {
        Truncation {
            generation_capped: self.generation_capped || other.generation_capped,
            population_capped: self.population_capped || other.population_capped,
        }
    }
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.generation_capped, self.population_capped) {
            (false, false) => f.write_str("none"),
            (true, false) => f.write_str("generation_capped"),
            (false, true) => f.write_str("population_capped"),
            (true, true) => f.write_str("generation_capped,population_capped"),
        }
    }
}

/// Problems found by [`Forest::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateLabel(Label),
    MissingPredecessor { label: Label, predecessor: Label },
    CircleViolation(Vec<Label>),
    NotATree { roots: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// The B-entrance: individuals in `B` none of whose strict ancestors is in `B`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntranceSet {
    pub entries: Vec<(Label, usize)>,
}

impl EntranceSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Forest {
    individuals: Vec<Individual>,
    index: HashMap<Label, usize>,
    children: Vec<Vec<usize>>,
    truncation: Truncation,
}

impl PartialEq for Forest {
    fn eq(&self, other: &Self) -> bool {
        self.individuals == other.individuals && self.truncation == other.truncation
    }
}

impl Forest {
    pub fn new(individuals: Vec<Individual>, truncation: Truncation) -> Self {
        let mut index = HashMap::with_capacity(individuals.len());
        for (i, ind) in individuals.iter().enumerate() {
            index.entry(ind.label).or_insert(i);
        }
        let mut children = vec![Vec::new(); individuals.len()];
        for (i, ind) in individuals.iter().enumerate() {
            if let Some(&p) = ind.predecessor.and_then(|p| index.get(&p)) {
                if p != i {
                    children[p].push(i);
                }
            }
        }
        for c in children.iter_mut() {
            c.sort_by_key(|&i| individuals[i].label);
        }
        Self {
            individuals,
            index,
            children,
            truncation,
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn set_truncation(&mut self, t: Truncation) {
        self.truncation = t;
    }

    pub fn get(&self, label: Label) -> Option<&Individual> {
        self.index.get(&label).map(|&i| &self.individuals[i])
    }

    pub fn index_of(&self, label: Label) -> Option<usize> {
        self.index.get(&label).copied()
    }

    /// Children of the individual at position `i`, ordered by label.
    pub fn children_of(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Positions of individuals without a predecessor.
    pub fn roots(&self) -> Vec<usize> {
        let mut r: Vec<usize> = (0..self.len())
            .filter(|&i| self.individuals[i].predecessor.is_none())
            .collect();
        r.sort_by_key(|&i| self.individuals[i].label);
        r
    }

    pub fn validate(&self) -> ValidationReport {
        self.validate_inner(false)
    }

    /// As [`Forest::validate`], additionally requiring a single connected tree.
    pub fn validate_tree(&self) -> ValidationReport {
        self.validate_inner(true)
    }

    fn validate_inner(&self, tree: bool) -> ValidationReport {
        let mut violations = Vec::new();
        let mut seen = HashSet::with_capacity(self.len());
        for ind in &self.individuals {
            if !seen.insert(ind.label) {
                violations.push(Violation::DuplicateLabel(ind.label));
            }
        }
        for ind in &self.individuals {
            if let Some(p) = ind.predecessor {
                if !self.index.contains_key(&p) {
                    violations.push(Violation::MissingPredecessor {
                        label: ind.label,
                        predecessor: p,
                    });
                }
            }
        }
        // Cycle detection along predecessor chains.
        let mut state = vec![0u8; self.len()]; // 0 unvisited, 1 on stack, 2 done
        for start in 0..self.len() {
            let mut path: Vec<usize> = Vec::new();
            let mut cur = Some(start);
            while let Some(i) = cur {
                match state[i] {
                    2 => break,
                    1 => {
                        let pos = path.iter().position(|&j| j == i).unwrap_or(0);
                        let mut cyc: Vec<Label> = path[pos..]
                            .iter()
                            .map(|&j| self.individuals[j].label)
                            .collect();
                        cyc.sort_unstable();
                        violations.push(Violation::CircleViolation(cyc));
                        break;
                    }
                    _ => {
                        state[i] = 1;
                        path.push(i);
                        cur = self.individuals[i]
                            .predecessor
                            .and_then(|p| self.index.get(&p).copied());
                    }
                }
            }
            for j in path {
                state[j] = 2;
            }
        }
        if tree && !self.is_empty() {
            let roots = self.roots().len();
            if roots != 1 {
                violations.push(Violation::NotATree { roots });
            }
        }
        ValidationReport { violations }
    }

    /// Number of strict iterated predecessors.
    pub fn generation(&self, label: Label) -> Result<usize> {
        let mut i = self.index_of(label).ok_or(Error::UnknownLabel(label))?;
        let mut g = 0;
        while let Some(p) = self.individuals[i]
            .predecessor
            .and_then(|p| self.index_of(p))
        {
            g += 1;
            i = p;
            if g > self.len() {
                break;
            }
        }
        Ok(g)
    }

    /// Generation of every individual, computed top-down from the roots.
    /// Individuals unreachable from a root (cycles) get `usize::MAX`.
    pub fn generations(&self) -> Vec<usize> {
        let mut gen = vec![usize::MAX; self.len()];
        let mut stack: Vec<usize> = self.roots();
        for &r in &stack {
            gen[r] = 0;
        }
        while let Some(i) = stack.pop() {
            for &c in &self.children[i] {
                gen[c] = gen[i] + 1;
                stack.push(c);
            }
        }
        gen
    }

    /// Positions of the B-entrance individuals, in depth-first label order.
    pub fn entrance_indices(&self, set: &StateSet) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.roots();
        stack.reverse();
        while let Some(i) = stack.pop() {
            if set.contains(self.individuals[i].location) {
                out.push(i);
                continue;
            }
            stack.extend(self.children[i].iter().rev());
        }
        out
    }

    pub fn entrance_set(&self, set: &StateSet) -> EntranceSet {
        EntranceSet {
            entries: self
                .entrance_indices(set)
                .into_iter()
                .map(|i| (self.individuals[i].label, self.individuals[i].location))
                .collect(),
        }
    }

    /// Positions of `i` and all its iterated descendants, parents first.
    pub fn descendants(&self, i: usize) -> Vec<usize> {
        let mut out = vec![i];
        let mut k = 0;
        while k < out.len() {
            out.extend_from_slice(&self.children[out[k]]);
            k += 1;
        }
        out
    }

    /// The subtree induced by the progeny of `label`, with its root detached.
    pub fn progeny(&self, label: Label) -> Result<Forest> {
        let i = self.index_of(label).ok_or(Error::UnknownLabel(label))?;
        Ok(self.subforest(&[i]))
    }

    /// Union of the progeny of every B-entrance individual.
    pub fn progeny_of_entrance(&self, set: &StateSet) -> Forest {
        self.subforest(&self.entrance_indices(set))
    }

    fn subforest(&self, roots: &[usize]) -> Forest {
        let mut inds = Vec::new();
        for &r in roots {
            for (k, j) in self.descendants(r).into_iter().enumerate() {
                let mut ind = self.individuals[j];
                if k == 0 {
                    ind.predecessor = None;
                }
                inds.push(ind);
            }
        }
        Forest::new(inds, self.truncation)
    }

    /// Individuals of generation at most `depth`.
    pub fn truncated(&self, depth: usize) -> Forest {
        let gen = self.generations();
        let inds = self
            .individuals
            .iter()
            .zip(&gen)
            .filter(|(_, &g)| g <= depth)
            .map(|(ind, _)| *ind)
            .collect();
        Forest::new(inds, self.truncation)
    }

    /// Number of individuals per location.
    pub fn occupation(&self, n_states: usize) -> Measure {
        let mut v = vec![0.0; n_states];
        for ind in &self.individuals {
            v[ind.location] += 1.0;
        }
        Measure::new(v).expect("counts are non-negative")
    }

    /// Disjoint union of two forests.
    pub fn concat(&self, other: &Forest) -> Forest {
        let mut inds = self.individuals.clone();
        inds.extend_from_slice(&other.individuals);
        Forest::new(inds, self.truncation.merge(other.truncation))
    }

    /// Ulam-Harris words per root: the root is the empty word and the k-th
    /// child (in label order, from 1) appends `k`.
    pub fn ulam_harris(&self) -> Vec<Vec<(Vec<u32>, usize)>> {
        self.roots()
            .into_iter()
            .map(|r| {
                let mut words = Vec::new();
                let mut stack = vec![(r, Vec::new())];
                while let Some((i, w)) = stack.pop() {
                    for (k, &c) in self.children[i].iter().enumerate().rev() {
                        let mut cw = w.clone();
                        cw.push(k as u32 + 1);
                        stack.push((c, cw));
                    }
                    words.push((w, self.individuals[i].location));
                }
                words
            })
            .collect()
    }

    /// One line per individual: `label predecessor location colour`, with a
    /// missing predecessor written as `-`.
    pub fn to_records(&self) -> String {
        let mut s = String::new();
        for ind in &self.individuals {
            match ind.predecessor {
                Some(p) => writeln!(s, "{} {} {} {}", ind.label, p, ind.location, ind.colour),
                None => writeln!(s, "{} - {} {}", ind.label, ind.location, ind.colour),
            }
            .expect("write to string");
        }
        s
    }

    /// Parses [`Forest::to_records`] output. Blank lines and `#` lines are skipped.
    pub fn from_records(text: &str) -> Result<Forest> {
        let mut inds = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |m: &str| Error::Parse {
                line: i + 1,
                message: m.to_string(),
            };
            let t: Vec<&str> = line.split_whitespace().collect();
            let [label, pred, loc, colour] = t.as_slice() else {
                return Err(perr("expected `label predecessor location colour`"));
            };
            inds.push(Individual {
                label: label.parse().map_err(|_| perr("bad label"))?,
                predecessor: match *pred {
                    "-" => None,
                    p => Some(p.parse().map_err(|_| perr("bad predecessor"))?),
                },
                location: loc.parse().map_err(|_| perr("bad location"))?,
                colour: colour.parse().map_err(|_| perr("bad colour"))?,
            });
        }
        Ok(Forest::new(inds, Truncation::default()))
    }
}

/// Accumulates individuals with fresh random labels.
#[derive(Debug, Default)]
pub struct ForestBuilder {
    individuals: Vec<Individual>,
    labels: HashSet<Label>,
}

impl ForestBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    /// Draws a label not yet used in this forest.
    pub fn fresh_label<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Label {
        loop {
            let l: Label = rng.random();
            if self.labels.insert(l) {
                return l;
            }
        }
    }

    /// Adds an individual with a fresh label; returns its position.
    pub fn push<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        predecessor: Option<usize>,
        location: usize,
        colour: Colour,
    ) -> usize {
        let label = self.fresh_label(rng);
        self.push_labelled(label, predecessor, location, colour)
    }

    /// Adds an individual with a caller-chosen label (must be fresh).
    pub fn push_labelled(
        &mut self,
        label: Label,
        predecessor: Option<usize>,
        location: usize,
        colour: Colour,
    ) -> usize {
        self.labels.insert(label);
        let predecessor = predecessor.map(|p| self.individuals[p].label);
        self.individuals.push(Individual {
            label,
            predecessor,
            location,
            colour,
        });
        self.individuals.len() - 1
    }

    pub fn location(&self, i: usize) -> usize {
        self.individuals[i].location
    }

    pub fn colour(&self, i: usize) -> Colour {
        self.individuals[i].colour
    }

    pub fn contains_label(&self, l: Label) -> bool {
        self.labels.contains(&l)
    }

    pub fn finish(self, truncation: Truncation) -> Forest {
        Forest::new(self.individuals, truncation)
    }
}
