//! Exact laws of depth-truncated trees by recursive convolution of the
//! offspring and motion laws.

use std::collections::HashMap;
use std::rc::Rc;

use super::encoding::Node;
use super::pmf::{Scheme, TreePmf};
use crate::error::{Error, Result};
use crate::forest::Colour;
use crate::model::{HTransform, Model};

/// Default cap on the number of shapes held by one enumeration.
pub const DEFAULT_BUDGET: usize = 1_000_000;

type Law = Rc<Vec<(Node, f64)>>;

struct Enumerator<'a> {
    model: &'a Model,
    budget: usize,
    plain: HashMap<(usize, usize, Colour), Law>,
    biased: HashMap<(usize, usize), Law>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn aggregate(items: Vec<(Node, f64)>) -> Vec<(Node, f64)> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut out: Vec<(Node, f64)> = Vec::new();
    for (node, p) in items {
        if p <= 0.0 {
            continue;
        }
        let key = node.encode();
        match index.get(&key) {
            Some(&i) => out[i].1 += p,
            None => {
                index.insert(key, out.len());
                out.push((node, p));
            }
        }
    }
    out
}

impl<'a> Enumerator<'a> {
    fn new(model: &'a Model, budget: usize) -> Self {
        Self {
            model,
            budget,
            plain: HashMap::new(),
            biased: HashMap::new(),
        }
    }

    fn check(&self, n: f64) -> Result<()> {
        if n > self.budget as f64 {
            Err(Error::BudgetExceeded(self.budget))
        } else {
            Ok(())
        }
    }

    /// Law of the subtree below one individual at `x` of the given colour
    /// reproducing by the plain law, cut after `depth` further generations.
    fn plain(&mut self, x: usize, depth: usize, colour: Colour) -> Result<Law> {
        if let Some(l) = self.plain.get(&(x, depth, colour)) {
            return Ok(l.clone());
        }
        let law = if depth == 0 {
            vec![(Node::leaf(x, colour), 1.0)]
        } else {
            let child_colour = if colour == Colour::Uncoloured {
                Colour::Uncoloured
            } else {
                Colour::White
            };
            let mut child = Vec::new();
            for (y, &p) in self.model.motion().row(x).iter().enumerate() {
                if p > 0.0 {
                    for (node, q) in self.plain(y, depth - 1, child_colour)?.iter() {
                        child.push((node.clone(), p * q));
                    }
                }
            }
            let child = aggregate(child);
            let mut items = Vec::new();
            for &(k, dk) in self.model.offspring(x).support() {
                let k = k as usize;
                self.check(binomial(child.len() + k - 1, k))?;
                multisets(child.len(), k, &mut |counts| {
                    let mut prob = dk;
                    let mut remaining = k;
                    let mut children = Vec::with_capacity(k);
                    for (i, &c) in counts.iter().enumerate() {
                        if c > 0 {
                            prob *= binomial(remaining, c) * child[i].1.powi(c as i32);
                            remaining -= c;
                            for _ in 0..c {
                                children.push(child[i].0.clone());
                            }
                        }
                    }
                    items.push((
                        Node {
                            location: x,
                            colour,
                            children,
                        },
                        prob,
                    ));
                });
                self.check(items.len() as f64)?;
            }
            aggregate(items)
        };
        let law = Rc::new(law);
        self.plain.insert((x, depth, colour), law.clone());
        Ok(law)
    }

    /// Law of the subtree below a blue individual at `x`, using the biased
    /// weights literally: child counts and ordered location vectors weighted
    /// by `d(n) prod p(x, y_k) sum h(y_k) / h(x)`, blue child chosen
    /// proportionally to `h`.
    fn biased(&mut self, ht: &HTransform, x: usize, depth: usize) -> Result<Law> {
        if let Some(l) = self.biased.get(&(x, depth)) {
            return Ok(l.clone());
        }
        let law = if depth == 0 {
            vec![(Node::leaf(x, Colour::Blue), 1.0)]
        } else if ht.set().contains(x) {
            self.plain(x, depth, Colour::White)?
                .iter()
                .map(|(n, p)| {
                    (
                        Node {
                            colour: Colour::Blue,
                            ..n.clone()
                        },
                        *p,
                    )
                })
                .collect()
        } else {
            let h = ht.h();
            let row = self.model.motion().row(x);
            let support: Vec<usize> = (0..row.len()).filter(|&y| row[y] > 0.0).collect();
            let mut items = Vec::new();
            for &(n, dn) in self.model.offspring(x).support() {
                let n = n as usize;
                if n == 0 {
                    continue;
                }
                self.check((support.len() as f64).powi(n as i32))?;
                let mut tuples = Vec::new();
                tuples_of(&support, n, &mut Vec::new(), &mut tuples);
                for ys in tuples {
                    let hsum: f64 = ys.iter().map(|&y| h.get(y)).sum();
                    let w = dn * ys.iter().map(|&y| row[y]).product::<f64>() * hsum / h.get(x);
                    if w <= 0.0 {
                        continue;
                    }
                    for k in 0..n {
                        let wk = w * h.get(ys[k]) / hsum;
                        if wk <= 0.0 {
                            continue;
                        }
                        let mut partial: Vec<(Vec<Node>, f64)> = vec![(Vec::new(), wk)];
                        for (j, &y) in ys.iter().enumerate() {
                            let law = if j == k {
                                self.biased(ht, y, depth - 1)?
                            } else {
                                self.plain(y, depth - 1, Colour::White)?
                            };
                            self.check((partial.len() * law.len()) as f64)?;
                            let mut next = Vec::with_capacity(partial.len() * law.len());
                            for (kids, p) in &partial {
                                for (node, q) in law.iter() {
                                    let mut kids = kids.clone();
                                    kids.push(node.clone());
                                    next.push((kids, p * q));
                                }
                            }
                            partial = next;
                        }
                        for (children, p) in partial {
                            items.push((
                                Node {
                                    location: x,
                                    colour: Colour::Blue,
                                    children,
                                },
                                p,
                            ));
                        }
                        self.check(items.len() as f64)?;
                    }
                }
            }
            aggregate(items)
        };
        let law = Rc::new(law);
        self.biased.insert((x, depth), law.clone());
        Ok(law)
    }
}

/// Calls `f` with every count vector of length `m` summing to `k`.
fn multisets(m: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(i: usize, left: usize, counts: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if i + 1 == counts.len() {
            counts[i] = left;
            f(counts);
            return;
        }
        for c in (0..=left).rev() {
            counts[i] = c;
            rec(i + 1, left - c, counts, f);
        }
        counts[i] = 0;
    }
    if m == 0 {
        if k == 0 {
            f(&[]);
        }
        return;
    }
    let mut counts = vec![0; m];
    rec(0, k, &mut counts, f);
}

fn tuples_of(support: &[usize], n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == n {
        out.push(cur.clone());
        return;
    }
    for &y in support {
        cur.push(y);
        tuples_of(support, n, cur, out);
        cur.pop();
    }
}

fn to_pmf(scheme: Scheme, law: &[(Node, f64)]) -> TreePmf {
    let mut pmf = TreePmf::new(scheme);
    for (node, p) in law {
        pmf.add(node.encode(), *p);
    }
    pmf
}

/// Exact law of the plain tree from `x` cut after `depth` generations.
pub fn enumerate_truncated_bmc(
    model: &Model,
    x: usize,
    depth: usize,
    budget: usize,
) -> Result<TreePmf> {
    let mut e = Enumerator::new(model, budget);
    let law = e.plain(x, depth, Colour::Uncoloured)?;
    Ok(to_pmf(Scheme::Uncoloured, &law))
}

/// Exact law of the biased tree from a blue root at `x`, cut after `depth`.
pub fn enumerate_truncated_biased(
    model: &Model,
    ht: &HTransform,
    x: usize,
    depth: usize,
    budget: usize,
) -> Result<TreePmf> {
    let mut e = Enumerator::new(model, budget);
    let law = e.biased(ht, x, depth)?;
    Ok(to_pmf(Scheme::Coloured, &law))
}

/// Exact law of the size-biased plain tree from `x` followed by the uniform
/// entrance colouring, cut after `depth`. A blue line ending at a cut
/// individual `v` off `B` carries the conditional expected number of
/// entrance individuals below it, `h(v)`.
pub fn enumerate_reweighted_coloured(
    model: &Model,
    ht: &HTransform,
    x: usize,
    depth: usize,
    budget: usize,
) -> Result<TreePmf> {
    let mut e = Enumerator::new(model, budget);
    let law = e.plain(x, depth, Colour::Uncoloured)?;
    let hx = ht.h().get(x);
    let mut pmf = TreePmf::new(Scheme::Coloured);
    for (tree, p) in law.iter() {
        for (coloured, f) in blue_lines(tree, 0, depth, ht) {
            pmf.add(coloured.encode(), p * f / hx);
        }
    }
    Ok(pmf)
}

fn whiten(node: &Node) -> Node {
    Node {
        location: node.location,
        colour: Colour::White,
        children: node.children.iter().map(whiten).collect(),
    }
}

/// Every way to paint a blue line from `node` down to a feasible tip, with
/// the tip's weight.
fn blue_lines(node: &Node, gen: usize, depth: usize, ht: &HTransform) -> Vec<(Node, f64)> {
    if ht.set().contains(node.location) {
        let mut n = whiten(node);
        n.colour = Colour::Blue;
        return vec![(n, 1.0)];
    }
    if gen == depth {
        return vec![(
            Node::leaf(node.location, Colour::Blue),
            ht.h().get(node.location),
        )];
    }
    let mut out = Vec::new();
    for (i, c) in node.children.iter().enumerate() {
        for (painted, f) in blue_lines(c, gen + 1, depth, ht) {
            let children = node
                .children
                .iter()
                .enumerate()
                .map(|(j, o)| if j == i { painted.clone() } else { whiten(o) })
                .collect();
            out.push((
                Node {
                    location: node.location,
                    colour: Colour::Blue,
                    children,
                },
                f,
            ));
        }
    }
    out
}
