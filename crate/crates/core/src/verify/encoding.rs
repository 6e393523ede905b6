//! Canonical text encoding of finite coloured trees modulo label
//! isomorphism: a node is `<location><colour>` followed, if it has children,
//! by the parenthesised comma-separated child encodings sorted by
//! (location, encoding). Roots of a forest are sorted the same way and
//! joined with `;`.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::forest::{Colour, Forest, Individual, Truncation};

/// An unlabelled tree node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub location: usize,
    pub colour: Colour,
    pub children: Vec<Node>,
}

impl Node {
    pub fn leaf(location: usize, colour: Colour) -> Self {
        Self {
            location,
            colour,
            children: Vec::new(),
        }
    }

    pub fn encode(&self) -> String {
        let mut kids: Vec<(usize, String)> = self
            .children
            .iter()
            .map(|c| (c.location, c.encode()))
            .collect();
        join_node(self.location, self.colour, &mut kids)
    }
}

fn by_location(a: &(usize, String), b: &(usize, String)) -> Ordering {
    a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1))
}

fn join_node(location: usize, colour: Colour, kids: &mut [(usize, String)]) -> String {
    let mut s = format!("{location}{}", colour.code());
    if !kids.is_empty() {
        kids.sort_by(by_location);
        s.push('(');
        for (i, (_, k)) in kids.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(k);
        }
        s.push(')');
    }
    s
}

/// Canonical encoding of a whole forest.
pub fn encode_forest(forest: &Forest) -> String {
    // Bottom-up over a breadth-first order, so deep trees do not recurse.
    let roots = forest.roots();
    let mut order = roots.clone();
    let mut k = 0;
    while k < order.len() {
        order.extend_from_slice(forest.children_of(order[k]));
        k += 1;
    }
    let mut enc: Vec<Option<String>> = vec![None; forest.len()];
    for &i in order.iter().rev() {
        let ind = forest.individuals()[i];
        let mut kids: Vec<(usize, String)> = forest
            .children_of(i)
            .iter()
            .map(|&c| {
                (
                    forest.individuals()[c].location,
                    enc[c].take().expect("child encoded first"),
                )
            })
            .collect();
        enc[i] = Some(join_node(ind.location, ind.colour, &mut kids));
    }
    let mut tops: Vec<(usize, String)> = roots
        .iter()
        .map(|&r| {
            (
                forest.individuals()[r].location,
                enc[r].take().expect("encoded"),
            )
        })
        .collect();
    tops.sort_by(by_location);
    tops.into_iter().map(|t| t.1).collect::<Vec<_>>().join(";")
}

/// Encoding of the forest cut after generation `depth`.
pub fn encode_truncated(forest: &Forest, depth: usize) -> String {
    encode_forest(&forest.truncated(depth))
}

/// Parses an encoding back into unlabelled trees.
pub fn decode(text: &str) -> Result<Vec<Node>> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    let mut out = Vec::new();
    if text.is_empty() {
        return Ok(out);
    }
    loop {
        out.push(parse_node(bytes, &mut pos)?);
        match bytes.get(pos) {
            None => break,
            Some(b';') => pos += 1,
            Some(c) => return Err(mismatch(pos, *c)),
        }
    }
    Ok(out)
}

fn mismatch(pos: usize, c: u8) -> Error {
    Error::EncodingMismatch(format!("unexpected `{}` at offset {pos}", c as char))
}

fn parse_node(bytes: &[u8], pos: &mut usize) -> Result<Node> {
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if *pos == start {
        return Err(Error::EncodingMismatch(format!(
            "missing location at offset {start}"
        )));
    }
    let location: usize = std::str::from_utf8(&bytes[start..*pos])
        .expect("ascii digits")
        .parse()
        .map_err(|_| Error::EncodingMismatch("location out of range".into()))?;
    let colour = bytes
        .get(*pos)
        .and_then(|&c| Colour::from_code(c as char))
        .ok_or_else(|| Error::EncodingMismatch(format!("missing colour at offset {}", *pos)))?;
    *pos += 1;
    let mut children = Vec::new();
    if bytes.get(*pos) == Some(&b'(') {
        *pos += 1;
        loop {
            children.push(parse_node(bytes, pos)?);
            match bytes.get(*pos) {
                Some(b',') => *pos += 1,
                Some(b')') => {
                    *pos += 1;
                    break;
                }
                Some(&c) => return Err(mismatch(*pos, c)),
                None => return Err(Error::EncodingMismatch("unterminated child list".into())),
            }
        }
    }
    Ok(Node {
        location,
        colour,
        children,
    })
}

/// Builds a forest with labels `1, 2, ...` from decoded trees.
pub fn to_forest(trees: &[Node]) -> Forest {
    let mut inds = Vec::new();
    let mut stack: Vec<(&Node, Option<u64>)> = trees.iter().rev().map(|t| (t, None)).collect();
    while let Some((node, pred)) = stack.pop() {
        let label = inds.len() as u64 + 1;
        inds.push(Individual {
            label,
            predecessor: pred,
            location: node.location,
            colour: node.colour,
        });
        for c in node.children.iter().rev() {
            stack.push((c, Some(label)));
        }
    }
    Forest::new(inds, Truncation::default())
}

/// The state sequence of a linear forest (a single chain), if it is one.
pub fn linear_states(forest: &Forest) -> Option<Vec<usize>> {
    let roots = forest.roots();
    let [mut cur] = roots.as_slice() else {
        return None;
    };
    let mut states = vec![forest.individuals()[cur].location];
    loop {
        match forest.children_of(cur) {
            [] => break,
            [c] => {
                cur = *c;
                states.push(forest.individuals()[cur].location);
            }
            _ => return None,
        }
    }
    (states.len() == forest.len()).then_some(states)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_independent_and_round_trips() {
        let a = Forest::from_records("1 - 1 blue\n2 1 2 white\n3 1 0 blue\n4 3 1 white\n").unwrap();
        let b = Forest::from_records("9 - 1 blue\n7 9 0 blue\n8 9 2 white\n5 7 1 white\n").unwrap();
        let ea = encode_forest(&a);
        assert_eq!(ea, "1b(0b(1w),2w)");
        assert_eq!(ea, encode_forest(&b));
        let back = to_forest(&decode(&ea).unwrap());
        assert_eq!(encode_forest(&back), ea);
        assert_eq!(encode_truncated(&a, 0), "1b");
        assert!(decode("1x").is_err());
        assert!(decode("1b(0w").is_err());
        assert_eq!(decode("").unwrap(), vec![]);
    }

    #[test]
    fn forests_and_chains() {
        let f = Forest::from_records("1 - 2 none\n2 - 0 none\n3 2 1 none\n").unwrap();
        assert_eq!(encode_forest(&f), "0u(1u);2u");
        assert_eq!(linear_states(&f), None);
        let chain = Forest::from_records("1 - 2 none\n2 1 1 none\n3 2 0 none\n").unwrap();
        assert_eq!(linear_states(&chain), Some(vec![2, 1, 0]));
    }

    #[test]
    fn multi_digit_locations_sort_numerically() {
        let f = Forest::from_records("1 - 0 white\n2 1 10 white\n3 1 9 white\n").unwrap();
        assert_eq!(encode_forest(&f), "0w(9w,10w)");
        assert_eq!(
            encode_forest(&to_forest(&decode("0w(9w,10w)").unwrap())),
            "0w(9w,10w)"
        );
    }
}
