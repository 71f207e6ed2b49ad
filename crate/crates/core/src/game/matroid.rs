//! Brute-force matroid checks on small ground sets, with subsets stored as bitmasks.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest ground set the checks accept.
pub const MAX_GROUND: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatroidViolation {
    /// The empty set is not independent.
    MissingEmpty,
    /// `set` is independent but `subset` (one element smaller) is not.
    NotDownwardClosed { set: Vec<usize>, subset: Vec<usize> },
    /// `|smaller| < |larger|` and no element of `larger` extends `smaller`.
    NoExchange {
        smaller: Vec<usize>,
        larger: Vec<usize>,
    },
    /// Two proposed bases of different sizes.
    UnequalBases { first: Vec<usize>, second: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatroidCheck {
    pub is_matroid: bool,
    pub counterexample: Option<MatroidViolation>,
    /// Maximal independent sets (meaningful when `is_matroid`).
    pub bases: Vec<Vec<usize>>,
    pub rank: usize,
}

fn to_mask(set: &[usize], ground: usize) -> Result<u32> {
    set.iter().try_fold(0u32, |mask, &r| {
        if r >= ground {
            Err(Error::InvalidParameter(format!(
                "element {r} outside ground set of size {ground}"
            )))
        } else {
            Ok(mask | 1 << r)
        }
    })
}

fn to_set(mask: u32) -> Vec<usize> {
    (0..32).filter(|&r| mask >> r & 1 == 1).collect()
}

fn check_ground(ground: usize) -> Result<()> {
    if ground > MAX_GROUND {
        return Err(Error::InvalidParameter(format!(
            "ground set of {ground} elements exceeds {MAX_GROUND}"
        )));
    }
    Ok(())
}

/// Checks both matroid axioms for the independent-set family `family` over
/// `{0, ..., ground - 1}`.
pub fn matroid_check(ground: usize, family: &[Vec<usize>]) -> Result<MatroidCheck> {
    check_ground(ground)?;
    let masks: HashSet<u32> = family
        .iter()
        .map(|s| to_mask(s, ground))
        .collect::<Result<_>>()?;
    let mut sorted: Vec<u32> = masks.iter().copied().collect();
    sorted.sort_by_key(|&m| (m.count_ones(), to_set(m)));

    let fail = |v: MatroidViolation| MatroidCheck {
        is_matroid: false,
        counterexample: Some(v),
        bases: Vec::new(),
        rank: 0,
    };

    if !masks.contains(&0) {
        return Ok(fail(MatroidViolation::MissingEmpty));
    }
    // single-element removals suffice: closure then follows by induction
    for &set in &sorted {
        for r in to_set(set) {
            let sub = set & !(1 << r);
            if !masks.contains(&sub) {
                return Ok(fail(MatroidViolation::NotDownwardClosed {
                    set: to_set(set),
                    subset: to_set(sub),
                }));
            }
        }
    }
    for &small in &sorted {
        for &large in &sorted {
            if small.count_ones() >= large.count_ones() {
                continue;
            }
            let extends = to_set(large & !small)
                .into_iter()
                .any(|r| masks.contains(&(small | 1 << r)));
            if !extends {
                return Ok(fail(MatroidViolation::NoExchange {
                    smaller: to_set(small),
                    larger: to_set(large),
                }));
            }
        }
    }

    let bases: Vec<Vec<usize>> = sorted
        .iter()
        .filter(|&&set| (0..ground).all(|r| set >> r & 1 == 1 || !masks.contains(&(set | 1 << r))))
        .map(|&set| to_set(set))
        .collect();
    let rank = bases.iter().map(Vec::len).max().unwrap_or(0);
    Ok(MatroidCheck {
        is_matroid: true,
        counterexample: None,
        bases,
        rank,
    })
}

/// Whether `bases` is the basis family of some matroid: all of the same size, and
/// their downward closure passes [`matroid_check`].
pub fn bases_check(ground: usize, bases: &[Vec<usize>]) -> Result<MatroidCheck> {
    check_ground(ground)?;
    let masks: Vec<u32> = bases
        .iter()
        .map(|s| to_mask(s, ground))
        .collect::<Result<_>>()?;
    for (p, &x) in masks.iter().enumerate() {
        if let Some(&y) = masks[p + 1..].iter().find(|&&y| y.count_ones() != x.count_ones()) {
            return Ok(MatroidCheck {
                is_matroid: false,
                counterexample: Some(MatroidViolation::UnequalBases {
                    first: to_set(x),
                    second: to_set(y),
                }),
                bases: Vec::new(),
                rank: 0,
            });
        }
    }
    let mut closure = HashSet::new();
    for &base in &masks {
        // every submask of base
        let mut sub = base;
        loop {
            closure.insert(sub);
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & base;
        }
    }
    if masks.is_empty() {
        closure.insert(0);
    }
    let family: Vec<Vec<usize>> = closure.into_iter().map(to_set).collect();
    matroid_check(ground, &family)
}

/// All subsets of `{0, ..., ground - 1}` with at most `k` elements.
pub fn uniform_family(ground: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    check_ground(ground)?;
    Ok((0u32..1 << ground)
        .filter(|m| m.count_ones() as usize <= k)
        .map(to_set)
        .collect())
}
