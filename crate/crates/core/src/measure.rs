//! Dyadic measures and their product coefficients.
//!
//! A dyadic set is a root set `X` with an ordered binary tree of subsets: every
//! node `S` splits into a left child `L(S)` and a right child `R(S)`. A
//! non-negative measure `μ` on the leaves is additive up the tree, and each
//! internal node carries a *product coefficient*
//!
//! ```text
//! a_S = (μ(L(S)) − μ(R(S))) / μ(S)        (a_S = 0 when μ(S) = 0)
//! ```
//!
//! so that `μ(L(S)) = ½(1 + a_S)·μ(S)` and `μ(R(S)) = ½(1 − a_S)·μ(S)`. The
//! measure is recovered from the root mass and the coefficients by the product
//! formula `μ = μ(X)·∏_S (1 + a_S·h_S)·dy`, where `h_S` is the Haar-like
//! function (+1 on `L(S)`, −1 on `R(S)`, 0 outside `S`) and `dy` gives each
//! of the `2^d` leaves mass `2^{−d}`.
//!
//! Trees are stored breadth first: node 0 is `X`, the children of node `i` are
//! `2i + 1` (left) and `2i + 2` (right). Leaf `j` of a depth-`d` tree is node
//! `2^d − 1 + j`, and the bits of `j` from most to least significant spell its
//! left (0) / right (1) path from the root.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Deepest supported tree (1024 leaves).
pub const MAX_DEPTH: u32 = 16;

fn check_mass(m: f64, what: &str) -> Result<()> {
    if !m.is_finite() || m < 0.0 {
        return Err(Error::arg(format!(
            "{what} must be finite and non-negative, got {m}"
        )));
    }
    Ok(())
}

fn check_coefficient(a: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&a) {
        return Err(Error::arg(format!(
            "product coefficient must lie in [-1, 1], got {a}"
        )));
    }
    Ok(())
}

/// `(left − right) / (left + right)`, or exactly 0 for an empty set.
///
/// The result is always inside `[-1, 1]`: with non-negative inputs the
/// numerator's magnitude never exceeds the denominator, and IEEE division is
/// correctly rounded.
pub fn product_coefficient(left_mass: f64, right_mass: f64) -> Result<f64> {
    check_mass(left_mass, "left mass")?;
    check_mass(right_mass, "right mass")?;
    let total = left_mass + right_mass;
    if total > 0.0 {
        Ok((left_mass - right_mass) / total)
    } else {
        Ok(0.0)
    }
}

/// Split `parent_mass` between the two children of a node with coefficient `a`.
pub fn child_masses(parent_mass: f64, a: f64) -> Result<(f64, f64)> {
    check_mass(parent_mass, "parent mass")?;
    check_coefficient(a)?;
    Ok((0.5 * (1.0 + a) * parent_mass, 0.5 * (1.0 - a) * parent_mass))
}

/// Haar-like function of internal node `node` evaluated on leaf `leaf` of a
/// depth-`depth` tree: +1 if the leaf descends through the left child, −1
/// through the right child, 0 if the leaf is outside the node.
pub fn haar(node: usize, leaf: usize, depth: u32) -> i8 {
    // level of `node` = floor(log2(node + 1))
    let level = usize::BITS - 1 - (node + 1).leading_zeros();
    debug_assert!(level < depth);
    let prefix = (node + 1) - (1 << level);
    let shift = depth - level;
    if leaf >> shift != prefix {
        return 0;
    }
    if (leaf >> (shift - 1)) & 1 == 0 {
        1
    } else {
        -1
    }
}

/// Non-negative masses on the `2^depth` leaves of a dyadic tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafMassVector {
    depth: u32,
    masses: Vec<f64>,
}

impl LeafMassVector {
    /// The length must be a power of two, at least 2.
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        let n = masses.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::arg(format!(
                "leaf count must be a power of two >= 2, got {n}"
            )));
        }
        let depth = n.trailing_zeros();
        if depth > MAX_DEPTH {
            return Err(Error::arg(format!("depth {depth} exceeds {MAX_DEPTH}")));
        }
        for &m in &masses {
            check_mass(m, "leaf mass")?;
        }
        Ok(LeafMassVector { depth, masses })
    }

    /// Leaf masses from integer counts.
    pub fn from_counts(counts: &[u32]) -> Result<Self> {
        Self::new(counts.iter().map(|&c| f64::from(c)).collect())
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }
}

/// Root mass plus breadth-first product coefficients of a depth-`d` tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTree {
    depth: u32,
    root_mass: f64,
    coefficients: Vec<f64>,
}

/// Which of the two structural constraints a node breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConstraintRule {
    /// `a_S = 1` but the subtree rooted at `R(S)` has a non-zero coefficient.
    RightSubtreeNotZero,
    /// `a_S = −1` but the subtree rooted at `L(S)` has a non-zero coefficient.
    LeftSubtreeNotZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Node whose coefficient should have been zero.
    pub node: usize,
    /// Ancestor whose coefficient is ±1.
    pub ancestor: usize,
    pub rule: ConstraintRule,
}

impl CoefficientTree {
    pub fn new(depth: u32, root_mass: f64, coefficients: Vec<f64>) -> Result<Self> {
        if depth == 0 || depth > MAX_DEPTH {
            return Err(Error::arg(format!(
                "depth must be in 1..={MAX_DEPTH}, got {depth}"
            )));
        }
        let expected = (1usize << depth) - 1;
        if coefficients.len() != expected {
            return Err(Error::arg(format!(
                "depth {depth} needs {expected} coefficients, got {}",
                coefficients.len()
            )));
        }
        check_mass(root_mass, "root mass")?;
        for &a in &coefficients {
            check_coefficient(a)?;
        }
        Ok(CoefficientTree {
            depth,
            root_mass,
            coefficients,
        })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn root_mass(&self) -> f64 {
        self.root_mass
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    /// Every node breaking constraint 3a (`a_S = 1` ⇒ subtree at `R(S)` is 0)
    /// or 3b (`a_S = −1` ⇒ subtree at `L(S)` is 0). Empty means valid.
    pub fn constraint_violations(&self) -> Vec<Violation> {
        let n = self.coefficients.len();
        let mut out = Vec::new();
        for (s, &a) in self.coefficients.iter().enumerate() {
            let (root, rule) = if a == 1.0 {
                (2 * s + 2, ConstraintRule::RightSubtreeNotZero)
            } else if a == -1.0 {
                (2 * s + 1, ConstraintRule::LeftSubtreeNotZero)
            } else {
                continue;
            };
            // walk the subtree level by level as contiguous index ranges
            let (mut lo, mut hi) = (root, root);
            while lo < n {
                for node in lo..=hi.min(n - 1) {
                    if self.coefficients[node] != 0.0 {
                        out.push(Violation {
                            node,
                            ancestor: s,
                            rule,
                        });
                    }
                }
                lo = 2 * lo + 1;
                hi = 2 * hi + 2;
            }
        }
        out.sort_by_key(|v| (v.node, v.ancestor));
        out
    }

    /// `Ok(())` when both constraints hold everywhere, else every violation.
    pub fn validate_constraints(&self) -> std::result::Result<(), Vec<Violation>> {
        let v = self.constraint_violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    /// Keep only the first `levels` levels of coefficients.
    pub fn truncated(&self, levels: u32) -> Result<CoefficientTree> {
        if levels == 0 || levels > self.depth {
            return Err(Error::arg(format!(
                "cannot truncate depth {} to {levels}",
                self.depth
            )));
        }
        let keep = (1usize << levels) - 1;
        Ok(CoefficientTree {
            depth: levels,
            root_mass: self.root_mass,
            coefficients: self.coefficients[..keep].to_vec(),
        })
    }
}

/// Aggregate leaf masses bottom-up and compute every node's coefficient.
///
/// Nodes with zero mass get coefficient 0, so whole emptied subtrees are zero
/// and the result always satisfies the structural constraints.
pub fn coefficients_from_leaves(leaves: &LeafMassVector) -> CoefficientTree {
    let d = leaves.depth;
    let internal = (1usize << d) - 1;
    let mut mass = vec![0.0; 2 * internal + 1];
    mass[internal..].copy_from_slice(&leaves.masses);
    for i in (0..internal).rev() {
        mass[i] = mass[2 * i + 1] + mass[2 * i + 2];
    }
    let coefficients = (0..internal)
        .map(|i| {
            let (l, r) = (mass[2 * i + 1], mass[2 * i + 2]);
            if mass[i] > 0.0 {
                (l - r) / mass[i]
            } else {
                0.0
            }
        })
        .collect();
    CoefficientTree {
        depth: d,
        root_mass: mass[0],
        coefficients,
    }
}

/// Leaf masses by the top-down recursion `μ(L) = ½(1+a)μ(S)`, `μ(R) = ½(1−a)μ(S)`.
pub fn reconstruct_leaves(tree: &CoefficientTree) -> LeafMassVector {
    let internal = tree.coefficients.len();
    let mut mass = vec![0.0; 2 * internal + 1];
    mass[0] = tree.root_mass;
    for i in 0..internal {
        let a = tree.coefficients[i];
        mass[2 * i + 1] = 0.5 * (1.0 + a) * mass[i];
        mass[2 * i + 2] = 0.5 * (1.0 - a) * mass[i];
    }
    LeafMassVector {
        depth: tree.depth,
        masses: mass.split_off(internal),
    }
}

/// Leaf masses by the product formula `μ(X)·∏(1 + a_S·h_S(leaf))·2^{−d}`.
///
/// Independent of [`reconstruct_leaves`]: each leaf multiplies the Haar
/// factors of every internal node directly.
pub fn product_formula_leaves(tree: &CoefficientTree) -> LeafMassVector {
    let d = tree.depth;
    let dy = (0.5f64).powi(d as i32);
    let masses = (0..1usize << d)
        .map(|leaf| {
            let prod = tree
                .coefficients
                .iter()
                .enumerate()
                .map(|(s, &a)| 1.0 + a * f64::from(haar(s, leaf, d)))
                .product::<f64>();
            tree.root_mass * prod * dy
        })
        .collect();
    LeafMassVector { depth: d, masses }
}
