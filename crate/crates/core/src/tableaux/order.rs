//! Classical order conditions via rooted trees.
//!
//! A method has order `q` when `b^T Φ(t) = 1/γ(t)` for every rooted tree `t`
//! with at most `q` vertices. For additive pairs every non-root vertex is
//! additionally coloured by the coefficient matrix it is reached through, and
//! the condition must hold for every colouring.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use super::{ArkPair, ButcherTableau, ORDER_TOLERANCE};

/// Highest order checked.
pub const MAX_ORDER: usize = 5;

/// Rooted tree stored as its sorted list of subtrees.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RootedTree(Vec<RootedTree>);

impl RootedTree {
    pub fn leaf() -> Self {
        RootedTree(Vec::new())
    }

    pub fn order(&self) -> usize {
        1 + self.0.iter().map(RootedTree::order).sum::<usize>()
    }

    /// Tree factorial `γ(t)`.
    pub fn density(&self) -> f64 {
        self.order() as f64 * self.0.iter().map(RootedTree::density).product::<f64>()
    }

    pub fn children(&self) -> &[RootedTree] {
        &self.0
    }

    fn canonical(mut children: Vec<RootedTree>) -> Self {
        children.sort();
        RootedTree(children)
    }

    /// Every tree obtained by attaching one new leaf somewhere.
    fn grafts(&self) -> Vec<RootedTree> {
        let mut out = Vec::new();
        let mut at_root = self.0.clone();
        at_root.push(RootedTree::leaf());
        out.push(RootedTree::canonical(at_root));
        for (i, child) in self.0.iter().enumerate() {
            for grown in child.grafts() {
                let mut children = self.0.clone();
                children[i] = grown;
                out.push(RootedTree::canonical(children));
            }
        }
        out
    }
}

/// All non-isomorphic rooted trees with exactly `n` vertices.
pub fn trees_of_order(n: usize) -> Vec<RootedTree> {
    if n == 0 {
        return Vec::new();
    }
    let mut level: BTreeSet<RootedTree> = BTreeSet::from([RootedTree::leaf()]);
    for _ in 1..n {
        level = level.iter().flat_map(RootedTree::grafts).collect();
    }
    level.into_iter().collect()
}

/// Stage vectors `Φ` for every colouring of the non-root vertices of `tree`.
fn stage_weights(tree: &RootedTree, matrices: &[&DMatrix<f64>]) -> Vec<DVector<f64>> {
    let s = matrices[0].nrows();
    let mut acc = vec![DVector::from_element(s, 1.0)];
    for child in tree.children() {
        let below = stage_weights(child, matrices);
        let options: Vec<DVector<f64>> = matrices
            .iter()
            .flat_map(|m| below.iter().map(move |v| *m * v))
            .collect();
        acc = acc
            .iter()
            .flat_map(|a| options.iter().map(move |o| a.component_mul(o)))
            .collect();
    }
    acc
}

/// Largest residual of the order conditions for trees with `n` vertices.
pub fn condition_residual(b: &DVector<f64>, matrices: &[&DMatrix<f64>], n: usize) -> f64 {
    trees_of_order(n)
        .iter()
        .flat_map(|t| {
            let target = 1.0 / t.density();
            stage_weights(t, matrices)
                .into_iter()
                .map(move |phi| (b.dot(&phi) - target).abs())
        })
        .fold(0.0, f64::max)
}

fn highest_order(b: &DVector<f64>, matrices: &[&DMatrix<f64>], up_to: usize) -> usize {
    let up_to = up_to.min(MAX_ORDER);
    (1..=up_to)
        .find(|&n| condition_residual(b, matrices, n) > ORDER_TOLERANCE)
        .map_or(up_to, |failed| failed - 1)
}

/// Highest `q <= up_to` (capped at [`MAX_ORDER`]) for which all order
/// conditions through order `q` hold.
pub fn verify_order(tableau: &ButcherTableau, up_to: usize) -> usize {
    highest_order(&tableau.b, &[&tableau.a], up_to)
}

/// Same as [`verify_order`] for weight row `k` of an additive pair, including
/// every coupling condition between the explicit and implicit parts.
pub fn verify_additive_order(pair: &ArkPair, k: usize, up_to: usize) -> usize {
    highest_order(&pair.weights[k], &[&pair.explicit, &pair.implicit], up_to)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableaux::{ark_pair, builtin_catalogue, embedded_set, Method};

    #[test]
    fn tree_counts() {
        let counts: Vec<usize> = (1..=6).map(|n| trees_of_order(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 4, 9, 20]);
    }

    #[test]
    fn densities_of_small_trees() {
        let mut d: Vec<f64> = trees_of_order(3).iter().map(RootedTree::density).collect();
        d.sort_by(f64::total_cmp);
        assert_eq!(d, vec![3.0, 6.0]);
        let mut d4: Vec<f64> = trees_of_order(4).iter().map(RootedTree::density).collect();
        d4.sort_by(f64::total_cmp);
        assert_eq!(d4, vec![4.0, 8.0, 12.0, 24.0]);
    }

    #[test]
    fn ssprk22_rows() {
        let set = embedded_set("SSPRK(2,2)").unwrap();
        assert_eq!(verify_order(&set.tableau(0), 5), 2);
        // b2 . c = 2/3 != 1/2
        assert_eq!(verify_order(&set.tableau(1), 5), 1);
    }

    #[test]
    fn rk44_is_fourth_order() {
        let set = embedded_set("RK(4,4)").unwrap();
        assert_eq!(verify_order(&set.tableau(0), 5), 4);
        assert_eq!(verify_order(&set.tableau(1), 5), 2);
        assert_eq!(verify_order(&set.tableau(0), 3), 3);
    }

    #[test]
    fn every_catalogue_row_meets_its_stated_order() {
        for method in builtin_catalogue().values() {
            match method {
                Method::Explicit(set) => {
                    for k in 0..set.len() {
                        let got = verify_order(&set.tableau(k), MAX_ORDER);
                        if set.name == "DP(7,5)" && k == 2 {
                            // The published decimal row is only third order.
                            assert_eq!(got, 3);
                            continue;
                        }
                        assert!(got >= set.orders[k], "{} b{}: {got}", set.name, k + 1);
                    }
                }
                Method::Additive(pair) => {
                    for k in 0..pair.len() {
                        let got = verify_additive_order(pair, k, MAX_ORDER);
                        assert_eq!(got, pair.orders[k], "{} b{}", pair.name, k + 1);
                    }
                }
            }
        }
    }

    #[test]
    fn ark_parts_individually() {
        let pair = ark_pair("ARK4(3)6L[2]SA").unwrap();
        assert_eq!(verify_order(&pair.explicit_part(0), 5), 4);
        assert_eq!(verify_order(&pair.implicit_part(0), 5), 4);
        assert_eq!(verify_order(&pair.implicit_part(1), 5), 3);
    }
}
