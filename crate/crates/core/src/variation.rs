//! Crossover and mutation operators over prefix-encoded trees.
//!
//! Common-region based operators (one-point, uniform) and context-preserving
//! crossover exchange material at matching tree coordinates, so they can never
//! deepen a child beyond its parents. Subtree and size-fair crossover may, and
//! a child that breaks the depth limit is discarded and the operator retried.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::gp::init::grow_into;
use crate::gp::{GpTree, InitMethod, Node};

/// Retries allowed after a depth-violating child before falling back to a copy
/// of the fitter parent.
pub const MAX_RETRIES: usize = 5;

/// Probability that subtree crossover picks an internal node (when one exists).
const INTERNAL_POINT_BIAS: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CrossoverKind {
    Subtree,
    Uniform,
    SizeFair,
    OnePoint,
    ContextPreserving,
}

impl CrossoverKind {
    pub const ALL: [CrossoverKind; 5] = [
        CrossoverKind::Subtree,
        CrossoverKind::Uniform,
        CrossoverKind::SizeFair,
        CrossoverKind::OnePoint,
        CrossoverKind::ContextPreserving,
    ];

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::ALL[rng.random_range(0..Self::ALL.len())]
    }
}

/// Structural limits every offspring must satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_depth: usize,
    /// Number of terminals (input words) available to new subtrees.
    pub terminals: usize,
}

/// Produces one child from `fitter` and `other`.
///
/// The child inherits its root context from `fitter`. When every attempt yields
/// a tree deeper than `limits.max_depth`, a copy of `fitter` is returned.
pub fn crossover<R: Rng + ?Sized>(kind: CrossoverKind, fitter: &GpTree, other: &GpTree, limits: &Limits, rng: &mut R) -> GpTree {
    for _ in 0..=MAX_RETRIES {
        let child = match kind {
            CrossoverKind::Subtree => subtree(fitter, other, rng),
            CrossoverKind::Uniform => uniform(fitter, other, rng),
            CrossoverKind::SizeFair => size_fair(fitter, other, rng),
            CrossoverKind::OnePoint => one_point(fitter, other, rng),
            CrossoverKind::ContextPreserving => context_preserving(fitter, other, rng),
        };
        if child.depth() <= limits.max_depth {
            return child;
        }
    }
    fitter.clone()
}

/// Subtree mutation: a uniformly chosen node is replaced by a grow-generated
/// subtree that fits in the remaining depth budget.
pub fn mutate<R: Rng + ?Sized>(tree: &GpTree, limits: &Limits, rng: &mut R) -> GpTree {
    let point = rng.random_range(0..tree.size());
    let depth = tree.node_depths()[point];
    let budget = limits.max_depth.saturating_sub(depth);
    let mut nodes = Vec::new();
    grow_into(&mut nodes, 0, budget, InitMethod::Grow, limits.terminals, rng);
    tree.replace_subtree(point, &GpTree::from_prefix_unchecked(nodes))
}

fn biased_point<R: Rng + ?Sized>(tree: &GpTree, rng: &mut R) -> usize {
    let (internal, leaves): (Vec<usize>, Vec<usize>) = (0..tree.size()).partition(|&i| !tree.nodes()[i].is_terminal());
    if !internal.is_empty() && rng.random_bool(INTERNAL_POINT_BIAS) {
        *internal.choose(rng).unwrap()
    } else {
        *leaves.choose(rng).unwrap()
    }
}

fn subtree<R: Rng + ?Sized>(a: &GpTree, b: &GpTree, rng: &mut R) -> GpTree {
    let pa = biased_point(a, rng);
    let pb = biased_point(b, rng);
    a.replace_subtree(pa, &b.subtree(pb))
}

/// Node pairs reachable from both roots by following the same child indices.
/// With `match_arity` the descent stops at nodes whose arities differ (the
/// common region); otherwise it continues through the shared child positions.
fn aligned_pairs(a: &GpTree, b: &GpTree, match_arity: bool) -> Vec<(usize, usize)> {
    fn visit(a: &GpTree, b: &GpTree, ia: usize, ib: usize, match_arity: bool, out: &mut Vec<(usize, usize)>) {
        out.push((ia, ib));
        let (na, nb) = (a.nodes()[ia].arity(), b.nodes()[ib].arity());
        if match_arity && na != nb {
            return;
        }
        for (ca, cb) in a.children(ia).into_iter().zip(b.children(ib)) {
            visit(a, b, ca, cb, match_arity, out);
        }
    }
    let mut out = Vec::new();
    visit(a, b, 0, 0, match_arity, &mut out);
    out
}

fn one_point<R: Rng + ?Sized>(a: &GpTree, b: &GpTree, rng: &mut R) -> GpTree {
    let region = aligned_pairs(a, b, true);
    let &(ia, ib) = region.choose(rng).unwrap();
    a.replace_subtree(ia, &b.subtree(ib))
}

fn context_preserving<R: Rng + ?Sized>(a: &GpTree, b: &GpTree, rng: &mut R) -> GpTree {
    let shared = aligned_pairs(a, b, false);
    let &(ia, ib) = shared.choose(rng).unwrap();
    a.replace_subtree(ia, &b.subtree(ib))
}

/// Walks the common region; interior nodes of matching arity contribute the
/// label of a random parent, boundary nodes contribute a whole subtree.
fn uniform<R: Rng + ?Sized>(a: &GpTree, b: &GpTree, rng: &mut R) -> GpTree {
    fn build<R: Rng + ?Sized>(a: &GpTree, b: &GpTree, ia: usize, ib: usize, rng: &mut R, out: &mut Vec<Node>) {
        let (na, nb) = (a.nodes()[ia], b.nodes()[ib]);
        let take_b = rng.random_bool(0.5);
        if na.arity() == nb.arity() && na.arity() > 0 {
            out.push(if take_b { nb } else { na });
            for (ca, cb) in a.children(ia).into_iter().zip(b.children(ib)) {
                build(a, b, ca, cb, rng, out);
            }
        } else if take_b {
            out.extend_from_slice(&b.nodes()[ib..b.subtree_end(ib)]);
        } else {
            out.extend_from_slice(&a.nodes()[ia..a.subtree_end(ia)]);
        }
    }
    let mut nodes = Vec::with_capacity(a.size().max(b.size()));
    build(a, b, 0, 0, rng, &mut nodes);
    GpTree::from_prefix_unchecked(nodes)
}

/// Size-fair crossover: the donated subtree is at most `2s + 1` nodes for a
/// removed subtree of `s` nodes, and the bin of smaller/equal/larger donors is
/// drawn so that the expected change in size is zero.
fn size_fair<R: Rng + ?Sized>(a: &GpTree, b: &GpTree, rng: &mut R) -> GpTree {
    let pa = rng.random_range(0..a.size());
    let removed = a.subtree_end(pa) - pa;

    let mut smaller = Vec::new();
    let mut equal = Vec::new();
    let mut larger = Vec::new();
    for ib in 0..b.size() {
        let s = b.subtree_end(ib) - ib;
        if s < removed {
            smaller.push((ib, s));
        } else if s == removed {
            equal.push((ib, s));
        } else if s <= 2 * removed + 1 {
            larger.push((ib, s));
        }
    }

    let p_equal = if equal.is_empty() { 0.0 } else { 1.0 / removed as f64 };
    let mean_gap = |v: &[(usize, usize)]| v.iter().map(|&(_, s)| s.abs_diff(removed) as f64).sum::<f64>() / v.len() as f64;
    let bin: &[(usize, usize)] = match (smaller.is_empty(), larger.is_empty()) {
        (false, false) => {
            let (mu_small, mu_large) = (mean_gap(&smaller), mean_gap(&larger));
            // p_small * mu_small == p_large * mu_large keeps the mean change at zero
            let p_small = (1.0 - p_equal) * mu_large / (mu_small + mu_large);
            let r: f64 = rng.random();
            if r < p_equal {
                &equal
            } else if r < p_equal + p_small {
                &smaller
            } else {
                &larger
            }
        }
        _ if !equal.is_empty() => &equal,
        (false, true) => &smaller,
        (true, false) => &larger,
        // every subtree of `b` is bigger than 2s+1 nodes; only possible for s == 0, which cannot happen
        (true, true) => unreachable!("terminals of b always qualify"),
    };
    let &(ib, _) = bin.choose(rng).unwrap();
    a.replace_subtree(pa, &b.subtree(ib))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{parse_expression, random_tree};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LIMITS: Limits = Limits { max_depth: 5, terminals: 5 };

    fn t(s: &str) -> GpTree {
        parse_expression(s, 5).unwrap()
    }

    fn shape(tree: &GpTree) -> Vec<usize> {
        tree.nodes().iter().map(|n| n.arity()).collect()
    }

    fn random_parent(rng: &mut ChaCha8Rng) -> GpTree {
        let depth = rng.random_range(0..=5);
        let method = if rng.random_bool(0.5) { InitMethod::Grow } else { InitMethod::Full };
        random_tree(depth, method, 5, rng)
    }

    #[test]
    fn terminal_parents_give_a_parent() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, b) = (t("w1"), t("w3"));
        for kind in CrossoverKind::ALL {
            for _ in 0..20 {
                let c = crossover(kind, &a, &b, &LIMITS, &mut rng);
                assert!(c == a || c == b, "{kind:?} gave {c}");
            }
        }
    }

    #[test]
    fn one_point_preserves_common_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = t("((w0+w1)*sqrt(w2))");
        let b = t("((w3-w4)/w1^2)");
        for _ in 0..100 {
            let c = crossover(CrossoverKind::OnePoint, &a, &b, &LIMITS, &mut rng);
            assert_eq!(shape(&c), shape(&a));
        }
    }

    #[test]
    fn uniform_on_identical_shapes_mixes_labels_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = t("((w0+w1)*(w2-w3))");
        let b = t("((w4/w4)+(w4*w4))");
        let mut saw_mix = false;
        for _ in 0..100 {
            let c = crossover(CrossoverKind::Uniform, &a, &b, &LIMITS, &mut rng);
            assert_eq!(shape(&c), shape(&a));
            for (i, n) in c.nodes().iter().enumerate() {
                assert!(*n == a.nodes()[i] || *n == b.nodes()[i]);
            }
            saw_mix |= c != a && c != b;
        }
        assert!(saw_mix);
    }

    #[test]
    fn context_preserving_swaps_at_same_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // b's root is unary: shared coordinates are (), (0), (0,0) and (0,1)
        let a = t("((w0+w1)*w2)");
        let b = t("sqrt(w3-w4)");
        let allowed = ["sqrt(w3-w4)", "((w3-w4)*w2)", "((w3+w1)*w2)", "((w0+w4)*w2)"];
        let mut seen = std::collections::HashSet::new();
        for _ in 0..200 {
            let c = crossover(CrossoverKind::ContextPreserving, &a, &b, &LIMITS, &mut rng);
            let e = c.to_expression();
            assert!(allowed.contains(&e.as_str()), "unexpected child {e}");
            seen.insert(e);
        }
        assert_eq!(seen.len(), allowed.len());
    }

    #[test]
    fn size_fair_bounds_donor_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = t("((w0+w1)*(w2-w3))");
        let b = t("(((w0+w1)*(w2-w3))+((w4*w4)-sqrt(w0)))");
        for _ in 0..500 {
            let c = crossover(CrossoverKind::SizeFair, &a, &b, &LIMITS, &mut rng);
            // the largest removable subtree has 7 nodes, so growth is at most 8
            assert!(c.size() <= a.size() + 8);
        }
    }

    #[test]
    fn fallback_returns_fitter_parent() {
        // any non-root point of `a` sits at depth >= 1 and every donor from `b` is depth 5,
        // so subtree crossover only succeeds by replacing the root
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = t("(w0+w1)");
        let b = t("sqrt(sqrt(sqrt(sqrt(sqrt(w2)))))");
        let tight = Limits { max_depth: 1, terminals: 5 };
        for _ in 0..50 {
            let c = crossover(CrossoverKind::Subtree, &a, &b, &tight, &mut rng);
            assert!(c.depth() <= 1);
        }
    }

    #[test]
    fn children_are_well_formed_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let a = random_parent(&mut rng);
            let b = random_parent(&mut rng);
            let (a0, b0) = (a.clone(), b.clone());
            let kind = CrossoverKind::random(&mut rng);
            let c = crossover(kind, &a, &b, &LIMITS, &mut rng);
            assert!(c.depth() <= 5, "{kind:?}: {c}");
            assert!(GpTree::from_prefix(c.nodes().to_vec()).is_ok());
            assert_eq!((a, b), (a0, b0));
        }
    }

    #[test]
    fn mutation_respects_depth_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let deep = t("sqrt(sqrt(sqrt(sqrt(sqrt(w2)))))");
        // mutating the leaf at depth 5 must produce a terminal there
        for _ in 0..200 {
            let m = mutate(&deep, &LIMITS, &mut rng);
            assert!(m.depth() <= 5);
            let leaf_depths: Vec<usize> = m
                .node_depths()
                .into_iter()
                .zip(m.nodes())
                .filter(|(_, n)| n.is_terminal())
                .map(|(d, _)| d)
                .collect();
            assert!(leaf_depths.iter().all(|&d| d <= 5));
        }
        for _ in 0..50 {
            let m = mutate(&t("w0"), &LIMITS, &mut rng);
            assert!(m.depth() <= 5);
        }
        for _ in 0..1000 {
            let p = random_parent(&mut rng);
            let m = mutate(&p, &LIMITS, &mut rng);
            assert!(m.depth() <= 5);
            assert!(m.max_slot().unwrap() < 5);
        }
    }

    #[test]
    fn same_rng_state_same_child() {
        let a = t("((w0+w1)*sqrt(w2))");
        let b = t("(((w3-w4)/w1^2)+w0)");
        for kind in CrossoverKind::ALL {
            let c1 = crossover(kind, &a, &b, &LIMITS, &mut ChaCha8Rng::seed_from_u64(9));
            let c2 = crossover(kind, &a, &b, &LIMITS, &mut ChaCha8Rng::seed_from_u64(9));
            assert_eq!(c1, c2);
        }
        let m1 = mutate(&a, &LIMITS, &mut ChaCha8Rng::seed_from_u64(10));
        let m2 = mutate(&a, &LIMITS, &mut ChaCha8Rng::seed_from_u64(10));
        assert_eq!(m1, m2);
    }
}
