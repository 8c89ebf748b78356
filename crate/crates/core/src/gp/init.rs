use rand::Rng;

use super::{BinaryOp, GpTree, Node, UnaryOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMethod {
    /// Any primitive may be chosen above the depth bound; terminals are forced at it.
    Grow,
    /// Functions everywhere above the depth bound, so every leaf sits exactly at it.
    Full,
}

const FUNCTIONS: usize = BinaryOp::ALL.len() + UnaryOp::ALL.len();

/// Generates a random tree over `k` terminals with depth at most `max_depth`.
pub fn random_tree<R: Rng + ?Sized>(max_depth: usize, method: InitMethod, k: usize, rng: &mut R) -> GpTree {
    assert!(k > 0 && k <= u8::MAX as usize + 1, "terminal count must be in 1..=256");
    let mut nodes = Vec::new();
    grow_into(&mut nodes, 0, max_depth, method, k, rng);
    GpTree::from_prefix_unchecked(nodes)
}

pub(crate) fn grow_into<R: Rng + ?Sized>(
    nodes: &mut Vec<Node>,
    depth: usize,
    max_depth: usize,
    method: InitMethod,
    k: usize,
    rng: &mut R,
) {
    let pick_function = depth < max_depth
        && match method {
            InitMethod::Full => true,
            InitMethod::Grow => rng.random_range(0..k + FUNCTIONS) >= k,
        };
    if !pick_function {
        nodes.push(Node::Terminal(rng.random_range(0..k) as u8));
        return;
    }
    let f = rng.random_range(0..FUNCTIONS);
    if f < BinaryOp::ALL.len() {
        nodes.push(Node::Binary(BinaryOp::ALL[f]));
        grow_into(nodes, depth + 1, max_depth, method, k, rng);
        grow_into(nodes, depth + 1, max_depth, method, k, rng);
    } else {
        nodes.push(Node::Unary(UnaryOp::ALL[f - BinaryOp::ALL.len()]));
        grow_into(nodes, depth + 1, max_depth, method, k, rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn depth_zero_is_a_terminal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for method in [InitMethod::Grow, InitMethod::Full] {
            for _ in 0..50 {
                let t = random_tree(0, method, 5, &mut rng);
                assert_eq!(t.size(), 1);
                assert!(t.root().is_terminal());
            }
        }
    }

    #[test]
    fn full_trees_have_all_leaves_at_max_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let t = random_tree(2, InitMethod::Full, 5, &mut rng);
            for (n, d) in t.nodes().iter().zip(t.node_depths()) {
                assert_eq!(n.is_terminal(), d == 2);
            }
        }
    }

    #[test]
    fn grow_respects_bound_with_spread_of_depths() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut histogram = [0usize; 6];
        for _ in 0..1000 {
            let t = random_tree(5, InitMethod::Grow, 5, &mut rng);
            assert!(t.depth() <= 5);
            assert!(t.max_slot().unwrap() < 5);
            histogram[t.depth()] += 1;
        }
        // terminal roots occur with probability 5/11; deep trees must also appear
        let nonzero = histogram.iter().filter(|&&c| c > 0).count();
        assert!(nonzero >= 4, "{histogram:?}");
        assert!(histogram[0] > 300 && histogram[0] < 600, "{histogram:?}");
        assert!(histogram[5] > 0, "{histogram:?}");
    }
}
