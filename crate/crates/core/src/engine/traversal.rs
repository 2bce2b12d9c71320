//! The per-tree depth-first traversal.
//!
//! Every quantity that depends on the quadrature node is stored as a
//! contiguous lane of `n` doubles, so each edge update is a handful of
//! elementwise passes over short slices.

use smallvec::SmallVec;

use crate::model::{NodeKind, Tree};

use super::DIVISION_GUARD;

pub(crate) type Key = SmallVec<[usize; 4]>;

/// Receives interaction increments from the traversal.
pub(crate) trait Sink {
    fn add_single(&mut self, feature: usize, value: f64);
    /// `key` is sorted.
    fn add(&mut self, key: &[usize], value: f64);
}

/// Live traversal state, reused across trees and samples by one worker.
pub(crate) struct Traversal<'r> {
    order: usize,
    nodes: &'r [f64],
    weights: &'r [f64],
    /// Live multiplier per feature; `None` while the feature is not on the
    /// active path.
    live: Vec<Option<f64>>,
    /// Features on the active path in first-seen order.
    active: Vec<usize>,
    /// Path polynomial values, one lane block per depth.
    trace: Vec<f64>,
    /// Subtree sums returned upward, one lane block per depth.
    subtree: Vec<f64>,
    base: Vec<f64>,
    gammas: Vec<f64>,
    prefix: Vec<f64>,
    candidates: Vec<usize>,
    picks: Vec<usize>,
}

impl<'r> Traversal<'r> {
    pub(crate) fn new(num_features: usize, order: usize, nodes: &'r [f64], weights: &'r [f64]) -> Self {
        Traversal {
            order,
            nodes,
            weights,
            live: vec![None; num_features],
            active: Vec::new(),
            trace: Vec::new(),
            subtree: Vec::new(),
            base: vec![0.0; nodes.len()],
            gammas: Vec::new(),
            prefix: Vec::new(),
            candidates: Vec::new(),
            picks: Vec::new(),
        }
    }

    /// Runs one tree for one sample, sending increments to `sink`.
    pub(crate) fn run(&mut self, tree: &Tree, sample: &[f64], max_depth: usize, sink: &mut impl Sink) {
        let n = self.nodes.len();
        let blocks = (max_depth + 2) * n;
        if self.trace.len() < blocks {
            self.trace.resize(blocks, 0.0);
            self.subtree.resize(blocks, 0.0);
        }
        self.trace[..n].fill(1.0);
        self.visit(tree, tree.root(), 0, 1.0, sample, sink);
        debug_assert!(self.active.is_empty(), "active set not restored");
        debug_assert!(self.live.iter().all(Option::is_none), "live multipliers not restored");
    }

    fn visit(&mut self, tree: &Tree, idx: usize, depth: usize, w_prod: f64, sample: &[f64], sink: &mut impl Sink) {
        let n = self.nodes.len();
        let here = depth * n..(depth + 1) * n;
        let below = (depth + 1) * n..(depth + 2) * n;
        let split = match &tree.node(idx).kind {
            NodeKind::Leaf { value } => {
                let scale = value * w_prod;
                for m in 0..n {
                    self.subtree[here.start + m] = self.trace[here.start + m] * scale;
                }
                return;
            }
            NodeKind::Internal(split) => split,
        };
        self.subtree[here.clone()].fill(0.0);
        let f = split.feature;
        let taken = split.child(split.route(sample[f]));

        for child in [split.left, split.right] {
            let w_e = tree.edge_weight(idx, child);
            let satisfied = child == taken;
            let previous = self.live[f];
            let (p_e, p_up) = match previous {
                None => (if satisfied { 1.0 / w_e } else { 0.0 }, 1.0),
                Some(0.0) => (0.0, 0.0),
                Some(p) => (if satisfied { p / w_e } else { 0.0 }, p),
            };
            let alpha = p_e - 1.0;

            {
                let (upper, lower) = self.trace.split_at_mut(below.start);
                let c = &upper[here.clone()];
                let c_next = &mut lower[..n];
                for m in 0..n {
                    c_next[m] = c[m] * (1.0 + alpha * self.nodes[m]);
                }
                if let Some(p) = previous {
                    if (p - 1.0).abs() > DIVISION_GUARD {
                        for m in 0..n {
                            c_next[m] /= 1.0 + (p - 1.0) * self.nodes[m];
                        }
                    }
                }
            }

            self.live[f] = Some(p_e);
            if previous.is_none() {
                self.active.push(f);
            }
            self.visit(tree, child, depth + 1, w_prod * w_e, sample, sink);

            let up = p_up - 1.0;
            for m in 0..n {
                let t = self.nodes[m];
                let delta = alpha / (1.0 + alpha * t) - up / (1.0 + up * t);
                self.base[m] = self.weights[m] * self.subtree[below.start + m] * delta;
            }
            if self.order == 1 {
                sink.add_single(f, self.base.iter().sum());
            } else {
                self.accumulate_subsets(f, sink);
            }

            if previous.is_none() {
                let popped = self.active.pop();
                debug_assert_eq!(popped, Some(f));
            }
            self.live[f] = previous;

            let (upper, lower) = self.subtree.split_at_mut(below.start);
            for (acc, v) in upper[here.clone()].iter_mut().zip(&lower[..n]) {
                *acc += v;
            }
        }
    }

    /// Adds `Σ_m base[m] Π_{j∈P} γ_j[m]` to `{f} ∪ P` for every
    /// `(order - 1)`-subset `P` of the active features other than `f`, in
    /// lexicographic order over first-seen order.
    fn accumulate_subsets(&mut self, f: usize, sink: &mut impl Sink) {
        let n = self.nodes.len();
        let k = self.order - 1;
        self.candidates.clear();
        self.candidates.extend(self.active.iter().copied().filter(|&j| j != f));
        let r = self.candidates.len();
        if k > r {
            return;
        }

        self.gammas.resize(r * n, 0.0);
        for (ci, &j) in self.candidates.iter().enumerate() {
            let a = self.live[j].expect("active feature has a live multiplier") - 1.0;
            for m in 0..n {
                self.gammas[ci * n + m] = a / (1.0 + a * self.nodes[m]);
            }
        }

        // prefix[i] = base ⊙ Π_{l<i} γ_{picks[l]}
        self.prefix.resize((k + 1) * n, 0.0);
        self.prefix[..n].copy_from_slice(&self.base);
        self.picks.clear();
        self.picks.extend(0..k);
        self.refresh_prefix(0);

        let mut key: Key = SmallVec::with_capacity(k + 1);
        loop {
            let value: f64 = self.prefix[k * n..(k + 1) * n].iter().sum();
            key.clear();
            key.push(f);
            key.extend(self.picks.iter().map(|&ci| self.candidates[ci]));
            key.sort_unstable();
            sink.add(&key, value);

            // Advance to the next combination.
            let mut i = k;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                if self.picks[i] < r - k + i {
                    break;
                }
                if i == 0 {
                    return;
                }
            }
            self.picks[i] += 1;
            for l in i + 1..k {
                self.picks[l] = self.picks[l - 1] + 1;
            }
            self.refresh_prefix(i);
        }
    }

    fn refresh_prefix(&mut self, from: usize) {
        let n = self.nodes.len();
        let k = self.picks.len();
        for level in from..k {
            let g = self.picks[level] * n;
            let (done, rest) = self.prefix.split_at_mut((level + 1) * n);
            let prev = &done[level * n..];
            for m in 0..n {
                rest[m] = prev[m] * self.gammas[g + m];
            }
        }
    }
}
