//! Boykov-Kolmogorov augmenting-path max-flow.
//!
//! Two search trees grow from the terminals; when they touch, the path is
//! augmented and the saturated arcs orphan their subtrees, which are then
//! re-adopted or freed. Trees are reused across augmentations, which is what
//! makes the method fast on grid graphs with short paths.

use std::collections::VecDeque;

const NONE: usize = usize::MAX;
const TERMINAL: usize = usize::MAX - 1;
const ORPHAN: usize = usize::MAX - 2;

#[derive(Clone, Debug)]
struct Node {
    first_arc: usize,
    /// Arc to the parent (pointing away from this node), or a marker.
    parent: usize,
    /// Residual terminal capacity: positive toward the source, negative toward the sink.
    tr_cap: f64,
    in_sink_tree: bool,
    active: bool,
    timestamp: u64,
    dist: u64,
}

#[derive(Clone, Debug)]
struct Arc {
    head: usize,
    next: usize,
    r_cap: f64,
}

#[derive(Clone, Debug, Default)]
pub struct MaxFlowGraph {
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
    flow: f64,
    active: VecDeque<usize>,
    orphans: VecDeque<usize>,
    time: u64,
    solved: bool,
}

#[inline]
fn sister(arc: usize) -> usize {
    arc ^ 1
}

impl MaxFlowGraph {
    pub fn new(nodes: usize, edges_hint: usize) -> Self {
        Self {
            nodes: vec![
                Node {
                    first_arc: NONE,
                    parent: NONE,
                    tr_cap: 0.0,
                    in_sink_tree: false,
                    active: false,
                    timestamp: 0,
                    dist: 0,
                };
                nodes
            ],
            arcs: Vec::with_capacity(2 * edges_hint),
            ..Default::default()
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Adds capacity from the source to `node` and from `node` to the sink.
    ///
    /// Capacities may be any finite reals; only their difference is stored and
    /// the common part is counted as flow.
    pub fn add_terminal_weights(&mut self, node: usize, source_cap: f64, sink_cap: f64) {
        let mut cap_source = source_cap;
        let mut cap_sink = sink_cap;
        let delta = self.nodes[node].tr_cap;
        if delta > 0.0 {
            cap_source += delta;
        } else {
            cap_sink -= delta;
        }
        self.flow += cap_source.min(cap_sink);
        self.nodes[node].tr_cap = cap_source - cap_sink;
    }

    /// Adds an arc `i -> j` with capacity `cap` and `j -> i` with `rev_cap`.
    pub fn add_edge(&mut self, i: usize, j: usize, cap: f64, rev_cap: f64) {
        assert!(i != j, "self loops are not allowed");
        assert!(cap >= 0.0 && rev_cap >= 0.0, "edge capacities must be non-negative");
        let a = self.arcs.len();
        self.arcs.push(Arc {
            head: j,
            next: self.nodes[i].first_arc,
            r_cap: cap,
        });
        self.nodes[i].first_arc = a;
        self.arcs.push(Arc {
            head: i,
            next: self.nodes[j].first_arc,
            r_cap: rev_cap,
        });
        self.nodes[j].first_arc = a + 1;
    }

    fn set_active(&mut self, i: usize) {
        if !self.nodes[i].active {
            self.nodes[i].active = true;
            self.active.push_back(i);
        }
    }

    fn next_active(&mut self) -> Option<usize> {
        while let Some(i) = self.active.pop_front() {
            self.nodes[i].active = false;
            if self.nodes[i].parent != NONE {
                return Some(i);
            }
        }
        None
    }

    fn set_orphan_front(&mut self, i: usize) {
        self.nodes[i].parent = ORPHAN;
        self.orphans.push_front(i);
    }

    fn set_orphan_rear(&mut self, i: usize) {
        self.nodes[i].parent = ORPHAN;
        self.orphans.push_back(i);
    }

    fn init(&mut self) {
        self.active.clear();
        self.orphans.clear();
        self.time = 0;
        for i in 0..self.nodes.len() {
            let node = &mut self.nodes[i];
            node.active = false;
            node.timestamp = 0;
            if node.tr_cap > 0.0 {
                node.in_sink_tree = false;
                node.parent = TERMINAL;
                node.dist = 1;
            } else if node.tr_cap < 0.0 {
                node.in_sink_tree = true;
                node.parent = TERMINAL;
                node.dist = 1;
            } else {
                node.parent = NONE;
                continue;
            }
            self.set_active(i);
        }
    }

    /// Runs max-flow and returns the total flow, including terminal flow
    /// absorbed by [`MaxFlowGraph::add_terminal_weights`].
    pub fn solve(&mut self) -> f64 {
        self.init();
        let mut current: Option<usize> = None;
        loop {
            let i = match current.take() {
                Some(i) => {
                    self.nodes[i].active = false;
                    if self.nodes[i].parent == NONE {
                        match self.next_active() {
                            Some(n) => n,
                            None => break,
                        }
                    } else {
                        i
                    }
                }
                None => match self.next_active() {
                    Some(n) => n,
                    None => break,
                },
            };

            let bridge = self.grow(i);
            self.time += 1;

            if let Some(arc) = bridge {
                // Keep `i` as the current node; it may still have more paths.
                self.nodes[i].active = true;
                current = Some(i);
                self.augment(arc);
                while let Some(o) = self.orphans.pop_front() {
                    if self.nodes[o].in_sink_tree {
                        self.process_sink_orphan(o);
                    } else {
                        self.process_source_orphan(o);
                    }
                }
            }
        }
        self.solved = true;
        self.flow
    }

    /// Expands the tree of `i` by one layer; returns the source-to-sink arc
    /// when the trees meet.
    fn grow(&mut self, i: usize) -> Option<usize> {
        let in_sink = self.nodes[i].in_sink_tree;
        let mut a = self.nodes[i].first_arc;
        while a != NONE {
            let next = self.arcs[a].next;
            // Residual in the direction of tree growth.
            let cap = if in_sink {
                self.arcs[sister(a)].r_cap
            } else {
                self.arcs[a].r_cap
            };
            if cap > 0.0 {
                let j = self.arcs[a].head;
                if self.nodes[j].parent == NONE {
                    self.nodes[j].in_sink_tree = in_sink;
                    self.nodes[j].parent = sister(a);
                    self.nodes[j].timestamp = self.nodes[i].timestamp;
                    self.nodes[j].dist = self.nodes[i].dist + 1;
                    self.set_active(j);
                } else if self.nodes[j].in_sink_tree != in_sink {
                    return Some(if in_sink { sister(a) } else { a });
                } else if self.nodes[j].timestamp <= self.nodes[i].timestamp && self.nodes[j].dist > self.nodes[i].dist
                {
                    self.nodes[j].parent = sister(a);
                    self.nodes[j].timestamp = self.nodes[i].timestamp;
                    self.nodes[j].dist = self.nodes[i].dist + 1;
                }
            }
            a = next;
        }
        None
    }

    /// Pushes the bottleneck along source-root -> `bridge` -> sink-root.
    fn augment(&mut self, bridge: usize) {
        let mut bottleneck = self.arcs[bridge].r_cap;

        let mut i = self.arcs[sister(bridge)].head;
        loop {
            let a = self.nodes[i].parent;
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.arcs[sister(a)].r_cap);
            i = self.arcs[a].head;
        }
        bottleneck = bottleneck.min(self.nodes[i].tr_cap);

        let mut i = self.arcs[bridge].head;
        loop {
            let a = self.nodes[i].parent;
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.arcs[a].r_cap);
            i = self.arcs[a].head;
        }
        bottleneck = bottleneck.min(-self.nodes[i].tr_cap);

        self.arcs[sister(bridge)].r_cap += bottleneck;
        self.arcs[bridge].r_cap -= bottleneck;

        let mut i = self.arcs[sister(bridge)].head;
        loop {
            let a = self.nodes[i].parent;
            if a == TERMINAL {
                break;
            }
            self.arcs[a].r_cap += bottleneck;
            self.arcs[sister(a)].r_cap -= bottleneck;
            if self.arcs[sister(a)].r_cap <= 0.0 {
                self.arcs[sister(a)].r_cap = 0.0;
                self.set_orphan_front(i);
            }
            i = self.arcs[a].head;
        }
        self.nodes[i].tr_cap -= bottleneck;
        if self.nodes[i].tr_cap <= 0.0 {
            self.nodes[i].tr_cap = 0.0;
            self.set_orphan_front(i);
        }

        let mut i = self.arcs[bridge].head;
        loop {
            let a = self.nodes[i].parent;
            if a == TERMINAL {
                break;
            }
            self.arcs[sister(a)].r_cap += bottleneck;
            self.arcs[a].r_cap -= bottleneck;
            if self.arcs[a].r_cap <= 0.0 {
                self.arcs[a].r_cap = 0.0;
                self.set_orphan_front(i);
            }
            i = self.arcs[a].head;
        }
        self.nodes[i].tr_cap += bottleneck;
        if self.nodes[i].tr_cap >= 0.0 {
            self.nodes[i].tr_cap = 0.0;
            self.set_orphan_front(i);
        }

        self.flow += bottleneck;
    }

    /// Distance from `j` to its tree root, or `None` when the chain ends in
    /// an orphan. Marks visited nodes with the current time.
    fn origin_distance(&mut self, start: usize) -> Option<u64> {
        let mut j = start;
        let mut d: u64 = 0;
        loop {
            if self.nodes[j].timestamp == self.time {
                d += self.nodes[j].dist;
                break;
            }
            let a = self.nodes[j].parent;
            d += 1;
            if a == TERMINAL {
                self.nodes[j].timestamp = self.time;
                self.nodes[j].dist = 1;
                break;
            }
            if a == ORPHAN || a == NONE {
                return None;
            }
            j = self.arcs[a].head;
        }
        // Cache distances along the chain.
        let mut j = start;
        let mut dd = d;
        while self.nodes[j].timestamp != self.time {
            self.nodes[j].timestamp = self.time;
            self.nodes[j].dist = dd;
            dd -= 1;
            j = self.arcs[self.nodes[j].parent].head;
        }
        Some(d)
    }

    fn process_orphan(&mut self, i: usize, in_sink: bool) {
        let mut best_arc = NONE;
        let mut best_dist = u64::MAX;

        let mut a0 = self.nodes[i].first_arc;
        while a0 != NONE {
            // Residual capacity from the candidate parent toward `i`.
            let cap = if in_sink {
                self.arcs[a0].r_cap
            } else {
                self.arcs[sister(a0)].r_cap
            };
            let j = self.arcs[a0].head;
            if cap > 0.0 && self.nodes[j].in_sink_tree == in_sink && self.nodes[j].parent != NONE {
                if let Some(d) = self.origin_distance(j) {
                    if d < best_dist {
                        best_arc = a0;
                        best_dist = d;
                    }
                }
            }
            a0 = self.arcs[a0].next;
        }

        if best_arc != NONE {
            self.nodes[i].parent = best_arc;
            self.nodes[i].timestamp = self.time;
            self.nodes[i].dist = best_dist + 1;
            return;
        }

        self.nodes[i].parent = NONE;
        let mut a0 = self.nodes[i].first_arc;
        while a0 != NONE {
            let j = self.arcs[a0].head;
            let pa = self.nodes[j].parent;
            if self.nodes[j].in_sink_tree == in_sink && pa != NONE {
                let cap = if in_sink {
                    self.arcs[a0].r_cap
                } else {
                    self.arcs[sister(a0)].r_cap
                };
                if cap > 0.0 {
                    self.set_active(j);
                }
                if pa != TERMINAL && pa != ORPHAN && self.arcs[pa].head == i {
                    self.set_orphan_rear(j);
                }
            }
            a0 = self.arcs[a0].next;
        }
    }

    fn process_source_orphan(&mut self, i: usize) {
        self.process_orphan(i, false);
    }

    fn process_sink_orphan(&mut self, i: usize) {
        self.process_orphan(i, true);
    }

    /// After [`MaxFlowGraph::solve`]: whether `node` is on the source side of
    /// the minimum cut (reachable from the source in the residual graph).
    pub fn is_source_side(&self, node: usize) -> bool {
        assert!(self.solved, "solve() must run first");
        let n = &self.nodes[node];
        n.parent != NONE && !n.in_sink_tree
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Terminal and pairwise capacities of a random instance.
    struct Instance {
        n: usize,
        source: Vec<f64>,
        sink: Vec<f64>,
        edges: Vec<(usize, usize, f64, f64)>,
    }

    fn random_instance(n: usize, rng: &mut ChaCha8Rng) -> Instance {
        let source = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let sink = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.5) {
                    edges.push((i, j, rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)));
                }
            }
        }
        Instance { n, source, sink, edges }
    }

    fn cut_value(inst: &Instance, in_source: &[bool]) -> f64 {
        let mut v = 0.0;
        for i in 0..inst.n {
            v += if in_source[i] { inst.sink[i] } else { inst.source[i] };
        }
        for &(i, j, c, r) in &inst.edges {
            if in_source[i] && !in_source[j] {
                v += c;
            }
            if in_source[j] && !in_source[i] {
                v += r;
            }
        }
        v
    }

    #[test]
    fn matches_brute_force_min_cut() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..300 {
            let n = 1 + trial % 10;
            let inst = random_instance(n, &mut rng);
            let mut g = MaxFlowGraph::new(n, inst.edges.len());
            for i in 0..n {
                g.add_terminal_weights(i, inst.source[i], inst.sink[i]);
            }
            for &(i, j, c, r) in &inst.edges {
                g.add_edge(i, j, c, r);
            }
            let flow = g.solve();
            let labels: Vec<bool> = (0..n).map(|i| g.is_source_side(i)).collect();

            let best = (0u32..1 << n)
                .map(|bits| {
                    let side: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
                    cut_value(&inst, &side)
                })
                .fold(f64::INFINITY, f64::min);
            assert!((flow - best).abs() < 1e-9, "trial {trial}: flow {flow} vs {best}");
            assert!((cut_value(&inst, &labels) - best).abs() < 1e-9);
        }
    }

    #[test]
    fn chain() {
        let mut g = MaxFlowGraph::new(3, 2);
        g.add_terminal_weights(0, 10.0, 0.0);
        g.add_terminal_weights(2, 0.0, 10.0);
        g.add_edge(0, 1, 3.0, 0.0);
        g.add_edge(1, 2, 2.0, 0.0);
        assert_eq!(g.solve(), 2.0);
        assert!(g.is_source_side(0) && g.is_source_side(1) && !g.is_source_side(2));
    }

    #[test]
    fn terminal_weights_accumulate() {
        let mut g = MaxFlowGraph::new(1, 0);
        g.add_terminal_weights(0, 3.0, 1.0);
        g.add_terminal_weights(0, 0.0, 4.0);
        // Source 3, sink 5: flow 3, node goes to the sink.
        assert_eq!(g.solve(), 3.0);
        assert!(!g.is_source_side(0));
    }
}
