use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Min-cost flow by successive shortest paths with Johnson potentials.
///
/// Costs must be nonnegative. Ties in Dijkstra are broken by node index, so
/// the returned flow is deterministic.
#[derive(Clone, Debug)]
pub struct MinCostFlow {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i64>,
    cost: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq)]
struct State {
    dist: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl MinCostFlow {
    pub fn new(n: usize) -> Self {
        MinCostFlow { adj: vec![Vec::new(); n], to: Vec::new(), cap: Vec::new(), cost: Vec::new() }
    }

    /// Adds an arc and returns its id; the residual twin is `id ^ 1`.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: i64, cost: f64) -> usize {
        debug_assert!(cost >= 0.0);
        let id = self.to.len();
        self.adj[u].push(id);
        self.to.push(v);
        self.cap.push(cap);
        self.cost.push(cost);
        self.adj[v].push(id + 1);
        self.to.push(u);
        self.cap.push(0);
        self.cost.push(-cost);
        id
    }

    /// Flow currently routed through arc `id`.
    pub fn flow(&self, id: usize) -> i64 {
        self.cap[id ^ 1]
    }

    /// Pushes up to `limit` units from `s` to `t`; returns `(flow, cost)`.
    pub fn run(&mut self, s: usize, t: usize, limit: i64) -> (i64, f64) {
        let n = self.adj.len();
        let mut potential = vec![0.0; n];
        let mut flow = 0;
        let mut total = 0.0;
        while flow < limit {
            let mut dist = vec![f64::INFINITY; n];
            let mut prev = vec![usize::MAX; n];
            let mut heap = BinaryHeap::new();
            dist[s] = 0.0;
            heap.push(State { dist: 0.0, node: s });
            while let Some(State { dist: d, node: u }) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &e in &self.adj[u] {
                    if self.cap[e] <= 0 {
                        continue;
                    }
                    let v = self.to[e];
                    let reduced = (self.cost[e] + potential[u] - potential[v]).max(0.0);
                    let nd = d + reduced;
                    if nd < dist[v] {
                        dist[v] = nd;
                        prev[v] = e;
                        heap.push(State { dist: nd, node: v });
                    }
                }
            }
            if !dist[t].is_finite() {
                break;
            }
            for v in 0..n {
                if dist[v].is_finite() {
                    potential[v] += dist[v];
                }
            }
            let mut push = limit - flow;
            let mut v = t;
            while v != s {
                let e = prev[v];
                push = push.min(self.cap[e]);
                v = self.to[e ^ 1];
            }
            let mut v = t;
            while v != s {
                let e = prev[v];
                self.cap[e] -= push;
                self.cap[e ^ 1] += push;
                total += push as f64 * self.cost[e];
                v = self.to[e ^ 1];
            }
            flow += push;
        }
        (flow, total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force assignment over all permutations.
    fn brute(costs: &[Vec<f64>]) -> f64 {
        fn rec(costs: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == costs.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for c in 0..costs.len() {
                if !used[c] {
                    used[c] = true;
                    best = best.min(costs[row][c] + rec(costs, row + 1, used));
                    used[c] = false;
                }
            }
            best
        }
        rec(costs, 0, &mut vec![false; costs.len()])
    }

    #[test]
    fn assignment_matches_brute_force() {
        let costs = vec![
            vec![4.0, 1.0, 3.0, 2.5],
            vec![2.0, 0.0, 5.0, 1.0],
            vec![3.0, 2.0, 2.0, 0.5],
            vec![1.5, 2.5, 0.25, 3.0],
        ];
        let k = costs.len();
        let mut g = MinCostFlow::new(2 * k + 2);
        let (s, t) = (2 * k, 2 * k + 1);
        for i in 0..k {
            g.add_edge(s, i, 1, 0.0);
            g.add_edge(k + i, t, 1, 0.0);
            for j in 0..k {
                g.add_edge(i, k + j, 1, costs[i][j]);
            }
        }
        let (f, c) = g.run(s, t, k as i64);
        assert_eq!(f, k as i64);
        assert!((c - brute(&costs)).abs() < 1e-12);
    }
}
