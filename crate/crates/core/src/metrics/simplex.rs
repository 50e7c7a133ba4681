//! Primal network simplex for the balanced transportation problem on the
//! complete bipartite graph, with block-search pivoting and a spanning tree
//! stored as parent/thread/successor arrays. Arc costs are produced on demand,
//! so memory is linear in the number of nodes plus one state byte per arc.

const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;

/// Optimal plan and certificate.
#[derive(Clone, Debug)]
pub struct TransportSolution {
    pub cost: f64,
    /// `sum_j b_j v_j - sum_i a_i u_i` from the final potentials.
    pub dual_objective: f64,
    /// Largest violation of `c_ij + u_i - v_j >= 0` over all arcs.
    pub max_dual_violation: f64,
    /// `(source, sink, amount)` for every positive flow.
    pub flows: Vec<(usize, usize, f64)>,
    pub pivots: usize,
}

struct Simplex<'a, C: Fn(usize, usize) -> f64> {
    cost_fn: &'a C,
    n_src: usize,
    n_snk: usize,
    node_num: usize,
    arc_num: usize,
    root: usize,
    art_cost: f64,
    art_src_up: Vec<bool>,
    state: Vec<i8>,
    supply: Vec<f64>,
    pi: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pflow: Vec<f64>,
    pred_dir: Vec<i8>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    dirty_revs: Vec<usize>,
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
    next_arc: usize,
    block_size: usize,
}

const NONE: usize = usize::MAX;

impl<C: Fn(usize, usize) -> f64> Simplex<'_, C> {
    #[inline]
    fn source(&self, e: usize) -> usize {
        if e < self.arc_num {
            e / self.n_snk
        } else {
            let u = e - self.arc_num;
            if self.art_src_up[u] {
                u
            } else {
                self.root
            }
        }
    }

    #[inline]
    fn target(&self, e: usize) -> usize {
        if e < self.arc_num {
            self.n_src + e % self.n_snk
        } else {
            let u = e - self.arc_num;
            if self.art_src_up[u] {
                self.root
            } else {
                u
            }
        }
    }

    #[inline]
    fn cost(&self, e: usize) -> f64 {
        if e < self.arc_num {
            (self.cost_fn)(e / self.n_snk, e % self.n_snk)
        } else if self.art_src_up[e - self.arc_num] {
            0.0
        } else {
            self.art_cost
        }
    }

    fn init(&mut self) {
        let root = self.root;
        self.parent[root] = NONE;
        self.pred[root] = NONE;
        self.thread[root] = 0;
        self.rev_thread[0] = root;
        self.succ_num[root] = self.node_num + 1;
        self.last_succ[root] = root - 1;
        self.pi[root] = 0.0;
        for u in 0..self.node_num {
            let e = self.arc_num + u;
            self.parent[u] = root;
            self.pred[u] = e;
            self.thread[u] = u + 1;
            self.rev_thread[u + 1] = u;
            self.succ_num[u] = 1;
            self.last_succ[u] = u;
            self.state[e] = STATE_TREE;
            if self.supply[u] >= 0.0 {
                self.art_src_up[u] = true;
                self.pred_dir[u] = DIR_UP;
                self.pi[u] = 0.0;
                self.pflow[u] = self.supply[u];
            } else {
                self.art_src_up[u] = false;
                self.pred_dir[u] = DIR_DOWN;
                self.pi[u] = self.art_cost;
                self.pflow[u] = -self.supply[u];
            }
        }
    }

    #[inline]
    fn reduced(&self, e: usize) -> f64 {
        self.state[e] as f64 * (self.cost(e) + self.pi[self.source(e)] - self.pi[self.target(e)])
    }

    fn find_entering_arc(&mut self, eps: f64) -> bool {
        let mut min = -eps;
        let mut cnt = self.block_size;
        let mut found = false;
        let search = self.arc_num;
        let mut e = self.next_arc;
        for _ in 0..search {
            if self.state[e] != STATE_TREE {
                let c = self.reduced(e);
                if c < min {
                    min = c;
                    self.in_arc = e;
                    found = true;
                }
            }
            e += 1;
            if e == search {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if found {
                    self.next_arc = e;
                    return true;
                }
                cnt = self.block_size;
            }
        }
        if found {
            self.next_arc = e;
        }
        found
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// All arcs are uncapacitated, so a leaving arc always exists.
    fn find_leaving_arc(&mut self) {
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        let mut delta = f64::INFINITY;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == DIR_UP && self.pflow[u] < delta {
                delta = self.pflow[u];
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            if self.pred_dir[u] == DIR_DOWN && self.pflow[u] <= delta {
                delta = self.pflow[u];
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        debug_assert!(result != 0);
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta;
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        if val > 0.0 {
            let mut u = self.source(self.in_arc);
            while u != self.join {
                self.pflow[u] -= self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                self.pflow[u] += self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = STATE_TREE;
        let out = self.pred[self.u_out];
        self.state[out] = STATE_LOWER;
    }

    fn update_tree_structure(&mut self) {
        let (u_in, v_in, u_out, join, in_arc) = (self.u_in, self.v_in, self.u_out, self.join, self.in_arc);
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];
        let in_dir = if u_in == self.source(in_arc) { DIR_UP } else { DIR_DOWN };

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pflow[u_in] = self.delta;
            self.pred_dir[u_in] = in_dir;
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);
                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;
                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;
                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;
            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }
            for i in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[i];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }
            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pflow[u] = self.pflow[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.pflow[u_in] = self.delta;
            self.pred_dir[u_in] = in_dir;
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }
        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }
        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let sigma = self.pi[self.v_in] - self.pi[self.u_in] - self.pred_dir[self.u_in] as f64 * self.cost(self.in_arc);
        let end = self.thread[self.last_succ[self.u_in]];
        let mut u = self.u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    /// Recomputes all potentials along the thread to shed accumulated rounding.
    fn refresh_potentials(&mut self) {
        self.pi[self.root] = 0.0;
        let mut u = self.thread[self.root];
        while u != self.root {
            let p = self.parent[u];
            self.pi[u] = self.pi[p] - self.pred_dir[u] as f64 * self.cost(self.pred[u]);
            u = self.thread[u];
        }
    }
}

/// Exact optimal transport between `a` (sources) and `b` (sinks) with
/// `sum a = sum b`, for the cost `cost(i, j) in [0, 1]`.
pub fn network_simplex<C: Fn(usize, usize) -> f64>(a: &[f64], b: &[f64], cost: C) -> TransportSolution {
    let n_src = a.len();
    let n_snk = b.len();
    let node_num = n_src + n_snk;
    let arc_num = n_src * n_snk;
    let mut supply: Vec<f64> = a.iter().copied().chain(b.iter().map(|v| -v)).collect();
    supply.push(0.0);
    let total = node_num + 1;
    let mut s = Simplex {
        cost_fn: &cost,
        n_src,
        n_snk,
        node_num,
        arc_num,
        root: node_num,
        art_cost: 2.0 * (node_num as f64 + 1.0),
        art_src_up: vec![true; node_num],
        state: vec![STATE_LOWER; arc_num + node_num],
        supply,
        pi: vec![0.0; total],
        parent: vec![NONE; total],
        pred: vec![NONE; total],
        pflow: vec![0.0; total],
        pred_dir: vec![0; total],
        thread: vec![0; total],
        rev_thread: vec![0; total],
        succ_num: vec![0; total],
        last_succ: vec![0; total],
        dirty_revs: Vec::new(),
        in_arc: 0,
        join: 0,
        u_in: 0,
        v_in: 0,
        u_out: 0,
        delta: 0.0,
        next_arc: 0,
        block_size: ((arc_num as f64).sqrt().ceil() as usize).max(10),
    };
    if arc_num == 0 {
        return TransportSolution {
            cost: 0.0,
            dual_objective: 0.0,
            max_dual_violation: 0.0,
            flows: Vec::new(),
            pivots: 0,
        };
    }
    s.init();
    let eps = 1e-13;
    let mut pivots = 0;
    loop {
        if !s.find_entering_arc(eps) {
            // confirm optimality against freshly computed potentials
            s.refresh_potentials();
            if !s.find_entering_arc(eps) {
                break;
            }
        }
        s.find_join_node();
        s.find_leaving_arc();
        s.change_flow();
        s.update_tree_structure();
        s.update_potential();
        pivots += 1;
        if pivots % 4096 == 0 {
            s.refresh_potentials();
        }
    }
    let mut flows = Vec::new();
    let mut primal = 0.0;
    for u in 0..node_num {
        let e = s.pred[u];
        if e < arc_num && s.pflow[u] > 0.0 {
            let (i, j) = (e / n_snk, e % n_snk);
            primal += s.pflow[u] * cost(i, j);
            flows.push((i, j, s.pflow[u]));
        }
    }
    flows.sort_by_key(|x| (x.0, x.1));
    let dual = -(0..node_num).map(|u| s.supply[u] * s.pi[u]).sum::<f64>();
    let mut viol: f64 = 0.0;
    for e in 0..arc_num {
        viol = viol.max(-(s.cost(e) + s.pi[s.source(e)] - s.pi[s.target(e)]));
    }
    TransportSolution {
        cost: primal,
        dual_objective: dual,
        max_dual_violation: viol,
        flows,
        pivots,
    }
}
