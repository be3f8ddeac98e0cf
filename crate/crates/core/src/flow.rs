//! Dinic's maximum flow on small integral networks.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: u64,
    rev: usize,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    graph: Vec<Vec<Arc>>,
}

/// Handle to an arc returned by [`FlowNetwork::add_edge`], used to read back
/// its flow after solving.
#[derive(Debug, Clone, Copy)]
pub struct ArcId {
    from: usize,
    index: usize,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            graph: vec![Vec::new(); nodes],
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: u64) -> ArcId {
        let index = self.graph[from].len();
        let rev_index = self.graph[to].len() + usize::from(from == to);
        self.graph[from].push(Arc {
            to,
            cap,
            rev: rev_index,
        });
        self.graph[to].push(Arc {
            to: from,
            cap: 0,
            rev: index,
        });
        ArcId { from, index }
    }

    /// Flow currently routed through `arc` (the residual of its reverse arc).
    pub fn flow(&self, arc: ArcId) -> u64 {
        let a = &self.graph[arc.from][arc.index];
        self.graph[a.to][a.rev].cap
    }

    pub fn max_flow(&mut self, source: usize, sink: usize) -> u64 {
        let n = self.graph.len();
        let mut total = 0;
        loop {
            let mut level = vec![usize::MAX; n];
            level[source] = 0;
            let mut queue = VecDeque::from([source]);
            while let Some(u) = queue.pop_front() {
                for a in &self.graph[u] {
                    if a.cap > 0 && level[a.to] == usize::MAX {
                        level[a.to] = level[u] + 1;
                        queue.push_back(a.to);
                    }
                }
            }
            if level[sink] == usize::MAX {
                return total;
            }
            let mut next = vec![0usize; n];
            loop {
                let pushed = self.augment(source, sink, u64::MAX, &level, &mut next);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn augment(&mut self, u: usize, sink: usize, limit: u64, level: &[usize], next: &mut [usize]) -> u64 {
        if u == sink {
            return limit;
        }
        while next[u] < self.graph[u].len() {
            let i = next[u];
            let Arc { to, cap, rev } = self.graph[u][i];
            if cap > 0 && level[to] == level[u] + 1 {
                let pushed = self.augment(to, sink, limit.min(cap), level, next);
                if pushed > 0 {
                    self.graph[u][i].cap -= pushed;
                    self.graph[to][rev].cap += pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        0
    }
}
