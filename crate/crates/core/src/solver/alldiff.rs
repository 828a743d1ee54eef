//! Matching-based filtering for all-different: a maximum matching between
//! variables and values, then removal of every edge that belongs to no
//! maximum matching.

use std::collections::{HashMap, VecDeque};

use super::domain::Domain;

/// Above this many (variable, value) edges only the pigeonhole check runs.
const MAX_EDGES: u64 = 200_000;

/// Returns, per variable, the values to remove; `Err` when no matching
/// covers all variables.
pub fn filter(doms: &[&Domain]) -> Result<Vec<Vec<i64>>, ()> {
    let n = doms.len();
    let edges: u64 = doms.iter().map(|d| d.size()).fold(0u64, |a, b| a.saturating_add(b));
    if edges > MAX_EDGES {
        return pigeonhole(doms).map(|_| vec![Vec::new(); n]);
    }
    let mut values: Vec<i64> = Vec::new();
    let mut index: HashMap<i64, usize> = HashMap::new();
    let mut adj: Vec<Vec<usize>> = Vec::with_capacity(n);
    for d in doms {
        let mut row = Vec::with_capacity(d.size() as usize);
        for v in d.values() {
            let id = *index.entry(v).or_insert_with(|| {
                values.push(v);
                values.len() - 1
            });
            row.push(id);
        }
        adj.push(row);
    }
    let m = values.len();
    if m < n {
        return Err(());
    }
    let (match_var, match_val) = hopcroft_karp(&adj, m);
    if match_var.iter().any(|x| x.is_none()) {
        return Err(());
    }
    // Directed graph: matched edges var -> value, others value -> var.
    // Nodes 0..n are variables, n..n+m values.
    let total = n + m;
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); total];
    for (x, row) in adj.iter().enumerate() {
        for &v in row {
            if match_var[x] == Some(v) {
                out_edges[x].push(n + v);
            } else {
                out_edges[n + v].push(x);
            }
        }
    }
    // Values reachable from a free value lie on an even alternating path.
    let mut reach = vec![false; total];
    let mut queue = VecDeque::new();
    for v in 0..m {
        if match_val[v].is_none() {
            reach[n + v] = true;
            queue.push_back(n + v);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &w in &out_edges[u] {
            if !reach[w] {
                reach[w] = true;
                queue.push_back(w);
            }
        }
    }
    let scc = tarjan(&out_edges);
    let mut removals = vec![Vec::new(); n];
    for (x, row) in adj.iter().enumerate() {
        for &v in row {
            if match_var[x] == Some(v) || reach[n + v] || scc[x] == scc[n + v] {
                continue;
            }
            removals[x].push(values[v]);
        }
    }
    Ok(removals)
}

fn pigeonhole(doms: &[&Domain]) -> Result<(), ()> {
    let mut union = Domain::empty();
    for d in doms {
        union = union.union(d);
        if union.size() >= doms.len() as u64 {
            return Ok(());
        }
    }
    if union.size() < doms.len() as u64 {
        Err(())
    } else {
        Ok(())
    }
}

/// Maximum bipartite matching; returns (value per variable, variable per value).
pub fn hopcroft_karp(adj: &[Vec<usize>], m: usize) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
    let n = adj.len();
    let mut mv: Vec<Option<usize>> = vec![None; n];
    let mut mu: Vec<Option<usize>> = vec![None; m];
    let mut dist = vec![u32::MAX; n];
    loop {
        // BFS layering from free variables.
        let mut queue = VecDeque::new();
        for x in 0..n {
            if mv[x].is_none() {
                dist[x] = 0;
                queue.push_back(x);
            } else {
                dist[x] = u32::MAX;
            }
        }
        let mut found = false;
        while let Some(x) = queue.pop_front() {
            for &v in &adj[x] {
                match mu[v] {
                    None => found = true,
                    Some(y) if dist[y] == u32::MAX => {
                        dist[y] = dist[x] + 1;
                        queue.push_back(y);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            break;
        }
        let mut progressed = false;
        for x in 0..n {
            if mv[x].is_none() && augment(x, adj, &mut mv, &mut mu, &mut dist) {
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    (mv, mu)
}

fn augment(
    start: usize,
    adj: &[Vec<usize>],
    mv: &mut [Option<usize>],
    mu: &mut [Option<usize>],
    dist: &mut [u32],
) -> bool {
    // Iterative DFS along the BFS layers.
    let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
    let mut path: Vec<(usize, usize)> = Vec::new();
    while let Some(&mut (x, ref mut i)) = stack.last_mut() {
        if *i >= adj[x].len() {
            dist[x] = u32::MAX;
            stack.pop();
            path.pop();
            continue;
        }
        let v = adj[x][*i];
        *i += 1;
        match mu[v] {
            None => {
                path.push((x, v));
                for &(px, pv) in &path {
                    mv[px] = Some(pv);
                    mu[pv] = Some(px);
                }
                return true;
            }
            Some(y) if dist[y] == dist[x].wrapping_add(1) => {
                path.push((x, v));
                stack.push((y, 0));
            }
            _ => {}
        }
    }
    false
}

/// Strongly connected component id per node (iterative Tarjan).
pub fn tarjan(g: &[Vec<usize>]) -> Vec<usize> {
    let n = g.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![usize::MAX; n];
    let mut stack = Vec::new();
    let mut next = 0;
    let mut ncomp = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (u, ref mut i)) = call.last_mut() {
            if *i < g[u].len() {
                let w = g[u][*i];
                *i += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[u] = low[u].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    low[p] = low[p].min(low[u]);
                }
                if low[u] == index[u] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = ncomp;
                        if w == u {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    comp
}
