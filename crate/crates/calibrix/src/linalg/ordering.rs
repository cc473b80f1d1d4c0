use std::collections::VecDeque;

/// Reverse Cuthill–McKee ordering of an undirected graph.
///
/// Returns `perm` with `perm[new] = old`. Each connected component starts from
/// a pseudo-peripheral vertex found by repeated breadth-first sweeps.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.sort_by_key(|&v| (degree[v], v));

    for &seed in &seeds {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(adj, &degree, seed, &visited);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            next.dedup();
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(adj: &[Vec<usize>], degree: &[usize], seed: usize, blocked: &[bool]) -> usize {
    let mut root = seed;
    let mut depth = 0;
    for _ in 0..8 {
        let (levels, last) = bfs_levels(adj, root, blocked);
        let candidate = last
            .iter()
            .copied()
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(root);
        if levels <= depth {
            break;
        }
        depth = levels;
        root = candidate;
    }
    root
}

fn bfs_levels(adj: &[Vec<usize>], root: usize, blocked: &[bool]) -> (usize, Vec<usize>) {
    let mut seen = blocked.to_vec();
    seen[root] = true;
    let mut frontier = vec![root];
    let mut levels = 0;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return (levels, frontier);
        }
        levels += 1;
        frontier = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, ny: usize) -> Vec<Vec<usize>> {
        let id = |i: usize, j: usize| j * nx + i;
        let mut adj = vec![Vec::new(); nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                if i + 1 < nx {
                    adj[id(i, j)].push(id(i + 1, j));
                    adj[id(i + 1, j)].push(id(i, j));
                }
                if j + 1 < ny {
                    adj[id(i, j)].push(id(i, j + 1));
                    adj[id(i, j + 1)].push(id(i, j));
                }
            }
        }
        adj
    }

    fn bandwidth(adj: &[Vec<usize>], perm: &[usize]) -> usize {
        let mut pos = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            pos[old] = new;
        }
        adj.iter()
            .enumerate()
            .flat_map(|(v, ws)| ws.iter().map(move |&w| (v, w)))
            .map(|(v, w)| pos[v].abs_diff(pos[w]))
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn is_a_permutation() {
        let adj = grid(7, 4);
        let mut p = reverse_cuthill_mckee(&adj);
        p.sort_unstable();
        assert_eq!(p, (0..28).collect::<Vec<_>>());
    }

    #[test]
    fn narrows_a_long_grid() {
        let adj = grid(40, 5);
        let identity: Vec<usize> = (0..200).collect();
        let p = reverse_cuthill_mckee(&adj);
        assert!(bandwidth(&adj, &p) <= 6, "band {}", bandwidth(&adj, &p));
        assert!(bandwidth(&adj, &p) < bandwidth(&adj, &identity));
    }

    #[test]
    fn handles_disconnected_graphs() {
        let adj = vec![vec![1], vec![0], vec![], vec![4], vec![3]];
        let mut p = reverse_cuthill_mckee(&adj);
        p.sort_unstable();
        assert_eq!(p, vec![0, 1, 2, 3, 4]);
    }
}
