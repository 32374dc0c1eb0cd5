use std::collections::{BTreeSet, HashMap, HashSet};

use super::Pattern;

/// Minimum-degree elimination order for a symmetric pattern.
///
/// Unknowns with identical closed neighbourhoods (the DOFs of one mesh node)
/// are merged into weighted supervariables first, then eliminated greedily on
/// the explicit elimination graph. Ties break on the lowest index, so the
/// result is deterministic. Returns `perm` with `perm[k]` the original index
/// eliminated at step `k`.
pub fn minimum_degree(pattern: &Pattern) -> Vec<usize> {
    let n = pattern.dim();
    if n == 0 {
        return Vec::new();
    }

    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, c, _) in pattern.entries() {
        if r != c {
            nbrs[r].push(c);
            nbrs[c].push(r);
        }
    }
    for (v, list) in nbrs.iter_mut().enumerate() {
        list.push(v);
        list.sort_unstable();
        list.dedup();
    }

    // supervariable detection
    let mut group_of = vec![0usize; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut by_key: HashMap<&[usize], usize> = HashMap::new();
    for v in 0..n {
        let g = *by_key.entry(nbrs[v].as_slice()).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[g].push(v);
        group_of[v] = g;
    }
    let ng = members.len();
    let weight: Vec<usize> = members.iter().map(Vec::len).collect();

    let mut adj: Vec<HashSet<usize>> = vec![HashSet::new(); ng];
    for v in 0..n {
        let g = group_of[v];
        for &u in &nbrs[v] {
            let h = group_of[u];
            if h != g {
                adj[g].insert(h);
            }
        }
    }
    drop(by_key);

    let degree_of = |adj: &HashSet<usize>| adj.iter().map(|&h| weight[h]).sum::<usize>();
    let mut degree: Vec<usize> = adj.iter().map(degree_of).collect();
    let mut queue: BTreeSet<(usize, usize)> = (0..ng).map(|g| (degree[g], g)).collect();

    let mut perm = Vec::with_capacity(n);
    while let Some((_, g)) = queue.pop_first() {
        perm.extend_from_slice(&members[g]);
        let mut around: Vec<usize> = adj[g].drain().collect();
        around.sort_unstable();
        for &u in &around {
            adj[u].remove(&g);
        }
        for (i, &u) in around.iter().enumerate() {
            for &w in &around[i + 1..] {
                adj[u].insert(w);
                adj[w].insert(u);
            }
        }
        for &u in &around {
            let d = degree_of(&adj[u]);
            if d != degree[u] {
                queue.remove(&(degree[u], u));
                degree[u] = d;
                queue.insert((d, u));
            }
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn returns_a_permutation() {
        // 1D chain plus a hub
        let mut pairs: Vec<(usize, usize)> = (0..10).map(|i| (i, i)).collect();
        pairs.extend((1..10).map(|i| (i, i - 1)));
        pairs.extend((1..9).map(|i| (9, i)));
        let p = Pattern::from_lower_pairs(10, pairs);
        let mut perm = minimum_degree(&p);
        perm.sort_unstable();
        assert_eq!(perm, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn arrow_matrix_eliminates_hub_last() {
        let mut pairs: Vec<(usize, usize)> = (0..6).map(|i| (i, i)).collect();
        pairs.extend((1..6).map(|i| (i, 0)));
        let p = Pattern::from_lower_pairs(6, pairs);
        let perm = minimum_degree(&p);
        // once only one leaf remains the hub ties with it
        assert!(perm[4..].contains(&0));
    }

    #[test]
    fn deterministic() {
        let mut pairs = Vec::new();
        for i in 0..40usize {
            pairs.push((i, i));
            if i >= 3 {
                pairs.push((i, i - 3));
            }
            if i >= 1 {
                pairs.push((i, i - 1));
            }
        }
        let p = Pattern::from_lower_pairs(40, pairs);
        assert_eq!(minimum_degree(&p), minimum_degree(&p));
    }
}
