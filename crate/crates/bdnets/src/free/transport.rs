//! Exact min-cost transport by successive shortest paths.
//!
//! Supplies and demands are exact rationals; arcs run from every supply
//! point to every demand point at the given cost, with residual reverse
//! arcs. Each augmentation follows a shortest path in the residual graph
//! (Bellman-Ford, since residual costs go negative) and exhausts at least
//! one supply or demand, so the loop terminates after at most
//! `#supplies + #demands` rounds with the exact optimum.

use num_traits::{Signed, Zero};

use crate::{Error, Q};

/// One routed arc of the optimal flow.
#[derive(Debug, Clone)]
pub struct FlowArc {
    pub from: usize,
    pub to: usize,
    pub amount: Q,
}

/// Exact optimal transport cost between balanced supplies and demands
/// (`sum supply == sum demand`, all amounts positive), plus the routing.
/// `from`/`to` in the result index into the supply and demand slices.
pub fn min_cost_transport<C>(
    supplies: &[(usize, Q)],
    demands: &[(usize, Q)],
    cost: C,
) -> Result<(Q, Vec<FlowArc>), Error>
where
    C: Fn(usize, usize) -> Q,
{
    let s_total: Q = supplies.iter().map(|(_, q)| q.clone()).sum();
    let d_total: Q = demands.iter().map(|(_, q)| q.clone()).sum();
    if s_total != d_total {
        return Err(Error::Internal("transport instance is not balanced".into()));
    }
    if supplies.iter().any(|(_, q)| !q.is_positive())
        || demands.iter().any(|(_, q)| !q.is_positive())
    {
        return Err(Error::Internal("transport amounts must be positive".into()));
    }

    let ns = supplies.len();
    let nd = demands.len();
    let mut remaining_s: Vec<Q> = supplies.iter().map(|(_, q)| q.clone()).collect();
    let mut remaining_d: Vec<Q> = demands.iter().map(|(_, q)| q.clone()).collect();
    let mut flow = vec![vec![Q::zero(); nd]; ns];
    let costs: Vec<Vec<Q>> = (0..ns)
        .map(|i| (0..nd).map(|j| cost(supplies[i].0, demands[j].0)).collect())
        .collect();

    loop {
        let active: Vec<usize> = (0..ns).filter(|&i| !remaining_s[i].is_zero()).collect();
        if active.is_empty() {
            break;
        }
        // Bellman-Ford over the residual graph; nodes are supplies then
        // demands, sources are the supplies with remaining amount.
        let nodes = ns + nd;
        let mut dist: Vec<Option<Q>> = vec![None; nodes];
        let mut parent: Vec<Option<usize>> = vec![None; nodes];
        for &i in &active {
            dist[i] = Some(Q::zero());
        }
        for _ in 0..nodes {
            let mut changed = false;
            for i in 0..ns {
                if let Some(di) = dist[i].clone() {
                    for j in 0..nd {
                        let cand = &di + &costs[i][j];
                        if dist[ns + j].as_ref().map_or(true, |d| cand < *d) {
                            dist[ns + j] = Some(cand);
                            parent[ns + j] = Some(i);
                            changed = true;
                        }
                    }
                }
            }
            for j in 0..nd {
                if let Some(dj) = dist[ns + j].clone() {
                    for i in 0..ns {
                        if flow[i][j].is_zero() {
                            continue;
                        }
                        let cand = &dj - &costs[i][j];
                        if dist[i].as_ref().map_or(true, |d| cand < *d) {
                            dist[i] = Some(cand);
                            parent[i] = Some(ns + j);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }

        // nearest demand with remaining need; ties resolved by index
        let mut target = None;
        for j in 0..nd {
            if remaining_d[j].is_zero() {
                continue;
            }
            if let Some(dj) = &dist[ns + j] {
                let better = match &target {
                    None => true,
                    Some((best, _)) => dj < best,
                };
                if better {
                    target = Some((dj.clone(), j));
                }
            }
        }
        let (_, target) = target.ok_or_else(|| {
            Error::Internal("transport instance is balanced but disconnected".into())
        })?;

        // walk the path backwards to find the bottleneck
        let mut bottleneck: Option<Q> = None;
        let mut node = ns + target;
        let tighten = |b: Option<Q>, q: &Q| match b {
            Some(b) if b <= *q => Some(b),
            _ => Some(q.clone()),
        };
        bottleneck = tighten(bottleneck, &remaining_d[target]);
        while let Some(prev) = parent[node] {
            if node >= ns {
                // forward arc prev -> node has unlimited residual
            } else {
                // residual of a used arc node -> (node's parent demand)
                bottleneck = tighten(bottleneck, &flow[node][prev - ns]);
            }
            node = prev;
            if node < ns && parent[node].is_none() {
                bottleneck = tighten(bottleneck, &remaining_s[node]);
            }
        }
        let amount = bottleneck.expect("path has at least one arc");

        // apply the augmentation
        let mut node = ns + target;
        while let Some(prev) = parent[node] {
            if node >= ns {
                flow[prev][node - ns] += &amount;
            } else {
                flow[node][prev - ns] -= &amount;
            }
            node = prev;
        }
        remaining_s[node] -= &amount;
        remaining_d[target] -= &amount;
    }

    if remaining_d.iter().any(|q| !q.is_zero()) {
        return Err(Error::Internal("transport loop ended with unmet demand".into()));
    }
    let mut total = Q::zero();
    let mut arcs = Vec::new();
    for i in 0..ns {
        for j in 0..nd {
            if !flow[i][j].is_zero() {
                total += &flow[i][j] * &costs[i][j];
                arcs.push(FlowArc { from: i, to: j, amount: flow[i][j].clone() });
            }
        }
    }
    Ok((total, arcs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{q_int, q_ratio};

    #[test]
    fn single_arc() {
        let (value, arcs) =
            min_cost_transport(&[(0, q_int(2))], &[(1, q_int(2))], |_, _| q_int(3)).unwrap();
        assert_eq!(value, q_int(6));
        assert_eq!(arcs.len(), 1);
        assert_eq!(arcs[0].amount, q_int(2));
    }

    #[test]
    fn prefers_the_cheap_route_with_rebalancing() {
        // two supplies, two demands; the greedy first augmentation must be
        // corrected through a residual arc
        let costs = [[q_int(1), q_int(2)], [q_int(1), q_int(9)]];
        let (value, _) = min_cost_transport(
            &[(0, q_int(1)), (1, q_int(1))],
            &[(0, q_int(1)), (1, q_int(1))],
            |i, j| costs[i][j].clone(),
        )
        .unwrap();
        // optimum routes supply 1 to demand 0 and supply 0 to demand 1
        assert_eq!(value, q_int(3));
    }

    #[test]
    fn rational_amounts() {
        let (value, _) = min_cost_transport(
            &[(0, q_ratio(1, 2)), (1, q_ratio(3, 2))],
            &[(2, q_int(2))],
            |i, _| q_int(i as i64 + 1),
        )
        .unwrap();
        assert_eq!(value, q_ratio(1, 2) + q_int(3));
    }

    #[test]
    fn unbalanced_rejected() {
        assert!(min_cost_transport(&[(0, q_int(1))], &[(1, q_int(2))], |_, _| q_int(1)).is_err());
    }
}
