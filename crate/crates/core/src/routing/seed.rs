//! Greedy initial layouts.

use std::cmp::Reverse;
use std::collections::VecDeque;

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::topology::{CouplingMap, Layout};

/// Chain logical qubits greedily by interaction count, growing at both ends,
/// and lay the chain along a longest shortest path of the coupling map.
/// Qubits off the path are filled nearest first.
pub fn path_embedding_layout(circuit: &Circuit, coupling: &CouplingMap) -> Result<Layout> {
    let n = coupling.n_qubits();
    if circuit.n_qubits() > n {
        return Err(Error::Routing(format!(
            "circuit has {} qubits, coupling map {}",
            circuit.n_qubits(),
            n
        )));
    }
    let mut weight = vec![0usize; n * n];
    for g in circuit.gates() {
        if let Gate::Cx(a, b) | Gate::Swap(a, b) = *g {
            weight[a * n + b] += 1;
            weight[b * n + a] += 1;
        }
    }
    let total: Vec<usize> = (0..n).map(|q| weight[q * n..(q + 1) * n].iter().sum()).collect();

    let mut placed = vec![false; n];
    let mut logical = VecDeque::with_capacity(n);
    let first = (0..n).max_by_key(|&q| (total[q], Reverse(q))).unwrap_or(0);
    placed[first] = true;
    logical.push_back(first);
    while logical.len() < n {
        let front = *logical.front().expect("non-empty");
        let back = *logical.back().expect("non-empty");
        let to_placed = |q: usize| logical.iter().map(|&p| weight[q * n + p]).sum::<usize>();
        let (_, next, at_front) = (0..n)
            .filter(|&q| !placed[q])
            .flat_map(|q| [(q, false), (q, true)])
            .map(|(q, f)| {
                let end = if f { front } else { back };
                ((weight[end * n + q], to_placed(q), total[q], Reverse(q), Reverse(f)), q, f)
            })
            .max_by_key(|&(key, _, _)| key)
            .expect("an unplaced qubit");
        placed[next] = true;
        if at_front {
            logical.push_front(next);
        } else {
            logical.push_back(next);
        }
    }

    let (mut a, mut b) = (0, 0);
    for x in 0..n {
        for y in x + 1..n {
            if coupling.dist(x, y) > coupling.dist(a, b) {
                (a, b) = (x, y);
            }
        }
    }
    let mut physical = coupling.shortest_path(a, b);
    let mut rest: Vec<usize> = (0..n).filter(|q| !physical.contains(q)).collect();
    rest.sort_by_key(|&q| (physical.iter().map(|&p| coupling.dist(p, q)).min(), q));
    physical.extend(rest);

    let mut l2p = vec![0; n];
    for (l, p) in logical.into_iter().zip(physical) {
        l2p[l] = p;
    }
    Layout::from_l2p(l2p)
}
