//! Exact discrete optimal transport via the transportation simplex.
//!
//! Solves `min sum_ij pi_ij c_ij` over couplings of two weight vectors. The
//! basis is maintained as a spanning tree of the bipartite supply/demand
//! graph; degenerate (zero-flow) basis cells are kept in the tree, and a
//! pivot cap guards against cycling.

const PIVOT_TOL: f64 = 1e-13;

#[derive(Clone, Copy)]
struct Cell {
    row: usize,
    col: usize,
    flow: f64,
}

/// Minimal transport cost between `supply` and `demand` (both summing to the
/// same total) for the dense cost matrix `cost[i][j]`.
pub fn transport_simplex(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    let m = supply.len();
    let n = demand.len();
    debug_assert!(cost.len() == m && cost.iter().all(|r| r.len() == n));

    let mut a: Vec<f64> = supply.to_vec();
    let mut b: Vec<f64> = demand.to_vec();

    // Northwest-corner initial basis. On supply/demand ties the scan advances
    // one side only, so a zero-flow cell is inserted and the basis stays a
    // spanning tree with m + n - 1 cells.
    let mut basis: Vec<Cell> = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    while i < m && j < n {
        let f = a[i].min(b[j]);
        basis.push(Cell { row: i, col: j, flow: f });
        a[i] -= f;
        b[j] -= f;
        if i + 1 == m && j + 1 == n {
            break;
        }
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }

    let max_cost = cost.iter().flat_map(|r| r.iter()).cloned().fold(0.0f64, f64::max);
    let tol = PIVOT_TOL * (1.0 + max_cost);

    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    // Hard cap on pivots as a safety net; optimal bases are reached far sooner.
    let max_pivots = 50 * (m + n) * (m + n).max(64);

    for _ in 0..max_pivots {
        compute_duals(&basis, cost, m, n, &mut u, &mut v);

        // Most negative reduced cost.
        let mut best = (-tol, usize::MAX, usize::MAX);
        for r in 0..m {
            let row_cost = &cost[r];
            let ur = u[r];
            for c in 0..n {
                let red = row_cost[c] - ur - v[c];
                if red < best.0 {
                    best = (red, r, c);
                }
            }
        }
        if best.1 == usize::MAX {
            break;
        }
        pivot(&mut basis, best.1, best.2, m, n);
    }

    basis.iter().map(|c| c.flow * cost[c.row][c.col]).sum()
}

/// Solve `u_i + v_j = c_ij` on the basis tree, rooted at row 0 with `u_0 = 0`.
fn compute_duals(basis: &[Cell], cost: &[Vec<f64>], m: usize, n: usize, u: &mut [f64], v: &mut [f64]) {
    let mut row_cells: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut col_cells: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (idx, c) in basis.iter().enumerate() {
        row_cells[c.row].push(idx);
        col_cells[c.col].push(idx);
    }
    let mut row_done = vec![false; m];
    let mut col_done = vec![false; n];
    let mut stack = vec![(true, 0usize)];
    u[0] = 0.0;
    row_done[0] = true;
    while let Some((is_row, node)) = stack.pop() {
        let cells = if is_row { &row_cells[node] } else { &col_cells[node] };
        for &idx in cells {
            let cell = basis[idx];
            if is_row && !col_done[cell.col] {
                v[cell.col] = cost[cell.row][cell.col] - u[cell.row];
                col_done[cell.col] = true;
                stack.push((false, cell.col));
            } else if !is_row && !row_done[cell.row] {
                u[cell.row] = cost[cell.row][cell.col] - v[cell.col];
                row_done[cell.row] = true;
                stack.push((true, cell.row));
            }
        }
    }
}

/// Bring `(enter_row, enter_col)` into the basis: find the unique alternating
/// cycle it closes, shift flow around it, drop the leaving cell.
fn pivot(basis: &mut Vec<Cell>, enter_row: usize, enter_col: usize, m: usize, n: usize) {
    // Path from enter_col's node back to enter_row through the basis tree.
    // Nodes: rows 0..m, cols m..m+n.
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m + n]; // (neighbor, cell idx)
    for (idx, c) in basis.iter().enumerate() {
        adj[c.row].push((m + c.col, idx));
        adj[m + c.col].push((c.row, idx));
    }
    let start = m + enter_col;
    let goal = enter_row;
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; m + n]; // (parent node, cell idx)
    let mut visited = vec![false; m + n];
    visited[start] = true;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == goal {
            break;
        }
        for &(next, idx) in &adj[node] {
            if !visited[next] {
                visited[next] = true;
                prev[next] = Some((node, idx));
                queue.push_back(next);
            }
        }
    }

    // Walk the tree path; edges alternate -,+,-,... starting from the edge
    // incident to enter_row (the entering edge itself is the final +).
    let mut path_cells = Vec::new();
    let mut node = goal;
    while let Some((parent, idx)) = prev[node] {
        path_cells.push(idx);
        node = parent;
    }
    // path_cells[0] touches enter_row; it carries sign -, the next +, etc.
    let mut theta = f64::INFINITY;
    let mut leave_pos = 0;
    for (pos, &idx) in path_cells.iter().enumerate() {
        if pos % 2 == 0 && basis[idx].flow < theta {
            theta = basis[idx].flow;
            leave_pos = pos;
        }
    }
    let leave_idx = path_cells[leave_pos];
    for (pos, &idx) in path_cells.iter().enumerate() {
        if pos % 2 == 0 {
            basis[idx].flow -= theta;
        } else {
            basis[idx].flow += theta;
        }
    }
    basis[leave_idx] = Cell { row: enter_row, col: enter_col, flow: theta };
}
