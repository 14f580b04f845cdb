//! Compressed sparse rows, reverse Cuthill-McKee ordering and an envelope
//! (skyline) Cholesky factorization for the symmetric systems of the solver.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries; columns sorted within each row.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last = usize::MAX;
            for (j, v) in row {
                if j == last {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                    last = j;
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx, values }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn quadratic(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n).map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>()).sum()
    }

    /// a·self + b·other.
    pub fn combine(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        let mut trip = Vec::with_capacity(self.values.len() + other.values.len());
        for i in 0..self.n {
            trip.extend(self.row(i).map(|(j, v)| (i, j, a * v)));
            trip.extend(other.row(i).map(|(j, v)| (i, j, b * v)));
        }
        CsrMatrix::from_triplets(self.n, &trip)
    }

    /// Principal submatrix on `keep` (ascending), renumbered 0..keep.len().
    pub fn restrict(&self, keep: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            map[i] = k;
        }
        let mut trip = Vec::new();
        for (k, &i) in keep.iter().enumerate() {
            for (j, v) in self.row(i) {
                if map[j] != usize::MAX {
                    trip.push((k, map[j], v));
                }
            }
        }
        CsrMatrix::from_triplets(keep.len(), &trip)
    }
}

/// Reverse Cuthill-McKee permutation (new index → old index).
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|i| a.row_ptr[i + 1] - a.row_ptr[i]).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let seed = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (degree[i], i)).unwrap();
        let root = peripheral(a, seed, &degree);
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = a.row(v).map(|(j, _)| j).filter(|&j| !visited[j]).collect();
            next.sort_by_key(|&j| (degree[j], j));
            for j in next {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

/// Approximate pseudo-peripheral node by repeated level-set sweeps.
fn peripheral(a: &CsrMatrix, start: usize, degree: &[usize]) -> usize {
    let mut root = start;
    let mut depth = 0;
    for _ in 0..4 {
        let (levels, last) = level_structure(a, root);
        if levels <= depth {
            break;
        }
        depth = levels;
        root = *last.iter().min_by_key(|&&j| (degree[j], j)).unwrap();
    }
    root
}

fn level_structure(a: &CsrMatrix, root: usize) -> (usize, Vec<usize>) {
    let mut level = vec![usize::MAX; a.n];
    level[root] = 0;
    let mut frontier = vec![root];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for (j, _) in a.row(v) {
                if level[j] == usize::MAX {
                    level[j] = depth + 1;
                    next.push(j);
                }
            }
        }
        if next.is_empty() {
            return (depth, frontier);
        }
        depth += 1;
        frontier = next;
    }
}

/// L Lᵀ factorization stored row-wise over each row's envelope.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    /// new → old
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first = vec![0; n];
        for i in 0..n {
            first[i] = a.row(perm[i]).map(|(j, _)| inv[j]).filter(|&j| j <= i).min().unwrap_or(i);
        }
        let mut start = vec![0; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; start[n]];
        for i in 0..n {
            for (j, v) in a.row(perm[i]) {
                let jj = inv[j];
                if jj <= i {
                    data[start[i] + jj - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let ri = &data[start[i] + k0 - fi..start[i] + j - fi];
                let rj = &data[start[j] + k0 - fj..start[j] + j - fj];
                let s: f64 = ri.iter().zip(rj).map(|(x, y)| x * y).sum();
                let ljj = data[start[j + 1] - 1];
                let idx = start[i] + j - fi;
                data[idx] = (data[idx] - s) / ljj;
            }
            let row = &data[start[i]..start[i + 1] - 1];
            let d = data[start[i + 1] - 1] - row.iter().map(|x| x * x).sum::<f64>();
            if !(d > 0.0) {
                return Err(Error::SingularMass(format!("non-positive pivot {d:.3e} at row {i}")));
            }
            data[start[i + 1] - 1] = d.sqrt();
        }
        Ok(Self { perm, first, start, data })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1] - 1];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / self.data[self.start[i + 1] - 1];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            y[i] /= self.data[self.start[i + 1] - 1];
            let xi = y[i];
            let row = &self.data[self.start[i]..self.start[i + 1] - 1];
            for (l, v) in row.iter().zip(&mut y[fi..i]) {
                *v -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }
}
