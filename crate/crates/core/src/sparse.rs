//! Compressed sparse rows, reverse Cuthill–McKee ordering and a skyline
//! `LDLᵀ` factorization for symmetric (possibly indefinite, quasi-definite)
//! matrices.

use crate::error::{Error, Result};
use alloc::collections::VecDeque;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    /// Sums duplicate entries; columns sorted within each row.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Csr {
        trip.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = alloc::vec![0usize; n + 1];
        let mut col = Vec::with_capacity(trip.len());
        let mut val: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last = (usize::MAX, usize::MAX);
        for (i, j, v) in trip {
            if (i, j) == last {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(j);
                val.push(v);
                row_ptr[i + 1] += 1;
                last = (i, j);
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr { n, row_ptr, col, val }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col[k], self.val[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = &self.col[self.row_ptr[i]..self.row_ptr[i + 1]];
        match r.binary_search(&j) {
            Ok(k) => self.val[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// Multiply row `i` by `s[i]`.
    pub fn scale_rows(&mut self, s: &[f64]) {
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                self.val[k] *= s[i];
            }
        }
    }

    /// Largest `|a_ij − a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        let mut big: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                big = big.max(libm::fabs(v));
                m = m.max(libm::fabs(v - self.get(j, i)));
            }
        }
        if big == 0.0 {
            0.0
        } else {
            m / big
        }
    }
}

/// Reverse Cuthill–McKee permutation of a graph given by adjacency lists;
/// `perm[new] = old`. Components are started from a minimum-degree vertex.
pub fn rcm(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = alloc::vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (adj[v].len(), v));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        let root = pseudo_peripheral(adj, start);
        let mut queue = VecDeque::new();
        visited[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| (adj[w].len(), w));
            for w in nb {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adj: &[Vec<usize>], root: usize) -> (usize, usize) {
    // returns (eccentricity, a farthest vertex of minimum degree)
    let mut dist = alloc::vec![usize::MAX; adj.len()];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut last = Vec::new();
    let mut ecc = 0;
    while let Some(v) = queue.pop_front() {
        if dist[v] > ecc {
            ecc = dist[v];
            last.clear();
        }
        last.push(v);
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    let far = last.iter().copied().min_by_key(|&v| (adj[v].len(), v)).unwrap_or(root);
    (ecc, far)
}

fn pseudo_peripheral(adj: &[Vec<usize>], start: usize) -> usize {
    let mut root = start;
    let (mut ecc, mut far) = bfs_levels(adj, root);
    for _ in 0..8 {
        let (e2, f2) = bfs_levels(adj, far);
        if e2 <= ecc {
            break;
        }
        root = far;
        ecc = e2;
        far = f2;
    }
    root
}

/// `P A Pᵀ = L D Lᵀ` in variable-band (skyline) storage.
#[derive(Debug, Clone)]
pub struct SkylineLdl {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    first: Vec<usize>,
    ptr: Vec<usize>,
    /// strictly lower row entries `l_{i, first[i]..i}`
    low: Vec<f64>,
    diag: Vec<f64>,
}

impl SkylineLdl {
    /// Factor the symmetric matrix `a` (only entries with `j ≤ i` after
    /// permutation are read). Zero or tiny pivots report `Error::Singular`
    /// with `tau` set to NaN for the caller to fill in.
    pub fn factor(a: &Csr, perm: Vec<usize>) -> Result<SkylineLdl> {
        let n = a.n;
        let mut inv = alloc::vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = inv[old];
            for (jo, _) in a.row(old) {
                let j = inv[jo];
                if j < i {
                    first[i] = first[i].min(j);
                } else if i < j {
                    first[j] = first[j].min(i);
                }
            }
        }
        let mut ptr = alloc::vec![0usize; n + 1];
        for i in 0..n {
            ptr[i + 1] = ptr[i] + (i - first[i]);
        }
        let mut low = alloc::vec![0.0; ptr[n]];
        let mut diag = alloc::vec![0.0; n];
        let mut scale: f64 = 0.0;
        for old in 0..n {
            let i = inv[old];
            for (jo, v) in a.row(old) {
                let j = inv[jo];
                if j < i {
                    low[ptr[i] + (j - first[i])] = v;
                } else if j == i {
                    diag[i] = v;
                    scale = scale.max(libm::fabs(v));
                }
            }
        }
        // Crout: row i holds g_ij = l_ij d_j until scaled
        for i in 0..n {
            let fi = first[i];
            let ri = ptr[i];
            for j in fi..i {
                let fj = first[j];
                let rj = ptr[j];
                let k0 = fi.max(fj);
                let mut s = low[ri + (j - fi)];
                let gi = &low[ri + (k0 - fi)..ri + (j - fi)];
                let lj = &low[rj + (k0 - fj)..rj + (j - fj)];
                for (g, l) in gi.iter().zip(lj) {
                    s -= g * l;
                }
                low[ri + (j - fi)] = s;
            }
            let mut d = diag[i];
            for j in fi..i {
                let g = low[ri + (j - fi)];
                let l = g / diag[j];
                d -= g * l;
                low[ri + (j - fi)] = l;
            }
            if !(libm::fabs(d) > 1e-14 * scale) {
                return Err(Error::Singular { index: perm[i], tau: f64::NAN });
            }
            diag[i] = d;
        }
        Ok(SkylineLdl { n, perm, first, ptr, low, diag })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn profile(&self) -> usize {
        self.low.len()
    }

    /// Numbers of negative and positive pivots.
    pub fn inertia(&self) -> (usize, usize) {
        let neg = self.diag.iter().filter(|&&d| d < 0.0).count();
        (neg, self.n - neg)
    }

    /// Ratio of the smallest to the largest pivot magnitude.
    pub fn pivot_ratio(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for d in &self.diag {
            lo = lo.min(libm::fabs(*d));
            hi = hi.max(libm::fabs(*d));
        }
        lo / hi
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.low[self.ptr[i]..self.ptr[i + 1]];
            let mut s = y[i];
            for (l, yj) in row.iter().zip(&y[fi..i]) {
                s -= l * yj;
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let yi = y[i];
            let row = &self.low[self.ptr[i]..self.ptr[i + 1]];
            for (l, yj) in row.iter().zip(&mut y[fi..i]) {
                *yj -= l * yi;
            }
        }
        let mut x = alloc::vec![0.0; n];
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Solve `a x = b` with the factorization of `a` (or of a matrix close to it)
/// and iterative refinement against `a`. Returns `(x, relative residual,
/// refinement steps)`.
pub fn solve_refined(a: &Csr, f: &SkylineLdl, b: &[f64], tol: f64, max_steps: usize) -> (Vec<f64>, f64, usize) {
    let bn = norm2(b);
    if bn == 0.0 {
        return (alloc::vec![0.0; b.len()], 0.0, 0);
    }
    let mut x = f.solve(b);
    let mut steps = 0;
    loop {
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let rel = norm2(&r) / bn;
        if rel <= tol || steps >= max_steps {
            return (x, rel, steps);
        }
        let dx = f.solve(&r);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        steps += 1;
    }
}
