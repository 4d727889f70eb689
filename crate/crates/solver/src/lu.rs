//! Sparse LU factorization of simplex bases with product-form updates.
//!
//! Left-looking factorization with a depth-first reach for the sparse
//! triangular solves and threshold partial pivoting. Columns are processed in
//! ascending order of nonzero count so slack columns pivot first and stay
//! out of the fill.

const NONE: usize = usize::MAX;

/// Relative threshold for accepting a sparser pivot over the largest entry.
const PIVOT_THRESHOLD: f64 = 0.1;

/// Absolute magnitude below which a column is treated as dependent.
const SINGULAR_TOL: f64 = 1e-11;

#[derive(Debug)]
pub(crate) struct Singular {
    /// Basis positions whose columns could not be pivoted.
    pub positions: Vec<usize>,
    /// Rows left without a pivot, one per dependent position.
    pub free_rows: Vec<usize>,
}

#[derive(Clone, Debug)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
pub(crate) struct LuFactors {
    m: usize,
    // Unit lower factor by columns, row indices in pivot order, diagonal implied.
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    // Upper factor by columns, row indices in pivot order, diagonal separate.
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
    // Pivot order k -> original row.
    perm_row: Vec<usize>,
    // Pivot order k -> basis position.
    col_order: Vec<usize>,
    etas: Vec<Eta>,
    eta_nnz: usize,
    work: Vec<f64>,
}

impl LuFactors {
    /// Factors the basis whose column at position `p` is `cols(p)`.
    pub fn factorize<F>(m: usize, mut cols: F) -> Result<Self, Singular>
    where
        F: FnMut(usize, &mut Vec<(usize, f64)>),
    {
        let mut columns: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        let mut row_count = vec![0usize; m];
        for p in 0..m {
            let mut c = Vec::new();
            cols(p, &mut c);
            for &(r, _) in &c {
                row_count[r] += 1;
            }
            columns.push(c);
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&p| (columns[p].len(), p));

        let mut pinv = vec![NONE; m];
        let mut x = vec![0.0f64; m];
        let mut mark = vec![false; m];
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut reach: Vec<usize> = Vec::new();

        // L is accumulated with original row indices, remapped at the end.
        let mut l_start = Vec::with_capacity(m + 1);
        l_start.push(0);
        let mut l_idx: Vec<usize> = Vec::new();
        let mut l_val: Vec<f64> = Vec::new();
        let mut u_start = Vec::with_capacity(m + 1);
        u_start.push(0);
        let mut u_idx: Vec<usize> = Vec::new();
        let mut u_val: Vec<f64> = Vec::new();
        let mut u_diag = Vec::with_capacity(m);
        let mut perm_row = Vec::with_capacity(m);
        let mut col_order = Vec::with_capacity(m);
        let mut dependent = Vec::new();

        for &pos in &order {
            let col = &columns[pos];
            // Depth-first reach of the column pattern through L.
            reach.clear();
            for &(r0, _) in col {
                if mark[r0] {
                    continue;
                }
                stack.push((r0, 0));
                mark[r0] = true;
                while let Some(&(r, child)) = stack.last() {
                    let top = stack.len() - 1;
                    let k = pinv[r];
                    let mut next = None;
                    if k != NONE {
                        let (a, b) = (l_start[k], l_start[k + 1]);
                        let mut c = child;
                        while a + c < b {
                            let rr = l_idx[a + c];
                            c += 1;
                            if !mark[rr] {
                                next = Some(rr);
                                break;
                            }
                        }
                        stack[top].1 = c;
                    }
                    match next {
                        Some(rr) => {
                            mark[rr] = true;
                            stack.push((rr, 0));
                        }
                        None => {
                            stack.pop();
                            reach.push(r);
                        }
                    }
                }
            }
            for &(r, v) in col {
                x[r] = v;
            }
            // Reverse post-order is a topological order.
            for &r in reach.iter().rev() {
                let k = pinv[r];
                if k == NONE {
                    continue;
                }
                let xr = x[r];
                if xr != 0.0 {
                    for p in l_start[k]..l_start[k + 1] {
                        x[l_idx[p]] -= l_val[p] * xr;
                    }
                }
            }

            let mut max_abs = 0.0f64;
            for &r in &reach {
                if pinv[r] == NONE {
                    max_abs = max_abs.max(x[r].abs());
                }
            }
            let k = col_order.len();
            if max_abs < SINGULAR_TOL {
                dependent.push(pos);
                for &r in &reach {
                    x[r] = 0.0;
                    mark[r] = false;
                }
                continue;
            }
            let mut piv_row = NONE;
            let mut best_count = usize::MAX;
            for &r in &reach {
                if pinv[r] == NONE && x[r].abs() >= PIVOT_THRESHOLD * max_abs {
                    let c = row_count[r];
                    if c < best_count || (c == best_count && x[r].abs() > x[piv_row].abs()) {
                        best_count = c;
                        piv_row = r;
                    }
                }
            }
            let pivot = x[piv_row];
            for &r in &reach {
                let v = x[r];
                if v != 0.0 {
                    let kr = pinv[r];
                    if kr != NONE {
                        u_idx.push(kr);
                        u_val.push(v);
                    } else if r != piv_row {
                        l_idx.push(r);
                        l_val.push(v / pivot);
                    }
                }
                x[r] = 0.0;
                mark[r] = false;
            }
            u_diag.push(pivot);
            pinv[piv_row] = k;
            perm_row.push(piv_row);
            col_order.push(pos);
            l_start.push(l_idx.len());
            u_start.push(u_idx.len());
        }

        if !dependent.is_empty() {
            let free_rows = (0..m).filter(|&r| pinv[r] == NONE).collect();
            return Err(Singular {
                positions: dependent,
                free_rows,
            });
        }

        // Remap L row indices to pivot order.
        for r in l_idx.iter_mut() {
            *r = pinv[*r];
        }
        Ok(Self {
            m,
            l_start,
            l_idx,
            l_val,
            u_start,
            u_idx,
            u_val,
            u_diag,
            perm_row,
            col_order,
            etas: Vec::new(),
            eta_nnz: 0,
            work: vec![0.0; m],
        })
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    pub fn eta_nnz(&self) -> usize {
        self.eta_nnz
    }

    /// Solves `B z = a` in place; `rhs` is indexed by row, result by basis position.
    pub fn ftran(&mut self, rhs: &mut [f64]) {
        let m = self.m;
        let w = &mut self.work;
        for k in 0..m {
            w[k] = rhs[self.perm_row[k]];
        }
        for k in 0..m {
            let wk = w[k];
            if wk != 0.0 {
                for p in self.l_start[k]..self.l_start[k + 1] {
                    w[self.l_idx[p]] -= self.l_val[p] * wk;
                }
            }
        }
        for k in (0..m).rev() {
            if w[k] != 0.0 {
                w[k] /= self.u_diag[k];
                let wk = w[k];
                for p in self.u_start[k]..self.u_start[k + 1] {
                    w[self.u_idx[p]] -= self.u_val[p] * wk;
                }
            }
        }
        for k in 0..m {
            rhs[self.col_order[k]] = w[k];
        }
        for eta in &self.etas {
            let zr = rhs[eta.pos];
            if zr != 0.0 {
                let zr = zr / eta.pivot;
                rhs[eta.pos] = zr;
                for &(i, a) in &eta.entries {
                    rhs[i] -= a * zr;
                }
            }
        }
    }

    /// Solves `B^T y = c` in place; `rhs` is indexed by basis position, result by row.
    pub fn btran(&mut self, rhs: &mut [f64]) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut s = rhs[eta.pos];
            for &(i, a) in &eta.entries {
                s -= a * rhs[i];
            }
            rhs[eta.pos] = s / eta.pivot;
        }
        let w = &mut self.work;
        for k in 0..m {
            w[k] = rhs[self.col_order[k]];
        }
        for k in 0..m {
            let mut s = w[k];
            for p in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[p] * w[self.u_idx[p]];
            }
            w[k] = s / self.u_diag[k];
        }
        for k in (0..m).rev() {
            let mut s = w[k];
            for p in self.l_start[k]..self.l_start[k + 1] {
                s -= self.l_val[p] * w[self.l_idx[p]];
            }
            w[k] = s;
        }
        for k in 0..m {
            rhs[self.perm_row[k]] = w[k];
        }
    }

    /// Records the replacement of the column at `pos` by a column whose
    /// FTRAN image is `alpha` (indexed by basis position).
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let pivot = alpha[pos];
        let entries: Vec<(usize, f64)> = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a.abs() > 1e-14)
            .map(|(i, &a)| (i, a))
            .collect();
        self.eta_nnz += entries.len() + 1;
        self.etas.push(Eta {
            pos,
            pivot,
            entries,
        });
    }
}
