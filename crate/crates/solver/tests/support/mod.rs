//! Brute-force oracles and random instance generators shared by solver tests.
#![allow(dead_code)]

use dispatch_solver::{Direction, LpBuilder, LpProblem, RowSense};
use rand::Rng;

/// Dense instance: optimize `c x` over rows `a x (sense) b` and `0 <= x <= ub`.
#[derive(Clone, Debug)]
pub struct Dense {
    pub maximize: bool,
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub senses: Vec<RowSense>,
    pub b: Vec<f64>,
    pub ub: Vec<f64>,
}

impl Dense {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn to_lp(&self) -> LpProblem {
        let mut bld = LpBuilder::new(if self.maximize { Direction::Maximize } else { Direction::Minimize });
        for j in 0..self.n() {
            bld.add_var(0.0, self.ub[j], self.c[j]);
        }
        for (i, row) in self.a.iter().enumerate() {
            let coeffs: Vec<(usize, f64)> = row.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect();
            bld.add_row(&coeffs, self.senses[i], self.b[i]);
        }
        bld.build()
    }

    pub fn random<R: Rng>(rng: &mut R, m: usize, n: usize) -> Self {
        let mut a = Vec::new();
        let mut senses = Vec::new();
        let mut b = Vec::new();
        // An interior reference point keeps most instances feasible.
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        for i in 0..m {
            let row: Vec<f64> = (0..n)
                .map(|_| if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(-5i32..=5) as f64 })
                .collect();
            let act: f64 = row.iter().zip(&x0).map(|(u, v)| u * v).sum();
            let (s, rhs) = match (i, rng.gen_range(0..6)) {
                (0, _) | (_, 0..=3) => (RowSense::Le, (act + rng.gen_range(0.0..3.0)).round()),
                (_, 4) => (RowSense::Ge, (act - rng.gen_range(0.0..3.0)).round()),
                _ => (RowSense::Eq, act),
            };
            a.push(row);
            senses.push(s);
            b.push(rhs);
        }
        Self {
            maximize: rng.gen_bool(0.5),
            c: (0..n).map(|_| rng.gen_range(-4i32..=6) as f64).collect(),
            a,
            senses,
            b,
            ub: (0..n).map(|_| rng.gen_range(2i32..=6) as f64).collect(),
        }
    }
}

/// Solves `m x = r` by Gaussian elimination with partial pivoting.
pub fn gauss(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))?;
        if m[p][k].abs() < 1e-10 {
            return None;
        }
        m.swap(k, p);
        r.swap(k, p);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            if f != 0.0 {
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                r[i] -= f * r[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
        x[k] = (r[k] - s) / m[k][k];
    }
    Some(x)
}

fn combinations(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Optimum over the vertices of the (bounded) feasible polytope, or `None`
/// when there is no feasible vertex. Every `n`-subset of rows and bounds is
/// tried as the active set.
pub fn vertex_enumeration(d: &Dense) -> Option<(f64, Vec<f64>)> {
    let n = d.n();
    let mut faces: Vec<(Vec<f64>, f64)> = d.a.iter().cloned().zip(d.b.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        faces.push((e.clone(), 0.0));
        faces.push((e, d.ub[j]));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    combinations(faces.len(), n, &mut |pick| {
        let m: Vec<Vec<f64>> = pick.iter().map(|&i| faces[i].0.clone()).collect();
        let r: Vec<f64> = pick.iter().map(|&i| faces[i].1).collect();
        if let Some(x) = gauss(m, r) {
            if feasible(d, &x) {
                let obj: f64 = d.c.iter().zip(&x).map(|(c, v)| c * v).sum();
                let better = match &best {
                    None => true,
                    Some((b, _)) => {
                        if d.maximize {
                            obj > *b
                        } else {
                            obj < *b
                        }
                    }
                };
                if better {
                    best = Some((obj, x));
                }
            }
        }
    });
    best
}

pub fn feasible(d: &Dense, x: &[f64]) -> bool {
    let tol = 1e-8;
    for j in 0..d.n() {
        if x[j] < -tol || x[j] > d.ub[j] + tol {
            return false;
        }
    }
    d.a.iter().enumerate().all(|(i, row)| {
        let act: f64 = row.iter().zip(x).map(|(u, v)| u * v).sum();
        match d.senses[i] {
            RowSense::Le => act <= d.b[i] + tol,
            RowSense::Ge => act >= d.b[i] - tol,
            RowSense::Eq => (act - d.b[i]).abs() <= tol,
        }
    })
}

/// MILP optimum by enumerating every assignment of the binaries and solving
/// the remaining LP, with the binaries substituted out, by vertex enumeration.
pub fn milp_enumeration(d: &Dense, binaries: &[usize]) -> Option<f64> {
    let keep: Vec<usize> = (0..d.n()).filter(|j| !binaries.contains(j)).collect();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << binaries.len()) {
        let val = |j: usize| -> f64 {
            let k = binaries.iter().position(|&b| b == j).unwrap();
            ((mask >> k) & 1) as f64
        };
        let constant: f64 = binaries.iter().map(|&j| d.c[j] * val(j)).sum();
        let reduced = Dense {
            maximize: d.maximize,
            c: keep.iter().map(|&j| d.c[j]).collect(),
            a: d.a.iter().map(|row| keep.iter().map(|&j| row[j]).collect()).collect(),
            senses: d.senses.clone(),
            b: d
                .a
                .iter()
                .zip(&d.b)
                .map(|(row, &b)| b - binaries.iter().map(|&j| row[j] * val(j)).sum::<f64>())
                .collect(),
            ub: keep.iter().map(|&j| d.ub[j]).collect(),
        };
        if let Some((obj, _)) = vertex_enumeration(&reduced) {
            let obj = obj + constant;
            best = Some(match best {
                None => obj,
                Some(b) if d.maximize => b.max(obj),
                Some(b) => b.min(obj),
            });
        }
    }
    best
}
