//! Brute-force projection through every vertex of the dual polytope
//! `U = {u : Bᵀu = 0, −1 ≤ u ≤ 0}`.

use super::{AdcgError, RegionPolyhedron, RowOrigin};
use crate::builder::LinearSystem;
use crate::geometry;

pub const MAX_ENUM_Y: usize = 12;
pub const MAX_ENUM_ROWS: usize = 20;

/// Independent rows spanning the row space of `a` (dense, `r × m`).
fn row_basis(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let m = a.first().map_or(0, Vec::len);
    let mut out = Vec::new();
    let mut col = 0;
    while col < m && !a.is_empty() {
        let (p, mx) = a
            .iter()
            .map(|r| r[col].abs())
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty");
        if mx <= 1e-10 {
            col += 1;
            continue;
        }
        let pivot = a.swap_remove(p);
        for r in &mut a {
            let f = r[col] / pivot[col];
            if f != 0.0 {
                for (x, y) in r.iter_mut().zip(&pivot) {
                    *x -= f * y;
                }
            }
        }
        out.push(pivot);
        col += 1;
    }
    out
}

fn choose(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if cur.len() == k {
        f(cur);
        return;
    }
    for i in start..n {
        if n - i < k - cur.len() {
            break;
        }
        cur.push(i);
        choose(n, k, i + 1, cur, f);
        cur.pop();
    }
}

/// Region from the cuts of all vertices of `U`, with redundant rows pruned.
pub fn enumerate_dual_vertices(model: &LinearSystem) -> Result<RegionPolyhedron, AdcgError> {
    let m = model.num_rows();
    let ny = model.num_y();
    if ny > MAX_ENUM_Y || m > MAX_ENUM_ROWS {
        return Err(AdcgError::TooLarge(format!(
            "{ny} y columns and {m} rows (limits {MAX_ENUM_Y} and {MAX_ENUM_ROWS})"
        )));
    }
    let mut bt = vec![vec![0.0; m]; ny];
    for (i, j, v) in model.b_mat.triplets() {
        bt[j][i] = v;
    }
    let e = row_basis(bt);
    let r = e.len();
    let mut verts: Vec<Vec<f64>> = Vec::new();
    let mut pick = Vec::with_capacity(r);
    choose(m, r, 0, &mut pick, &mut |free| {
        let fixed: Vec<usize> = (0..m).filter(|i| !free.contains(i)).collect();
        let ef: Vec<Vec<f64>> = e.iter().map(|row| free.iter().map(|&i| row[i]).collect()).collect();
        if r > 0 && geometry::solve_square(ef.clone(), vec![0.0; r]).is_none() {
            return;
        }
        // G = E_F⁻¹·E_N, one column per fixed coordinate.
        let mut g: Vec<Vec<f64>> = Vec::with_capacity(fixed.len());
        for &i in &fixed {
            let rhs: Vec<f64> = e.iter().map(|row| row[i]).collect();
            match geometry::solve_square(ef.clone(), rhs) {
                Some(c) => g.push(c),
                None => return,
            }
        }
        for mask in 0u64..(1u64 << fixed.len()) {
            let mut u = vec![0.0; m];
            for (b, &i) in fixed.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    u[i] = -1.0;
                }
            }
            let mut ok = true;
            for (p, &i) in free.iter().enumerate() {
                let val: f64 = -fixed.iter().enumerate().map(|(b, &j)| g[b][p] * u[j]).sum::<f64>();
                if !(-1.0 - 1e-9..=1e-9).contains(&val) {
                    ok = false;
                    break;
                }
                u[i] = val.clamp(-1.0, 0.0);
            }
            if ok {
                verts.push(u);
            }
        }
    });
    let d = model.num_dw();
    let mut region = RegionPolyhedron::new(d);
    for u in &verts {
        let row = model.c_mat.tr_mul_vec(u);
        let h = geometry::dot(u, &model.rhs);
        if row.iter().all(|v| v.abs() <= 1e-12) {
            if h > 1e-9 {
                region.empty = true;
            }
            continue;
        }
        region.push(row, h, RowOrigin::Derived);
    }
    if region.empty {
        return Ok(region);
    }
    // Keep the tightest of each group of parallel rows before the LP pruning.
    let mut keep = vec![true; region.num_rows()];
    for i in 0..region.num_rows() {
        for j in 0..i {
            if keep[j] && region.h_mat[i].iter().zip(&region.h_mat[j]).all(|(a, b)| (a - b).abs() <= 1e-9) {
                if region.h[i] > region.h[j] {
                    keep[j] = false;
                } else {
                    keep[i] = false;
                    break;
                }
            }
        }
    }
    let region = region.select(&keep);
    if geometry::is_empty(&region)? {
        let mut r = region;
        r.empty = true;
        return Ok(r);
    }
    Ok(geometry::prune_redundant(&region)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adcg::tests::interval_toy;

    #[test]
    fn interval_from_vertices() {
        let r = enumerate_dual_vertices(&interval_toy()).unwrap();
        assert_eq!(r.num_rows(), 2);
        assert!(geometry::contains(&r, &[-0.1]) && geometry::contains(&r, &[0.2]));
        assert!(!geometry::contains(&r, &[0.2001]) && !geometry::contains(&r, &[-0.1001]));
    }

    #[test]
    fn zero_b_gives_box_cuts() {
        // B = 0: U is the whole unit box, the region is the rows themselves.
        let model = LinearSystem::from_dense(
            &[vec![0.0], vec![0.0], vec![0.0]],
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]],
            &[1.0, 1.0, 0.0],
        );
        let r = enumerate_dual_vertices(&model).unwrap();
        assert_eq!(r.num_rows(), 3);
        assert!(geometry::contains(&r, &[0.5, 0.5]) && !geometry::contains(&r, &[-0.1, 0.0]));
    }

    #[test]
    fn infeasible_system_is_empty() {
        let model = LinearSystem::from_dense(&[vec![1.0], vec![-1.0]], &[vec![1.0], vec![1.0]], &[-1.0, 0.0]);
        // y ≤ −1 − Δw and y ≥ Δw: feasible for Δw ≤ −1/2.
        assert!(!enumerate_dual_vertices(&model).unwrap().empty);
        let bad = LinearSystem::from_dense(&[vec![1.0], vec![-1.0]], &[vec![1.0], vec![-1.0]], &[-1.0, 0.0]);
        assert!(enumerate_dual_vertices(&bad).unwrap().empty);
    }

    #[test]
    fn size_guard() {
        let rows = vec![vec![0.0; 13]; 2];
        let model = LinearSystem::from_dense(&rows, &[vec![1.0], vec![1.0]], &[0.0, 0.0]);
        assert!(matches!(enumerate_dual_vertices(&model), Err(AdcgError::TooLarge(_))));
    }
}
