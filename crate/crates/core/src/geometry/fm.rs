//! Fourier–Motzkin projection of small systems, used as a brute-force oracle.

use dispatch_solver::{solve_lp, Direction, LpBuilder, LpStatus, RowSense};

use super::GeometryError;
use crate::adcg::{RegionPolyhedron, RowOrigin};
use crate::builder::LinearSystem;

const MAX_COLS: usize = 15;
const MAX_ROWS: usize = 60;

/// Dense row `a·x ≤ b`.
#[derive(Clone, Debug)]
struct Row {
    a: Vec<f64>,
    b: f64,
}

fn normalize(mut r: Row) -> Option<Row> {
    let s = r.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if s <= 1e-12 {
        return None;
    }
    for v in &mut r.a {
        *v /= s;
        if v.abs() < 1e-13 {
            *v = 0.0;
        }
    }
    r.b /= s;
    Some(r)
}

/// Removes near-duplicates and rows implied by the others.
fn prune(rows: Vec<Row>, live: &[usize]) -> Result<Vec<Row>, GeometryError> {
    let mut uniq: Vec<Row> = Vec::new();
    'outer: for r in rows {
        for u in &mut uniq {
            if u.a.iter().zip(&r.a).all(|(x, y)| (x - y).abs() <= 1e-10) {
                u.b = u.b.min(r.b);
                continue 'outer;
            }
        }
        uniq.push(r);
    }
    let mut keep = vec![true; uniq.len()];
    for i in 0..uniq.len() {
        let mut lp = LpBuilder::new(Direction::Maximize);
        for &j in live {
            lp.add_var(f64::NEG_INFINITY, f64::INFINITY, uniq[i].a[j]);
        }
        for (k, r) in uniq.iter().enumerate() {
            if k == i || !keep[k] {
                continue;
            }
            let coeffs: Vec<(usize, f64)> =
                live.iter().enumerate().filter(|(_, &j)| r.a[j] != 0.0).map(|(p, &j)| (p, r.a[j])).collect();
            lp.add_row(&coeffs, RowSense::Le, r.b);
        }
        let s = solve_lp(&lp.build())?;
        match s.status {
            LpStatus::Optimal if s.objective <= uniq[i].b + 1e-9 * (1.0 + uniq[i].b.abs()) => keep[i] = false,
            // An empty system is represented by its first infeasible subset; stop pruning.
            LpStatus::Infeasible => return Ok(uniq),
            _ => {}
        }
    }
    Ok(uniq.into_iter().zip(keep).filter(|(_, k)| *k).map(|(r, _)| r).collect())
}

/// Projects `{(y, Δw) : B·y + C·Δw ≤ b}` onto the Δw columns in `keep`,
/// eliminating every other column.
pub fn project_fm(model: &LinearSystem, keep: &[usize]) -> Result<RegionPolyhedron, GeometryError> {
    let ny = model.num_y();
    let nd = model.num_dw();
    let n = ny + nd;
    if n > MAX_COLS || model.num_rows() > MAX_ROWS {
        return Err(GeometryError::TooLarge(format!(
            "{} columns and {} rows (limits {MAX_COLS} and {MAX_ROWS})",
            n,
            model.num_rows()
        )));
    }
    let b_rows = model.b_mat.to_rows();
    let c_rows = model.c_mat.to_rows();
    let mut rows: Vec<Row> = Vec::new();
    let mut infeasible = false;
    for i in 0..model.num_rows() {
        let mut a = vec![0.0; n];
        for &(j, v) in &b_rows[i] {
            a[j] = v;
        }
        for &(j, v) in &c_rows[i] {
            a[ny + j] = v;
        }
        match normalize(Row { a, b: model.rhs[i] }) {
            Some(r) => rows.push(r),
            None => infeasible |= model.rhs[i] < -1e-12,
        }
    }
    let mut live: Vec<usize> = (0..n).collect();
    let mut eliminate: Vec<usize> = (0..ny).chain((0..nd).filter(|d| !keep.contains(d)).map(|d| ny + d)).collect();
    rows = prune(rows, &live)?;
    while !eliminate.is_empty() && !infeasible {
        // Cheapest column first: fewest generated rows.
        let (pos_in_list, &col) = eliminate
            .iter()
            .enumerate()
            .min_by_key(|(_, &j)| {
                let p = rows.iter().filter(|r| r.a[j] > 0.0).count();
                let q = rows.iter().filter(|r| r.a[j] < 0.0).count();
                (p * q) as isize - (p + q) as isize
            })
            .unwrap();
        eliminate.remove(pos_in_list);
        live.retain(|&j| j != col);
        let (pos, rest): (Vec<Row>, Vec<Row>) = rows.into_iter().partition(|r| r.a[col] > 0.0);
        let (neg, zero): (Vec<Row>, Vec<Row>) = rest.into_iter().partition(|r| r.a[col] < 0.0);
        let mut next = zero;
        for p in &pos {
            for q in &neg {
                let (sp, sq) = (-q.a[col], p.a[col]);
                let a: Vec<f64> = p.a.iter().zip(&q.a).map(|(x, y)| sp * x + sq * y).collect();
                let b = sp * p.b + sq * q.b;
                let mut a = a;
                a[col] = 0.0;
                match normalize(Row { a, b }) {
                    Some(r) => next.push(r),
                    None => infeasible |= b < -1e-10,
                }
            }
        }
        rows = prune(next, &live)?;
    }
    let dims: Vec<usize> = keep.iter().map(|&d| ny + d).collect();
    let mut region = RegionPolyhedron::new(keep.len());
    region.empty = infeasible;
    for r in rows {
        let hrow: Vec<f64> = dims.iter().map(|&j| -r.a[j]).collect();
        region.push(hrow, -r.b, RowOrigin::Derived);
    }
    Ok(region)
}
