//! Polyhedral geometry over Δw-space.

mod fm;
mod plot;

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use dispatch_solver::{solve_lp, Direction, LpBuilder, LpStatus, RowSense, SolverError};

use crate::adcg::RegionPolyhedron;

pub use fm::project_fm;
pub use plot::{facets_csv, points_csv, svg_overlay, vertices_csv, SvgLayer};

/// Membership slack used throughout.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("region is unbounded")]
    Unbounded,
    #[error("size guard exceeded: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// `H·dw ≥ h − 1e-9` on every row.
pub fn contains(region: &RegionPolyhedron, dw: &[f64]) -> bool {
    contains_tol(region, dw, MEMBERSHIP_TOL)
}

pub fn contains_tol(region: &RegionPolyhedron, dw: &[f64], tol: f64) -> bool {
    if region.empty {
        return false;
    }
    region.h_mat.iter().zip(&region.h).all(|(row, &h)| dot(row, dw) >= h - tol)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `min (or max) c·x` over the region; `None` when unbounded, `Some(None)`
/// when the region is empty.
fn optimize(region: &RegionPolyhedron, rows: &[usize], c: &[f64], dir: Direction) -> Result<Option<Option<f64>>, GeometryError> {
    let d = region.dim();
    let mut b = LpBuilder::new(dir);
    for &cj in c {
        b.add_var(f64::NEG_INFINITY, f64::INFINITY, cj);
    }
    for &i in rows {
        let coeffs: Vec<(usize, f64)> = (0..d).filter(|&j| region.h_mat[i][j] != 0.0).map(|j| (j, region.h_mat[i][j])).collect();
        b.add_row(&coeffs, RowSense::Ge, region.h[i]);
    }
    let s = solve_lp(&b.build())?;
    Ok(match s.status {
        LpStatus::Optimal => Some(Some(s.objective)),
        LpStatus::Infeasible => Some(None),
        LpStatus::Unbounded => None,
    })
}

/// Whether the region has no point (LP check).
pub fn is_empty(region: &RegionPolyhedron) -> Result<bool, GeometryError> {
    if region.empty {
        return Ok(true);
    }
    let rows: Vec<usize> = (0..region.num_rows()).collect();
    Ok(matches!(optimize(region, &rows, &vec![0.0; region.dim()], Direction::Minimize)?, Some(None)))
}

/// Drops every row implied by the remaining ones, one LP per row.
pub fn prune_redundant(region: &RegionPolyhedron) -> Result<RegionPolyhedron, GeometryError> {
    if is_empty(region)? {
        return Ok(region.clone());
    }
    let mut keep: Vec<bool> = vec![true; region.num_rows()];
    for i in 0..region.num_rows() {
        let others: Vec<usize> = (0..region.num_rows()).filter(|&j| j != i && keep[j]).collect();
        let scale = 1.0 + region.h[i].abs();
        if let Some(Some(min)) = optimize(region, &others, &region.h_mat[i], Direction::Minimize)? {
            if min >= region.h[i] - 1e-9 * scale {
                keep[i] = false;
            }
        }
    }
    Ok(region.select(&keep))
}

/// Counterclockwise polygon of a 2-D region.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<[f64; 2]>,
    pub empty: bool,
}

/// Vertices of a bounded region in any dimension: every feasible point
/// where `dim` linearly independent rows are tight, deduplicated.
pub fn vertices(region: &RegionPolyhedron) -> Result<Vec<Vec<f64>>, GeometryError> {
    let d = region.dim();
    let all: Vec<usize> = (0..region.num_rows()).collect();
    for j in 0..d {
        let mut c = vec![0.0; d];
        c[j] = 1.0;
        for dir in [Direction::Minimize, Direction::Maximize] {
            match optimize(region, &all, &c, dir)? {
                None => return Err(GeometryError::Unbounded),
                Some(None) => return Ok(Vec::new()),
                Some(Some(_)) => {}
            }
        }
    }
    let n = region.num_rows();
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut pick = Vec::with_capacity(d.saturating_sub(1));
    // Each choice of d − 1 rows spans a line; clipping it by the other rows
    // yields an edge whose endpoints are vertices.
    choose(n, d.saturating_sub(1), 0, &mut pick, &mut |rows| {
        let a: Vec<Vec<f64>> = rows.iter().map(|&i| region.h_mat[i].clone()).collect();
        let Some(z) = null_vector(&a, d) else { return };
        let mut sq = a.clone();
        sq.push(z.clone());
        let mut b: Vec<f64> = rows.iter().map(|&i| region.h[i]).collect();
        b.push(0.0);
        let Some(x0) = solve_square(sq, b) else { return };
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for k in (0..n).filter(|k| !rows.contains(k)) {
            let az = dot(&region.h_mat[k], &z);
            let slack = region.h[k] - dot(&region.h_mat[k], &x0);
            if az.abs() <= 1e-12 {
                if slack > 1e-9 {
                    return;
                }
            } else if az > 0.0 {
                lo = lo.max(slack / az);
            } else {
                hi = hi.min(slack / az);
            }
        }
        if lo > hi + 1e-9 || !lo.is_finite() || !hi.is_finite() {
            return;
        }
        for t in [lo, hi] {
            let x: Vec<f64> = x0.iter().zip(&z).map(|(p, q)| p + t * q).collect();
            let key: Vec<i64> = x.iter().map(|v| (v * 1e8).round() as i64).collect();
            if seen.insert(key) && !out.iter().any(|v| close(v, &x)) {
                out.push(x);
            }
        }
    });
    Ok(out)
}

/// Unit null vector of a `(d − 1) × d` matrix of full row rank. The
/// coordinate fixed to 1 is the one giving the largest normalized weight.
fn null_vector(a: &[Vec<f64>], d: usize) -> Option<Vec<f64>> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for free in 0..d {
        let cols: Vec<usize> = (0..d).filter(|&j| j != free).collect();
        let m: Vec<Vec<f64>> = a.iter().map(|r| cols.iter().map(|&j| r[j]).collect()).collect();
        let rhs: Vec<f64> = a.iter().map(|r| -r[free]).collect();
        let Some(sol) = solve_square(m, rhs) else { continue };
        let mut z = vec![0.0; d];
        z[free] = 1.0;
        for (p, &j) in cols.iter().enumerate() {
            z[j] = sol[p];
        }
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let weight = 1.0 / norm;
        if best.as_ref().is_none_or(|b| weight > b.0) {
            best = Some((weight, z.iter().map(|v| v / norm).collect()));
        }
    }
    best.map(|b| b.1)
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs()))
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

/// Solves a small dense square system; `None` when (nearly) singular.
pub(crate) fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-12 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Vertices of a 2-D region in counterclockwise order.
pub fn vertices_2d(region: &RegionPolyhedron) -> Result<Polygon, GeometryError> {
    if region.dim() != 2 {
        return Err(GeometryError::Dimension { expected: 2, found: region.dim() });
    }
    if region.empty {
        return Ok(Polygon { vertices: Vec::new(), empty: true });
    }
    let vs = vertices(region)?;
    if vs.is_empty() {
        return Ok(Polygon { vertices: Vec::new(), empty: true });
    }
    let cx = vs.iter().map(|v| v[0]).sum::<f64>() / vs.len() as f64;
    let cy = vs.iter().map(|v| v[1]).sum::<f64>() / vs.len() as f64;
    let mut pts: Vec<[f64; 2]> = vs.iter().map(|v| [v[0], v[1]]).collect();
    pts.sort_by(|a, b| (a[1] - cy).atan2(a[0] - cx).total_cmp(&(b[1] - cy).atan2(b[0] - cx)));
    Ok(Polygon { vertices: pts, empty: false })
}

/// Area of a simple polygon (shoelace).
pub fn polygon_area(p: &[[f64; 2]]) -> f64 {
    let n = p.len();
    (0..n).map(|i| p[i][0] * p[(i + 1) % n][1] - p[(i + 1) % n][0] * p[i][1]).sum::<f64>() / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeEstimate {
    pub value: f64,
    /// 95% binomial confidence half-width.
    pub half_width: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Number of RNG shards; fixed so results do not depend on the thread count.
const SHARDS: usize = 64;

/// Draws `n` uniform points in `bbox` and reports, per sample, the verdicts of
/// `tests`. Counts per test are returned in order.
fn sample_counts(bbox: &[(f64, f64)], n: usize, seed: u64, tests: &[&RegionPolyhedron]) -> Vec<usize> {
    let per = n / SHARDS;
    let extra = n % SHARDS;
    let shard_counts: Vec<Vec<usize>> = (0..SHARDS)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let m = per + usize::from(s < extra);
            let mut counts = vec![0usize; tests.len() + 1];
            let mut x = vec![0.0; bbox.len()];
            for _ in 0..m {
                for (xi, &(lo, hi)) in x.iter_mut().zip(bbox) {
                    *xi = if hi > lo { rng.gen_range(lo..hi) } else { lo };
                }
                let inside: Vec<bool> = tests.iter().map(|r| contains(r, &x)).collect();
                for (c, &b) in counts.iter_mut().zip(&inside) {
                    *c += usize::from(b);
                }
                // Joint count of the first two tests, used by EP.
                if inside.len() >= 2 && inside[0] && inside[1] {
                    counts[tests.len()] += 1;
                }
            }
            counts
        })
        .collect();
    let mut total = vec![0usize; tests.len() + 1];
    for c in shard_counts {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    total
}

fn box_volume(bbox: &[(f64, f64)]) -> f64 {
    bbox.iter().map(|&(lo, hi)| hi - lo).product()
}

fn estimate(hits: usize, n: usize, vol: f64, seed: u64) -> VolumeEstimate {
    let p = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
    VolumeEstimate { value: p * vol, half_width: 1.96 * vol * (p * (1.0 - p) / n.max(1) as f64).sqrt(), samples: n, seed }
}

/// Monte Carlo hit-ratio volume of `region` inside `bbox`.
pub fn mc_volume(region: &RegionPolyhedron, bbox: &[(f64, f64)], n: usize, seed: u64) -> Result<VolumeEstimate, GeometryError> {
    if bbox.len() != region.dim() {
        return Err(GeometryError::Dimension { expected: region.dim(), found: bbox.len() });
    }
    let hits = sample_counts(bbox, n, seed, &[region])[0];
    Ok(estimate(hits, n, box_volume(bbox), seed))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpReport {
    /// Percentage.
    pub ep: f64,
    pub half_width: f64,
    pub numerator: VolumeEstimate,
    pub denominator: VolumeEstimate,
    pub reference: String,
    /// Reference points lying outside the candidate.
    pub outside: usize,
}

fn ratio_ci(num: usize, den: usize) -> (f64, f64) {
    if den == 0 {
        return (0.0, 0.0);
    }
    let p = num as f64 / den as f64;
    (100.0 * p, 196.0 * (p * (1.0 - p) / den as f64).sqrt())
}

/// EP of `candidate` against a reference region, both measured on one MC stream.
pub fn ep_regions(
    reference: &RegionPolyhedron,
    candidate: &RegionPolyhedron,
    bbox: &[(f64, f64)],
    n: usize,
    seed: u64,
) -> Result<EpReport, GeometryError> {
    if bbox.len() != candidate.dim() || reference.dim() != candidate.dim() {
        return Err(GeometryError::Dimension { expected: candidate.dim(), found: bbox.len() });
    }
    let c = sample_counts(bbox, n, seed, &[reference, candidate]);
    let vol = box_volume(bbox);
    let (ep, hw) = ratio_ci(c[0], c[1]);
    Ok(EpReport {
        ep,
        half_width: hw,
        numerator: estimate(c[0], n, vol, seed),
        denominator: estimate(c[1], n, vol, seed),
        reference: "region (Monte Carlo)".into(),
        outside: c[0] - c[2],
    })
}

/// EP of `candidate` against labeled sample points: exact points over all
/// points the candidate contains. `cell` is the volume each point stands for.
pub fn ep_labels(points: &[Vec<f64>], exact: &[bool], candidate: &RegionPolyhedron, cell: f64) -> EpReport {
    let mut num = 0;
    let mut den = 0;
    let mut outside = 0;
    for (x, &e) in points.iter().zip(exact) {
        let inside = contains(candidate, x);
        den += usize::from(inside);
        num += usize::from(e);
        outside += usize::from(e && !inside);
    }
    let (ep, hw) = ratio_ci(num, den);
    let n = points.len();
    let vol = cell * n as f64;
    EpReport {
        ep,
        half_width: hw,
        numerator: estimate(num, n, vol, 0),
        denominator: estimate(den, n, vol, 0),
        reference: "labeled grid".into(),
        outside,
    }
}

/// Largest distance from a facet of one region to the nearest facet of the
/// other, with rows scaled to unit Euclidean norm. Both inputs should be pruned.
pub fn facet_distance(a: &RegionPolyhedron, b: &RegionPolyhedron) -> f64 {
    let unit = |r: &RegionPolyhedron| -> Vec<Vec<f64>> {
        r.h_mat
            .iter()
            .zip(&r.h)
            .map(|(row, &h)| {
                let n = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                row.iter().map(|v| v / n).chain(std::iter::once(h / n)).collect()
            })
            .collect()
    };
    let (ua, ub) = (unit(a), unit(b));
    let one_way = |x: &[Vec<f64>], y: &[Vec<f64>]| -> f64 {
        x.iter()
            .map(|r| {
                y.iter()
                    .map(|s| r.iter().zip(s).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_way(&ua, &ub).max(one_way(&ub, &ua))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(lo: f64, hi: f64) -> RegionPolyhedron {
        RegionPolyhedron::from_bounds(&[(lo, hi), (lo, hi)])
    }

    #[test]
    fn membership() {
        let r = square(0.0, 1.0);
        assert!(contains(&r, &[0.5, 0.5]));
        assert!(!contains(&r, &[1.0 + 1e-6, 1.0]));
    }

    #[test]
    fn pruning_and_vertices() {
        let mut r = square(0.0, 1.0);
        r.push_derived(vec![1.0, 0.0], 0.0);
        let p = prune_redundant(&r).unwrap();
        assert_eq!(p.num_rows(), 4);
        // Triangle plus a slack row.
        let mut t = RegionPolyhedron::new(2);
        t.push_derived(vec![1.0, 0.0], 0.0);
        t.push_derived(vec![0.0, 1.0], 0.0);
        t.push_derived(vec![-1.0, -1.0], -1.0);
        t.push_derived(vec![-1.0, 0.0], -5.0);
        assert_eq!(prune_redundant(&t).unwrap().num_rows(), 3);

        assert_eq!(vertices_2d(&square(0.0, 1.0)).unwrap().vertices.len(), 4);
        let mut cut = square(0.0, 1.0);
        cut.push_derived(vec![-1.0, -1.0], -1.5);
        let poly = vertices_2d(&cut).unwrap();
        assert_eq!(poly.vertices.len(), 5);
        assert!((polygon_area(&poly.vertices) - 0.875).abs() < 1e-12);
        let mut empty = square(0.0, 1.0);
        empty.push_derived(vec![1.0, 1.0], 3.0);
        assert!(vertices_2d(&empty).unwrap().empty);
        let mut open = RegionPolyhedron::new(2);
        open.push_derived(vec![1.0, 0.0], 0.0);
        assert!(matches!(vertices_2d(&open), Err(GeometryError::Unbounded)));
    }

    #[test]
    fn volumes() {
        let bbox = [(0.0, 2.0), (0.0, 2.0)];
        let v = mc_volume(&square(0.0, 1.0), &bbox, 100_000, 1).unwrap();
        assert!((v.value - 1.0).abs() <= v.half_width * 1.5, "{v:?}");
        assert_eq!(mc_volume(&square(0.0, 1.0), &bbox, 1000, 9).unwrap(), mc_volume(&square(0.0, 1.0), &bbox, 1000, 9).unwrap());
        let ep = ep_regions(&square(0.5, 1.5), &square(0.0, 2.0), &bbox, 100_000, 2).unwrap();
        assert!((ep.ep - 25.0).abs() <= 2.0 * ep.half_width, "{ep:?}");
        assert_eq!(ep.outside, 0);
    }
}
