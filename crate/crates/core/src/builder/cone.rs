//! Linear approximations of the quadratic line constraints.

use std::f64::consts::PI;

use super::BuildError;

/// Homogeneous facets `a·z ≤ 0` over local variables `z`.
///
/// For the cone `‖(P, Q)‖ ≤ m` the layout is `[P, Q, m, α0, β0, .., β_{k-3}]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FacetSet {
    pub num_vars: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
}

impl FacetSet {
    /// Largest violation `a·z − rhs` over all facets.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(r, &b)| r.iter().map(|&(j, a)| a * z[j]).sum::<f64>() - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Which bound combination produced a convex-hull cut.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutRegime {
    /// `s_max² ≤ l_max·v_lo`: the secant runs between the two voltage bounds.
    VoltageSpan,
    /// `l_max·v_lo < s_max² < l_max·v_hi`: the secant joins the current cap and `v_hi`.
    CurrentCap,
}

/// Cut `c·η ≤ d` over `η = (P, Q, ℓ, v_from)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearCut {
    pub c: [f64; 4],
    pub d: f64,
    pub regime: CutRegime,
}

impl LinearCut {
    pub fn eval(&self, eta: [f64; 4]) -> f64 {
        self.c.iter().zip(eta).map(|(c, e)| c * e).sum::<f64>() - self.d
    }
}

/// Secant of the surface `v·ℓ = s_max²` over the `(v, ℓ)` box, or `None`
/// when the box lies entirely under it.
pub fn ch_cut(v_lo: f64, v_hi: f64, l_max: f64, s_max: f64) -> Result<Option<LinearCut>, BuildError> {
    if !(v_lo > 0.0 && v_lo <= v_hi && l_max > 0.0 && s_max > 0.0) {
        return Err(BuildError::Config(format!(
            "ch_cut needs 0 < v_lo <= v_hi and positive limits (v_lo {v_lo}, v_hi {v_hi}, l_max {l_max}, s_max {s_max})"
        )));
    }
    let s2 = s_max * s_max;
    Ok(if s2 <= l_max * v_lo {
        Some(LinearCut { c: [0.0, 0.0, v_lo * v_hi, s2], d: (v_lo + v_hi) * s2, regime: CutRegime::VoltageSpan })
    } else if s2 < l_max * v_hi {
        Some(LinearCut { c: [0.0, 0.0, v_hi, l_max], d: l_max * v_hi + s2, regime: CutRegime::CurrentCap })
    } else {
        None
    })
}

/// Rotation angle of BTN stage `n ≥ 1`.
fn stage_angle(n: usize) -> f64 {
    PI / 2f64.powi(n as i32 + 1)
}

/// Linear expression over the local layout.
type Expr = Vec<(usize, f64)>;

fn combine(a: &Expr, ca: f64, b: &Expr, cb: f64) -> Expr {
    let mut out: Expr = a.iter().map(|&(j, v)| (j, ca * v)).collect();
    for &(j, v) in b {
        match out.iter_mut().find(|(i, _)| *i == j) {
            Some(e) => e.1 += cb * v,
            None => out.push((j, cb * v)),
        }
    }
    out.retain(|&(_, v)| v != 0.0);
    out
}

fn neg(e: &Expr) -> Expr {
    e.iter().map(|&(j, v)| (j, -v)).collect()
}

fn minus_var(mut e: Expr, j: usize) -> Expr {
    e.push((j, -1.0));
    e
}

/// Outer approximation of `‖(P, Q)‖ ≤ m` with `2k` facets over `k + 2`
/// variables. Its projection on `m = 1` is the regular `2^k`-gon
/// circumscribing the unit disk.
pub fn soc_outer_facets(k: usize) -> Result<FacetSet, BuildError> {
    if k < 2 {
        return Err(BuildError::Config(format!("cone depth k must be at least 2, got {k}")));
    }
    let (p, q, m, alpha0) = (0usize, 1usize, 2usize, 3usize);
    let beta = |n: usize| 4 + n;
    let mut rows: Vec<Expr> = Vec::with_capacity(2 * k);
    rows.push(vec![(p, 1.0), (alpha0, -1.0)]);
    rows.push(vec![(p, -1.0), (alpha0, -1.0)]);
    let mut alpha: Expr = vec![(alpha0, 1.0)];
    // z is the quantity whose magnitude the next β bounds.
    let mut z: Expr = vec![(q, 1.0)];
    for n in 0..k - 2 {
        rows.push(minus_var(z.clone(), beta(n)));
        rows.push(minus_var(neg(&z), beta(n)));
        let (s, c) = stage_angle(n + 1).sin_cos();
        let b: Expr = vec![(beta(n), 1.0)];
        let next_alpha = combine(&alpha, c, &b, s);
        z = combine(&alpha, -s, &b, c);
        alpha = next_alpha;
    }
    // The last β is eliminated against m ≥ cos φ·α + sin φ·β.
    let (s, c) = (PI / 2f64.powi(k as i32)).sin_cos();
    for sign in [1.0, -1.0] {
        let e = combine(&alpha, c, &z, sign * s);
        rows.push(minus_var(e, m));
    }
    debug_assert_eq!(rows.len(), 2 * k);
    Ok(FacetSet { num_vars: k + 2, rhs: vec![0.0; rows.len()], rows })
}

/// Auxiliary values `[α0, β0, ..]` making `(P, Q, m)` satisfy the facets for
/// every `m` at or above the returned minimum.
pub fn btn_lift(p: f64, q: f64, k: usize) -> (Vec<f64>, f64) {
    let mut aux = Vec::with_capacity(k - 1);
    let mut alpha = p.abs();
    aux.push(alpha);
    let mut z = q;
    for n in 0..k - 2 {
        let b = z.abs();
        aux.push(b);
        let (s, c) = stage_angle(n + 1).sin_cos();
        let next = c * alpha + s * b;
        z = -s * alpha + c * b;
        alpha = next;
    }
    let (s, c) = (PI / 2f64.powi(k as i32)).sin_cos();
    (aux, c * alpha + s * z.abs())
}

/// `4t` half-planes circumscribing the disk of the given radius in `(P, Q)`.
pub fn circle_outer_facets(radius: f64, t: usize) -> Result<FacetSet, BuildError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(BuildError::Config(format!("circle radius must be positive, got {radius}")));
    }
    if t == 0 {
        return Err(BuildError::Config("circle square count t must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(4 * t);
    for z in 0..t {
        let (s, c) = (z as f64 * PI / (2.0 * t as f64)).sin_cos();
        for sign in [1.0, -1.0] {
            rows.push(vec![(0, sign * c), (1, sign * s)]);
            rows.push(vec![(0, -sign * s), (1, sign * c)]);
        }
    }
    let n = rows.len();
    Ok(FacetSet { num_vars: 2, rows, rhs: vec![radius; n] })
}

/// Accuracy `(ε1, ε2, ε)` of the split rotated cone at depth `k`.
pub fn approx_error(k: usize) -> Result<(f64, f64, f64), BuildError> {
    if k < 2 {
        return Err(BuildError::Config(format!("cone depth k must be at least 2, got {k}")));
    }
    let e1 = 1.0 / (PI / 2f64.powi(k as i32)).cos() - 1.0;
    Ok((e1, e1, (1.0 + e1) * (1.0 + e1) - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(p: f64, q: f64, m: f64, k: usize) -> Vec<f64> {
        let (aux, _) = btn_lift(p, q, k);
        let mut z = vec![p, q, m];
        z.extend(aux);
        z
    }

    #[test]
    fn facet_counts() {
        for k in 2..=8 {
            let f = soc_outer_facets(k).unwrap();
            assert_eq!(f.rows.len(), 2 * k);
            assert_eq!(f.num_vars, k + 2);
        }
        assert!(soc_outer_facets(1).is_err());
    }

    #[test]
    fn axis_points() {
        for k in 2..=8 {
            let f = soc_outer_facets(k).unwrap();
            assert!(f.max_violation(&point(1.0, 0.0, 1.0, k)) <= 1e-12);
        }
        let (e1, _, e) = approx_error(6).unwrap();
        assert!((e1 - 1.206e-3).abs() < 1e-6);
        assert!((e - 2.414e-3).abs() < 1e-6);
        assert!(btn_lift(1.0, 0.0, 6).1 > 0.99 * (1.0 + 1e-3));
    }

    #[test]
    fn polygon_is_regular() {
        // The minimal m over a full turn peaks at the polygon vertices.
        for k in 2..=8 {
            let n = 2usize.pow(k as u32);
            let (e1, _, _) = approx_error(k).unwrap();
            let mut worst: f64 = 0.0;
            for i in 0..4 * n {
                let th = i as f64 * 2.0 * PI / (4 * n) as f64;
                let (_, m) = btn_lift(th.cos(), th.sin(), k);
                worst = worst.max(1.0 / m);
                assert!(m <= 1.0 + 1e-12, "k {k} th {th}: m {m}");
            }
            assert!((worst - (1.0 + e1)).abs() < 1e-9, "k {k}: {worst}");
        }
    }

    #[test]
    fn ch_cut_regimes() {
        let a = ch_cut(0.81, 1.21, 1.0, 0.8).unwrap().unwrap();
        assert_eq!(a.regime, CutRegime::VoltageSpan);
        // Both secant endpoints lie on ℓ = s²/v.
        for v in [0.81, 1.21] {
            assert!(a.eval([0.0, 0.0, 0.64 / v, v]).abs() < 1e-12);
        }
        let b = ch_cut(0.81, 1.21, 1.0, 1.0).unwrap().unwrap();
        assert_eq!(b.regime, CutRegime::CurrentCap);
        assert!(b.eval([0.0, 0.0, 1.0 / 1.21, 1.21]).abs() < 1e-12);
        assert!(b.eval([0.0, 0.0, 1.0, 1.0]).abs() < 1e-12);
        assert!(ch_cut(0.81, 1.21, 1.0, (2.0f64 * 1.21).sqrt()).unwrap().is_none());
        let p = ch_cut(1.0, 1.0, 0.25, 0.5).unwrap().unwrap();
        assert!(p.eval([0.0, 0.0, 0.25, 1.0]).abs() < 1e-12);
        assert!(ch_cut(1.2, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn circle_square() {
        let f = circle_outer_facets(2.0, 1).unwrap();
        assert_eq!(f.rows.len(), 4);
        assert!(f.max_violation(&[2.0, 2.0]).abs() < 1e-12);
        let r = 1.0;
        let off = r / 2f64.sqrt() + 0.01 * r;
        assert!(circle_outer_facets(r, 1).unwrap().max_violation(&[off, off]) <= 0.0);
        for t in 1..7 {
            let f = circle_outer_facets(r, t).unwrap();
            assert!(f.max_violation(&[r, 0.0]) <= 1e-12);
            // Odd t leaves a vertex on the diagonal, at radius sec(π/4t); t = 3 reaches past the point.
            assert_eq!(f.max_violation(&[off, off]) > 0.0, t != 1 && t != 3, "t {t}");
        }
        assert!(circle_outer_facets(0.0, 2).is_err());
    }
}
