//! The `region`, `compare` and `validate` commands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dispatch_region::adcg::{
    self, default_delta, enumerate_dual_vertices, initial_box, AdcgOptions, AdcgTrace, MasterKind, RegionPolyhedron,
    Termination,
};
use dispatch_region::builder::{approx_error, build_la_with, build_tcr, ApproxConfig, LinearSystem};
use dispatch_region::geometry::{
    self, contains, contains_tol, ep_labels, facets_csv, project_fm, svg_overlay, vertices_2d, vertices_csv, EpReport,
    Polygon, SvgLayer,
};
use dispatch_region::netmodel::{scale_impedances, NetworkCase};
use dispatch_region::oracle::{sweep, GridSpec, Label, OracleOptions, SweepResult};

use crate::config::{MasterChoice, ModelChoice, RunConfig};
use crate::{exit, load_case, output_dir, CliError};

/// Writes artifacts into one directory, each carrying the config header.
pub struct Artifacts {
    dir: PathBuf,
    header: String,
    pub written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = output_dir(cfg);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self { dir, header: cfg.header(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn put(&mut self, name: &str, body: String) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    /// CSV and plain text: header as `#` lines, then the body.
    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        self.put(name, format!("{}{body}", self.header))
    }

    pub fn svg(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let comment = self.header.replace("--", "- -");
        self.put(name, format!("<!--\n{comment}-->\n{body}"))
    }
}

fn approx(cfg: &RunConfig, k: usize) -> ApproxConfig {
    ApproxConfig { k, t: cfg.t, include_circle: cfg.include_circle }
}

fn model_name(m: ModelChoice) -> &'static str {
    match m {
        ModelChoice::Tcr => "tcr",
        ModelChoice::La => "la",
    }
}

/// One region computation with its timings.
pub struct RegionRun {
    pub region: RegionPolyhedron,
    pub trace: AdcgTrace,
    pub delta: f64,
    pub build_seconds: f64,
    pub model_rows: usize,
    pub model_y: usize,
    pub dw_names: Vec<String>,
}

impl RegionRun {
    pub fn converged(&self) -> bool {
        matches!(self.trace.termination, Termination::Converged | Termination::Empty)
    }

    pub fn polygon(&self) -> Result<Option<Polygon>, CliError> {
        if self.region.dim() != 2 {
            return Ok(None);
        }
        vertices_2d(&self.region).map(Some).map_err(|e| CliError::new(exit::SOLVER, "solver", e.to_string()))
    }

    pub fn total_seconds(&self) -> f64 {
        self.build_seconds + self.trace.seconds
    }
}

pub fn build_model(case: &NetworkCase, cfg: &RunConfig, model: ModelChoice, k: usize) -> Result<LinearSystem, CliError> {
    Ok(match model {
        ModelChoice::Tcr => build_tcr(case, &approx(cfg, k))?,
        ModelChoice::La => build_la_with(case, cfg.t)?,
    })
}

pub fn compute_region(case: &NetworkCase, cfg: &RunConfig, model: ModelChoice, k: usize) -> Result<RegionRun, CliError> {
    let t0 = Instant::now();
    let sys = build_model(case, cfg, model, k)?;
    let build_seconds = t0.elapsed().as_secs_f64();
    let delta = cfg.delta.unwrap_or_else(|| default_delta(case.rpg_units.len()));
    let opts = AdcgOptions {
        delta,
        max_iter: cfg.max_iter,
        master: match cfg.master {
            MasterChoice::Scan => MasterKind::VertexScan,
            MasterChoice::Milp => MasterKind::Milp,
        },
        big_m: cfg.big_m,
        ..AdcgOptions::default()
    };
    let (region, trace) = adcg::run(&sys, initial_box(case, cfg.margin)?, &opts)?;
    Ok(RegionRun {
        region,
        trace,
        delta,
        build_seconds,
        model_rows: sys.num_rows(),
        model_y: sys.num_y(),
        dw_names: sys.vars.dw_names.clone(),
    })
}

fn unconverged(what: &str, run: &RegionRun) -> CliError {
    CliError::new(
        exit::UNCONVERGED,
        "unconverged",
        format!("{what}: {} after {} iterations", run.trace.termination.as_str(), run.trace.iterations()),
    )
}

fn prepare(cfg: &RunConfig) -> Result<NetworkCase, CliError> {
    cfg.validate().map_err(CliError::validation)?;
    let case = load_case(&cfg.case)?;
    let report = case.validate();
    if !report.is_ok() {
        let lines: Vec<String> = report.issues.iter().map(|i| i.to_string()).collect();
        return Err(CliError::validation(format!("case {} failed validation: {}", cfg.case, lines.join("; "))));
    }
    Ok(case)
}

fn axis_names(case: &NetworkCase) -> [String; 2] {
    let name = |i: usize| case.rpg_units.get(i).map_or(format!("dw{}", i + 1), |u| format!("dw{} (bus {})", i + 1, u.bus));
    [name(0), name(1)]
}

fn run_lines(s: &mut String, label: &str, run: &RegionRun) {
    let _ = writeln!(s, "[{label}]");
    let _ = writeln!(s, "termination {}", run.trace.termination.as_str());
    let _ = writeln!(s, "iterations {}", run.trace.iterations());
    let _ = writeln!(s, "final_violation {:e}", run.trace.last_r().unwrap_or(0.0));
    let _ = writeln!(s, "delta {:e}", run.delta);
    let _ = writeln!(s, "region_rows {}", run.region.num_rows());
    let _ = writeln!(s, "model_rows {} model_y {}", run.model_rows, run.model_y);
    let _ = writeln!(s, "build_seconds {:.3}", run.build_seconds);
    let _ = writeln!(s, "adcg_seconds {:.3}", run.trace.seconds);
}

/// `region`: one Ad-CG run with facets, vertices, trace, SVG and report.
pub fn cmd_region(cfg: &RunConfig) -> Result<String, CliError> {
    let case = prepare(cfg)?;
    let run = compute_region(&case, cfg, cfg.model, cfg.k)?;
    let mut out = Artifacts::new(cfg)?;
    out.text("facets.csv", &facets_csv(&run.region, &run.dw_names))?;
    out.text("trace.csv", &run.trace.to_csv(false))?;
    let mut report = String::new();
    let _ = writeln!(report, "case {} ({} buses, {} RPG units)", case.name, case.buses.len(), case.rpg_units.len());
    let _ = writeln!(report, "model {} k {} t {}", model_name(cfg.model), cfg.k, cfg.t);
    run_lines(&mut report, model_name(cfg.model), &run);
    if let Some(poly) = run.polygon()? {
        let _ = writeln!(report, "area_pu2 {:.6e}", geometry::polygon_area(&poly.vertices));
        out.text("vertices.csv", &vertices_csv(&poly))?;
        let axes = axis_names(&case);
        let layer = SvgLayer { name: model_name(cfg.model), color: "#1d3557", polygon: &poly };
        out.svg("region.svg", &svg_overlay(&[layer], &[], [&axes[0], &axes[1]], case.base_mva))?;
    }
    out.text("report.txt", &report)?;
    if !run.converged() {
        return Err(unconverged(model_name(cfg.model), &run));
    }
    Ok(format!(
        "{} region: {} iterations, {} facets, written to {}",
        model_name(cfg.model),
        run.trace.iterations(),
        run.region.num_rows(),
        out.dir().display()
    ))
}

/// Sweep grid covering the physical RPG box at `resolution_mw`.
pub fn sweep_grid(case: &NetworkCase, cfg: &RunConfig) -> Result<GridSpec, CliError> {
    let b = initial_box(case, 0.0)?;
    let ranges = (0..b.dim()).map(|j| (b.h[2 * j], -b.h[2 * j + 1])).collect();
    Ok(GridSpec { ranges, resolution: cfg.resolution_mw / case.base_mva })
}

fn oracle_options(cfg: &RunConfig) -> OracleOptions {
    OracleOptions { tol_exact: cfg.tol_exact, k: cfg.oracle_k, ..OracleOptions::default() }
}

fn run_sweep(case: &NetworkCase, cfg: &RunConfig) -> Result<SweepResult, CliError> {
    let grid = sweep_grid(case, cfg)?;
    Ok(sweep(case, &approx(cfg, cfg.k), &grid, &oracle_options(cfg), cfg.grid_cap)?)
}

fn sweep_lines(s: &mut String, sw: &SweepResult) {
    let _ = writeln!(s, "[sweep]");
    let _ = writeln!(s, "points {} resolution_pu {:e}", sw.labels.len(), sw.grid.resolution);
    let _ = writeln!(s, "feasible_exact {}", sw.exact);
    let _ = writeln!(s, "relaxation_only {}", sw.relaxation_only);
    let _ = writeln!(s, "infeasible {}", sw.infeasible);
    let _ = writeln!(s, "sweep_seconds {:.3}", sw.seconds);
}

fn sweep_points(sw: &SweepResult) -> Vec<([f64; 2], &'static str)> {
    sw.labels
        .iter()
        .filter(|l| l.dw.len() == 2 && l.label != Label::Infeasible)
        .map(|l| ([l.dw[0], l.dw[1]], if l.label == Label::FeasibleExact { "#8ecae6" } else { "#f4a261" }))
        .collect()
}

/// EP against the exact labels plus the optimistic variant.
pub struct EpRow {
    pub exact: EpReport,
    pub relaxed: EpReport,
}

pub fn ep_row(sw: &SweepResult, region: &RegionPolyhedron) -> EpRow {
    let pts = sw.points();
    let cell = sw.grid.cell();
    EpRow {
        exact: ep_labels(&pts, &sw.exact_flags(), region, cell),
        relaxed: ep_labels(&pts, &sw.relaxed_flags(), region, cell),
    }
}

const COLORS: [&str; 6] = ["#e63946", "#1d3557", "#2a9d8f", "#e9c46a", "#6a4c93", "#8d99ae"];

/// `compare`: oracle sweep against both models, or the k or r/x sweeps.
pub fn cmd_compare(cfg: &RunConfig) -> Result<String, CliError> {
    let case = prepare(cfg)?;
    if let Some((a, b)) = cfg.k_range().map_err(CliError::validation)? {
        return k_sweep(&case, cfg, a, b);
    }
    if let Some(factors) = &cfg.scale_rx {
        return rx_sweep(&case, cfg, factors);
    }
    let sw = run_sweep(&case, cfg)?;
    let mut out = Artifacts::new(cfg)?;
    out.text("sweep.csv", &sw.to_csv())?;
    let mut report = String::new();
    sweep_lines(&mut report, &sw);
    let mut table = String::from("model,ep_percent,ep_half_width,ep_relaxed_percent,exact_outside,iterations,region_rows,termination\n");
    let mut polys = Vec::new();
    let mut violations = 0;
    let mut stuck = None;
    for model in [ModelChoice::Tcr, ModelChoice::La] {
        let name = model_name(model);
        let run = compute_region(&case, cfg, model, cfg.k)?;
        let ep = ep_row(&sw, &run.region);
        violations += ep.exact.outside;
        let _ = writeln!(
            table,
            "{name},{:.4},{:.4},{:.4},{},{},{},{}",
            ep.exact.ep,
            ep.exact.half_width,
            ep.relaxed.ep,
            ep.exact.outside,
            run.trace.iterations(),
            run.region.num_rows(),
            run.trace.termination.as_str()
        );
        run_lines(&mut report, name, &run);
        let _ = writeln!(report, "ep_percent {:.4} +- {:.4}", ep.exact.ep, ep.exact.half_width);
        let _ = writeln!(report, "ep_relaxed_percent {:.4}", ep.relaxed.ep);
        let _ = writeln!(report, "exact_points_outside {}", ep.exact.outside);
        out.text(&format!("facets_{name}.csv"), &facets_csv(&run.region, &run.dw_names))?;
        if !run.converged() && stuck.is_none() {
            stuck = Some(unconverged(name, &run));
        }
        polys.push((name, run.polygon()?));
    }
    out.text("ep.csv", &table)?;
    if let [(n1, Some(p1)), (n2, Some(p2))] = &polys[..] {
        let axes = axis_names(&case);
        let layers = [SvgLayer { name: n1, color: COLORS[0], polygon: p1 }, SvgLayer { name: n2, color: COLORS[1], polygon: p2 }];
        out.svg("overlay.svg", &svg_overlay(&layers, &sweep_points(&sw), [&axes[0], &axes[1]], case.base_mva))?;
    }
    let _ = writeln!(report, "containment_violations {violations}");
    out.text("report.txt", &report)?;
    if violations > 0 {
        return Err(CliError::validation(format!("{violations} feasible_exact points fall outside a computed region")));
    }
    if let Some(e) = stuck {
        return Err(e);
    }
    Ok(format!("{table}written to {}", out.dir().display()))
}

fn k_sweep(case: &NetworkCase, cfg: &RunConfig, a: usize, b: usize) -> Result<String, CliError> {
    let sw = run_sweep(case, cfg)?;
    let mut out = Artifacts::new(cfg)?;
    let mut report = String::new();
    sweep_lines(&mut report, &sw);
    let mut table = String::from("k,epsilon,ep_percent,ep_half_width,iterations,region_rows,termination\n");
    let mut stuck = None;
    let mut prev: Option<(f64, f64, f64, f64)> = None;
    let mut trend = [true; 3];
    for k in a..=b {
        let run = compute_region(case, cfg, ModelChoice::Tcr, k)?;
        let eps = approx_error(k)?.2;
        let ep = ep_row(&sw, &run.region).exact;
        let _ = writeln!(
            table,
            "{k},{eps:e},{:.4},{:.4},{},{},{}",
            ep.ep,
            ep.half_width,
            run.trace.iterations(),
            run.region.num_rows(),
            run.trace.termination.as_str()
        );
        run_lines(&mut report, &format!("k={k}"), &run);
        if let Some((pe, pep, phw, pt)) = prev {
            trend[0] &= eps < pe;
            trend[1] &= ep.ep + ep.half_width + phw >= pep;
            trend[2] &= run.total_seconds() >= pt;
        }
        prev = Some((eps, ep.ep, ep.half_width, run.total_seconds()));
        if !run.converged() && stuck.is_none() {
            stuck = Some(unconverged(&format!("k={k}"), &run));
        }
    }
    let _ = writeln!(report, "[trend]");
    let _ = writeln!(report, "epsilon_strictly_decreasing {}", trend[0]);
    let _ = writeln!(report, "ep_non_decreasing_within_ci {}", trend[1]);
    let _ = writeln!(report, "time_non_decreasing {}", trend[2]);
    out.text("ksweep.csv", &table)?;
    out.text("report.txt", &report)?;
    if let Some(e) = stuck {
        return Err(e);
    }
    Ok(format!("{table}written to {}", out.dir().display()))
}

fn rx_sweep(case: &NetworkCase, cfg: &RunConfig, factors: &[f64]) -> Result<String, CliError> {
    let mut fs: Vec<f64> = factors.to_vec();
    if !fs.iter().any(|&f| f == 1.0) {
        fs.push(1.0);
    }
    fs.sort_by(|a, b| b.total_cmp(a));
    fs.dedup();
    let mut runs = Vec::new();
    for &f in &fs {
        let scaled = scale_impedances(case, f).map_err(|e| CliError::validation(e.to_string()))?;
        runs.push(compute_region(&scaled, cfg, cfg.model, cfg.k)?);
    }
    let mut out = Artifacts::new(cfg)?;
    let mut report = String::new();
    let mut table = String::from("factor,iterations,region_rows,contains_origin,inside_next,termination\n");
    let origin = vec![0.0; case.rpg_units.len()];
    let mut chain_ok = true;
    let mut stuck = None;
    for (i, (f, run)) in fs.iter().zip(&runs).enumerate() {
        // Larger impedance must sit inside the next smaller one.
        let inside_next = match runs.get(i + 1) {
            None => "".to_string(),
            Some(next) => {
                let verts = geometry::vertices(&run.region).map_err(|e| CliError::new(exit::SOLVER, "solver", e.to_string()))?;
                let ok = verts.iter().all(|v| contains_tol(&next.region, v, 1e-6));
                chain_ok &= ok;
                ok.to_string()
            }
        };
        let _ = writeln!(
            table,
            "{f},{},{},{},{inside_next},{}",
            run.trace.iterations(),
            run.region.num_rows(),
            contains(&run.region, &origin),
            run.trace.termination.as_str()
        );
        run_lines(&mut report, &format!("scale={f}"), run);
        if !run.converged() && stuck.is_none() {
            stuck = Some(unconverged(&format!("scale={f}"), run));
        }
    }
    let _ = writeln!(report, "containment_chain {chain_ok}");
    let polys: Vec<Option<Polygon>> = runs.iter().map(RegionRun::polygon).collect::<Result<_, _>>()?;
    if polys.iter().all(Option::is_some) {
        let names: Vec<String> = fs.iter().map(|f| format!("r/x x{f}")).collect();
        let layers: Vec<SvgLayer> = polys
            .iter()
            .zip(&names)
            .enumerate()
            .map(|(i, (p, n))| SvgLayer { name: n, color: COLORS[i % COLORS.len()], polygon: p.as_ref().unwrap() })
            .collect();
        let axes = axis_names(case);
        out.svg("overlay.svg", &svg_overlay(&layers, &[], [&axes[0], &axes[1]], case.base_mva))?;
    }
    out.text("rxsweep.csv", &table)?;
    out.text("report.txt", &report)?;
    if !chain_ok {
        return Err(CliError::validation("impedance regions do not nest"));
    }
    if let Some(e) = stuck {
        return Err(e);
    }
    Ok(format!("{table}written to {}", out.dir().display()))
}

/// Random bounded system `B·y + C·Δw ≤ b` in two Δw dimensions, feasible at
/// Δw = 0, with `|Δw_j| ≤ 2` rows appended.
pub fn random_tiny_system(rng: &mut ChaCha8Rng) -> LinearSystem {
    let ny = rng.gen_range(1..=5);
    let m = rng.gen_range(4..=8);
    let y0: Vec<f64> = (0..ny).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut b = Vec::new();
    let mut c = Vec::new();
    let mut rhs = Vec::new();
    for _ in 0..m {
        let row: Vec<f64> = (0..ny).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let by: f64 = row.iter().zip(&y0).map(|(a, y)| a * y).sum();
        b.push(row);
        c.push(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        rhs.push(by + rng.gen_range(0.1..1.0));
    }
    for j in 0..2 {
        for s in [1.0, -1.0] {
            b.push(vec![0.0; ny]);
            let mut r = vec![0.0; 2];
            r[j] = s;
            c.push(r);
            rhs.push(2.0);
        }
    }
    LinearSystem::from_dense(&b, &c, &rhs)
}

/// Ad-CG, dual-vertex enumeration and Fourier–Motzkin on random tiny
/// systems; returns `(systems, points, disagreements)`.
pub fn projection_self_test(seed: u64, systems: usize, points: usize) -> Result<(usize, usize, usize), CliError> {
    let solver = |e: String| CliError::new(exit::SOLVER, "self-test", e);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..systems {
        let sys = random_tiny_system(&mut rng);
        let opts = AdcgOptions { delta: 1e-9, ..AdcgOptions::default() };
        let (a, _) = adcg::run(&sys, RegionPolyhedron::from_bounds(&[(-3.0, 3.0); 2]), &opts).map_err(|e| solver(e.to_string()))?;
        let e = enumerate_dual_vertices(&sys).map_err(|e| solver(e.to_string()))?;
        let f = project_fm(&sys, &[0, 1]).map_err(|e| solver(e.to_string()))?;
        for _ in 0..points {
            let p = [rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5)];
            let v = [contains(&a, &p), contains(&e, &p), contains(&f, &p)];
            bad += usize::from(v[0] != v[1] || v[1] != v[2]);
        }
    }
    Ok((systems, points, bad))
}

/// `validate`: case checks, then the projection self-test.
pub fn cmd_validate(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.validate().map_err(CliError::validation)?;
    let case = load_case(&cfg.case)?;
    let report = case.validate();
    let mut s = String::new();
    let _ = writeln!(s, "case {}: {} buses, {} lines, {} RPG units", case.name, case.buses.len(), case.lines.len(), case.rpg_units.len());
    if !report.is_ok() {
        let lines: Vec<String> = report.issues.iter().map(|i| i.to_string()).collect();
        return Err(CliError::validation(format!("{s}{}", lines.join("\n"))));
    }
    let (n, p, bad) = projection_self_test(cfg.seed, 6, 200)?;
    if bad > 0 {
        return Err(CliError::new(exit::SOLVER, "self-test", format!("{bad} membership disagreements over {n} systems")));
    }
    let _ = writeln!(s, "projection self-test: {n} systems, {p} points each, 0 disagreements");
    Ok(s)
}
