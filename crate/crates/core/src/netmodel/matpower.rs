//! Import of the MATPOWER case-script subset: `mpc.baseMVA`, `mpc.bus`,
//! `mpc.gen` and `mpc.branch` (plus an ignored `mpc.gencost`).
//!
//! Data the script cannot express comes from a sidecar in native syntax:
//!
//! ```text
//! [meta]
//! name            case33
//! base_kv         12.66
//! v_root          1
//! impedance_units ohm      # or pu (default)
//! ramp_fraction   0.25
//! [rpg]
//! 12 0.35 0.5
//! ```

use std::collections::HashMap;

use super::native::{parse_rpg, sections};
use super::{
    first_cycle, validate, Bus, CaseError, Generator, Line, NetworkCase, DEFAULT_RAMP_FRACTION,
};

const BUS_COLS: usize = 13;
const GEN_COLS: usize = 10;
const BRANCH_COLS: usize = 11;

struct Script {
    base_mva: Option<f64>,
    bus: Option<Vec<Vec<f64>>>,
    gen: Option<Vec<Vec<f64>>>,
    branch: Option<Vec<Vec<f64>>>,
}

fn strip_comment(line: &str) -> &str {
    line.split('%').next().unwrap_or("")
}

fn scalar(rhs: &str, line: usize) -> Result<f64, CaseError> {
    let t = rhs.trim().trim_end_matches(';').trim();
    t.parse().map_err(|_| CaseError::Syntax { line, column: 1, message: format!("expected a number, found '{t}'") })
}

fn parse_script(text: &str) -> Result<Script, CaseError> {
    let mut s = Script { base_mva: None, bus: None, gen: None, branch: None };
    let mut lines = text.lines().enumerate().peekable();
    while let Some((i, raw)) = lines.next() {
        let body = strip_comment(raw).trim();
        if body.is_empty() || body.starts_with("function") {
            continue;
        }
        let Some((lhs, rhs)) = body.split_once('=') else {
            return Err(CaseError::Unsupported(body.split_whitespace().next().unwrap_or(body).to_string()));
        };
        let lhs = lhs.trim();
        match lhs {
            "mpc.version" => continue,
            "mpc.baseMVA" => {
                s.base_mva = Some(scalar(rhs, i + 1)?);
                continue;
            }
            "mpc.bus" | "mpc.gen" | "mpc.branch" | "mpc.gencost" => {}
            other => return Err(CaseError::Unsupported(other.to_string())),
        }
        let Some(open) = rhs.find('[') else {
            return Err(CaseError::Syntax { line: i + 1, column: 1, message: format!("{lhs} must be a matrix literal") });
        };
        // Collect the matrix text up to the closing bracket.
        let mut buf = String::new();
        let mut rest = rhs[open + 1..].to_string();
        let mut start = i + 1;
        let mut rows_text: Vec<(usize, String)> = Vec::new();
        loop {
            if let Some(close) = rest.find(']') {
                buf.push_str(&rest[..close]);
                rows_text.push((start, std::mem::take(&mut buf)));
                break;
            }
            buf.push_str(&rest);
            rows_text.push((start, std::mem::take(&mut buf)));
            let Some((j, next)) = lines.next() else {
                return Err(CaseError::Syntax { line: i + 1, column: 1, message: format!("unterminated matrix {lhs}") });
            };
            start = j + 1;
            rest = strip_comment(next).to_string();
        }
        let mut rows = Vec::new();
        for (ln, text) in rows_text {
            for chunk in text.split(';') {
                let vals: Result<Vec<f64>, _> = chunk
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| CaseError::Syntax {
                            line: ln,
                            column: 1,
                            message: format!("invalid number '{t}' in {lhs}"),
                        })
                    })
                    .collect();
                let vals = vals?;
                if !vals.is_empty() {
                    rows.push(vals);
                }
            }
        }
        match lhs {
            "mpc.bus" => s.bus = Some(rows),
            "mpc.gen" => s.gen = Some(rows),
            "mpc.branch" => s.branch = Some(rows),
            _ => {}
        }
    }
    Ok(s)
}

fn check_width(matrix: &str, rows: &[Vec<f64>], expected: usize) -> Result<(), CaseError> {
    let width = rows.first().map_or(expected, |r| r.len());
    for (i, r) in rows.iter().enumerate() {
        if r.len() < expected || r.len() != width {
            return Err(CaseError::Dimension { matrix: matrix.into(), row: i + 1, found: r.len(), expected: expected.max(width) });
        }
    }
    Ok(())
}

/// Builds a case from a MATPOWER script and its RPG sidecar.
pub fn import_matpower(text: &str, rpg_annotations: &str) -> Result<NetworkCase, CaseError> {
    let script = parse_script(text)?;
    let bus = script.bus.ok_or(CaseError::MissingSection("mpc.bus"))?;
    let gen = script.gen.ok_or(CaseError::MissingSection("mpc.gen"))?;
    let branch = script.branch.ok_or(CaseError::MissingSection("mpc.branch"))?;
    check_width("mpc.bus", &bus, BUS_COLS)?;
    check_width("mpc.gen", &gen, GEN_COLS)?;
    check_width("mpc.branch", &branch, BRANCH_COLS)?;
    if gen.is_empty() {
        return Err(CaseError::NoGenerators);
    }

    let base_mva = script.base_mva.unwrap_or(100.0);
    let mut name = String::new();
    let mut base_kv = bus.first().map_or(10.0, |b| b[9]);
    if base_kv <= 0.0 {
        base_kv = 10.0;
    }
    let mut v_root = None;
    let mut ohm = false;
    let mut ramp_fraction = DEFAULT_RAMP_FRACTION;
    let mut rpg_units = Vec::new();
    for sec in sections(rpg_annotations)? {
        match sec.name.as_str() {
            "meta" => {
                for rec in &sec.records {
                    let key = rec.tokens[0].text;
                    let val = rec.tokens.get(1).map(|t| t.text).unwrap_or("");
                    let number = || super::native::num(rec, 1);
                    match key {
                        "name" => name = val.to_string(),
                        "base_kv" => base_kv = number()?,
                        "v_root" => v_root = Some(number()?),
                        "ramp_fraction" => ramp_fraction = number()?,
                        "impedance_units" => match val {
                            "ohm" => ohm = true,
                            "pu" => ohm = false,
                            _ => return Err(CaseError::Unsupported(format!("impedance_units {val}"))),
                        },
                        other => return Err(CaseError::Unsupported(other.to_string())),
                    }
                }
            }
            "rpg" => {
                for rec in &sec.records {
                    rpg_units.push(parse_rpg(rec)?);
                }
            }
            other => return Err(CaseError::Unsupported(format!("[{other}]"))),
        }
    }
    let z = if ohm { base_kv * base_kv / base_mva } else { 1.0 };

    let mut buses = Vec::new();
    let mut root_vm = 1.0;
    for r in &bus {
        if r[4] != 0.0 || r[5] != 0.0 {
            return Err(CaseError::Unsupported(format!("shunt at bus {}", r[0])));
        }
        let is_root = r[1] == 3.0;
        if is_root {
            root_vm = r[7];
        }
        buses.push(Bus {
            id: r[0] as u32,
            p_load: r[2] / base_mva,
            q_load: r[3] / base_mva,
            v_min: r[12] * r[12],
            v_max: r[11] * r[11],
            is_root,
        });
    }
    let total_load: f64 = buses.iter().map(|b| b.p_load.hypot(b.q_load)).sum();

    let mut generators = Vec::new();
    for r in &gen {
        if r[7] <= 0.0 {
            continue;
        }
        let p_max = r[8] / base_mva;
        generators.push(Generator {
            bus: r[0] as u32,
            p_set: r[1] / base_mva,
            q_set: r[2] / base_mva,
            p_min: r[9] / base_mva,
            p_max,
            q_min: r[4] / base_mva,
            q_max: r[3] / base_mva,
            ramp_p: ramp_fraction * p_max,
        });
    }
    if generators.is_empty() {
        return Err(CaseError::NoGenerators);
    }

    let vmin_of: HashMap<u32, f64> = buses.iter().map(|b| (b.id, b.v_min)).collect();
    let mut lines = Vec::new();
    for r in &branch {
        if r[10] <= 0.0 {
            continue;
        }
        if r[4] != 0.0 {
            return Err(CaseError::Unsupported(format!("line charging on branch {}-{}", r[0], r[1])));
        }
        if r[8] != 0.0 && r[8] != 1.0 {
            return Err(CaseError::Unsupported(format!("tap ratio on branch {}-{}", r[0], r[1])));
        }
        // RATE_A = 0 means unlimited; substitute a bound no feeder flow can reach.
        let s_max = if r[5] > 0.0 { r[5] / base_mva } else { 2.0 * total_load.max(1e-3) };
        let v_lo = vmin_of.get(&(r[0] as u32)).copied().unwrap_or(1.0).max(1e-6);
        lines.push(Line { from: r[0] as u32, to: r[1] as u32, r: r[2] / z, x: r[3] / z, l_max: s_max * s_max / v_lo, s_max });
    }

    let mut case = NetworkCase {
        name,
        base_mva,
        base_kv,
        v_root: v_root.unwrap_or(root_vm * root_vm),
        buses,
        lines,
        generators,
        rpg_units,
    };
    orient(&mut case);
    let idx = case.bus_index();
    if let Some(k) = first_cycle(&case, &idx) {
        let l = &case.lines[k];
        return Err(CaseError::Topology { line: k + 1, message: format!("branch {}-{} closes a cycle", l.from, l.to) });
    }
    let report = validate(&case);
    if !report.is_ok() {
        return Err(CaseError::Invalid(report));
    }
    Ok(case)
}

/// Flips lines so that each points away from the root.
fn orient(case: &mut NetworkCase) {
    let idx = case.bus_index();
    let Some(root) = case.root().map(|b| b.id) else { return };
    let mut adj: HashMap<u32, Vec<usize>> = HashMap::new();
    for (k, l) in case.lines.iter().enumerate() {
        adj.entry(l.from).or_default().push(k);
        adj.entry(l.to).or_default().push(k);
    }
    let mut seen = vec![false; case.buses.len()];
    let mut done = vec![false; case.lines.len()];
    let mut stack = vec![root];
    if let Some(&r) = idx.get(&root) {
        seen[r] = true;
    }
    while let Some(b) = stack.pop() {
        for &k in adj.get(&b).into_iter().flatten() {
            if done[k] {
                continue;
            }
            done[k] = true;
            let l = &mut case.lines[k];
            if l.to == b {
                std::mem::swap(&mut l.from, &mut l.to);
            }
            if let Some(&t) = idx.get(&l.to) {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(l.to);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCRIPT: &str = "\
function mpc = toy
mpc.version = '2';
mpc.baseMVA = 10;
mpc.bus = [
\t1\t3\t0\t0\t0\t0\t1\t1\t0\t10\t1\t1.1\t0.9;
\t2\t1\t5\t2\t0\t0\t1\t1\t0\t10\t1\t1.1\t0.9;
\t3\t1\t1\t1\t0\t0\t1\t1\t0\t10\t1\t1.1\t0.9;
];
mpc.gen = [
\t1\t4\t2\t10\t-10\t1\t10\t1\t20\t0;
];
mpc.branch = [
\t1\t2\t0.01\t0.02\t0\t0\t0\t0\t0\t0\t1\t-360\t360;
\t3\t2\t0.01\t0.02\t0\t0\t0\t0\t0\t0\t1\t-360\t360;
];
";

    #[test]
    fn imports_and_orients() {
        let c = import_matpower(SCRIPT, "[rpg]\n3 0.1 0.2\n").unwrap();
        assert_eq!(c.buses.len(), 3);
        assert_eq!(c.buses[1].p_load, 0.5);
        assert!((c.buses[0].v_min - 0.81).abs() < 1e-15);
        assert_eq!((c.lines[1].from, c.lines[1].to), (2, 3));
        assert_eq!(c.generators[0].p_max, 2.0);
        assert_eq!(c.generators[0].ramp_p, 0.5);
        assert_eq!(c.rpg_units.len(), 1);
    }

    #[test]
    fn ohm_sidecar_converts_impedances() {
        let c = import_matpower(SCRIPT, "[meta]\nimpedance_units ohm\n").unwrap();
        // z_base = 10^2 / 10 = 10 ohm.
        assert!((c.lines[0].r - 0.001).abs() < 1e-15);
    }

    #[test]
    fn error_cases() {
        let bad = SCRIPT.replace("20\t0;", "20\t30;");
        assert!(matches!(import_matpower(&bad, ""), Err(CaseError::Invalid(_))));
        let empty = SCRIPT.replace("\t1\t4\t2\t10\t-10\t1\t10\t1\t20\t0;\n", "");
        assert!(matches!(import_matpower(&empty, ""), Err(CaseError::NoGenerators)));
        let short = SCRIPT.replace("\t3\t2\t0.01\t0.02\t0\t0\t0\t0\t0\t0\t1\t-360\t360;", "\t3\t2\t0.01;");
        assert!(matches!(import_matpower(&short, ""), Err(CaseError::Dimension { row: 2, .. })));
        let odd = format!("{SCRIPT}mpc.areas = [1 1];\n");
        match import_matpower(&odd, "") {
            Err(CaseError::Unsupported(t)) => assert_eq!(t, "mpc.areas"),
            other => panic!("{other:?}"),
        }
    }
}
