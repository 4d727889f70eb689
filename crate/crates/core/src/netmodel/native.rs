//! Native line-oriented case format.
//!
//! ```text
//! # comment
//! [meta]
//! name    ieee33
//! base_mva 1
//! base_kv 10
//! v_root  1
//! [bus]
//! # id  p_load  q_load  v_min  v_max  [root]
//! [line]
//! # from  to  r  x  l_max  s_max
//! [gen]
//! # bus  p_set  q_set  p_min  p_max  q_min  q_max  [ramp_p]
//! [rpg]
//! # bus  w_forecast  w_cap  [mu]
//! ```
//!
//! Values are per-unit; voltage bounds and `v_root` are squared magnitudes.
//! `[bus]`, `[line]` and `[gen]` are required, `[meta]` and `[rpg]` optional.
//! A missing `ramp_p` defaults to a quarter of `p_max`, a missing `mu` to the
//! ratio for power factor 0.95.

use std::collections::HashSet;
use std::fmt::Write as _;

use super::{
    default_mu, first_cycle, validate, Bus, CaseError, Generator, Line, NetworkCase, RpgUnit, DEFAULT_RAMP_FRACTION,
};

pub(crate) struct Token<'a> {
    pub col: usize,
    pub text: &'a str,
}

pub(crate) struct Record<'a> {
    pub line: usize,
    pub tokens: Vec<Token<'a>>,
}

pub(crate) struct Section<'a> {
    pub name: String,
    pub records: Vec<Record<'a>>,
}

pub(crate) fn sections(text: &str) -> Result<Vec<Section<'_>>, CaseError> {
    let mut out: Vec<Section> = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        let trimmed = body.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let col = raw.find('[').unwrap() + 1;
            let Some(name) = rest.strip_suffix(']') else {
                return Err(CaseError::Syntax { line, column: col, message: "unterminated section header".into() });
            };
            let name = name.trim().to_string();
            if !matches!(name.as_str(), "meta" | "bus" | "line" | "gen" | "rpg") {
                return Err(CaseError::Syntax { line, column: col + 1, message: format!("unknown section [{name}]") });
            }
            if !seen.insert(name.clone()) {
                return Err(CaseError::Duplicate { what: "section", id: name, line });
            }
            out.push(Section { name, records: Vec::new() });
            continue;
        }
        let Some(sec) = out.last_mut() else {
            let col = raw.len() - raw.trim_start().len() + 1;
            return Err(CaseError::Syntax { line, column: col, message: "record before any section header".into() });
        };
        let mut tokens = Vec::new();
        let mut start = None;
        for (c, ch) in body.char_indices().chain(std::iter::once((body.len(), ' '))) {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(c),
                (true, Some(s)) => {
                    tokens.push(Token { col: s + 1, text: &body[s..c] });
                    start = None;
                }
                _ => {}
            }
        }
        sec.records.push(Record { line, tokens });
    }
    Ok(out)
}

pub(crate) fn num(rec: &Record, k: usize) -> Result<f64, CaseError> {
    let t = rec.tokens.get(k).ok_or_else(|| CaseError::Syntax {
        line: rec.line,
        column: rec.tokens.last().map_or(1, |t| t.col + t.text.len()),
        message: format!("expected at least {} fields", k + 1),
    })?;
    let v: f64 = t.text.parse().map_err(|_| CaseError::Syntax {
        line: rec.line,
        column: t.col,
        message: format!("invalid number '{}'", t.text),
    })?;
    if !v.is_finite() {
        return Err(CaseError::Syntax { line: rec.line, column: t.col, message: "non-finite number".into() });
    }
    Ok(v)
}

pub(crate) fn id(rec: &Record, k: usize) -> Result<u32, CaseError> {
    let v = num(rec, k)?;
    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        let t = &rec.tokens[k];
        return Err(CaseError::Syntax { line: rec.line, column: t.col, message: format!("invalid id '{}'", t.text) });
    }
    Ok(v as u32)
}

pub(crate) fn at_most(rec: &Record, n: usize) -> Result<(), CaseError> {
    if let Some(t) = rec.tokens.get(n) {
        return Err(CaseError::Syntax { line: rec.line, column: t.col, message: format!("unexpected field '{}'", t.text) });
    }
    Ok(())
}

pub(crate) fn parse_rpg(rec: &Record) -> Result<RpgUnit, CaseError> {
    at_most(rec, 4)?;
    Ok(RpgUnit {
        bus: id(rec, 0)?,
        w_forecast: num(rec, 1)?,
        w_cap: num(rec, 2)?,
        mu: if rec.tokens.len() > 3 { num(rec, 3)? } else { default_mu() },
    })
}

/// Parses a native case document and checks it for structural validity.
pub fn parse_case(text: &str) -> Result<NetworkCase, CaseError> {
    let secs = sections(text)?;
    let find = |n: &str| secs.iter().find(|s| s.name == n);
    let mut case = NetworkCase {
        name: String::new(),
        base_mva: 1.0,
        base_kv: 10.0,
        v_root: 1.0,
        buses: Vec::new(),
        lines: Vec::new(),
        generators: Vec::new(),
        rpg_units: Vec::new(),
    };
    if let Some(meta) = find("meta") {
        let mut keys = HashSet::new();
        for rec in &meta.records {
            let key = rec.tokens[0].text;
            if !keys.insert(key) {
                return Err(CaseError::Duplicate { what: "meta key", id: key.into(), line: rec.line });
            }
            match key {
                "name" => {
                    if rec.tokens.len() < 2 {
                        return Err(CaseError::Syntax {
                            line: rec.line,
                            column: rec.tokens[0].col,
                            message: "name needs a value".into(),
                        });
                    }
                    case.name = rec.tokens[1..].iter().map(|t| t.text).collect::<Vec<_>>().join(" ");
                }
                "base_mva" | "base_kv" | "v_root" => {
                    at_most(rec, 2)?;
                    let v = num(rec, 1)?;
                    match key {
                        "base_mva" => case.base_mva = v,
                        "base_kv" => case.base_kv = v,
                        _ => case.v_root = v,
                    }
                }
                other => {
                    return Err(CaseError::Syntax {
                        line: rec.line,
                        column: rec.tokens[0].col,
                        message: format!("unknown meta key '{other}'"),
                    })
                }
            }
        }
    }
    let bus = find("bus").ok_or(CaseError::MissingSection("bus"))?;
    let mut ids = HashSet::new();
    for rec in &bus.records {
        at_most(rec, 6)?;
        let is_root = match rec.tokens.get(5) {
            None => false,
            Some(t) if t.text == "root" => true,
            Some(t) => {
                return Err(CaseError::Syntax { line: rec.line, column: t.col, message: format!("expected 'root', found '{}'", t.text) })
            }
        };
        let b = Bus {
            id: id(rec, 0)?,
            p_load: num(rec, 1)?,
            q_load: num(rec, 2)?,
            v_min: num(rec, 3)?,
            v_max: num(rec, 4)?,
            is_root,
        };
        if !ids.insert(b.id) {
            return Err(CaseError::Duplicate { what: "bus", id: b.id.to_string(), line: rec.line });
        }
        case.buses.push(b);
    }
    let line_sec = find("line").ok_or(CaseError::MissingSection("line"))?;
    let mut line_at = Vec::new();
    for rec in &line_sec.records {
        at_most(rec, 6)?;
        case.lines.push(Line {
            from: id(rec, 0)?,
            to: id(rec, 1)?,
            r: num(rec, 2)?,
            x: num(rec, 3)?,
            l_max: num(rec, 4)?,
            s_max: num(rec, 5)?,
        });
        line_at.push(rec.line);
    }
    let gen = find("gen").ok_or(CaseError::MissingSection("gen"))?;
    for rec in &gen.records {
        at_most(rec, 8)?;
        let p_max = num(rec, 4)?;
        case.generators.push(Generator {
            bus: id(rec, 0)?,
            p_set: num(rec, 1)?,
            q_set: num(rec, 2)?,
            p_min: num(rec, 3)?,
            p_max,
            q_min: num(rec, 5)?,
            q_max: num(rec, 6)?,
            ramp_p: if rec.tokens.len() > 7 { num(rec, 7)? } else { DEFAULT_RAMP_FRACTION * p_max },
        });
    }
    if let Some(rpg) = find("rpg") {
        for rec in &rpg.records {
            case.rpg_units.push(parse_rpg(rec)?);
        }
    }

    let idx = case.bus_index();
    if let Some(k) = first_cycle(&case, &idx) {
        let l = &case.lines[k];
        return Err(CaseError::Topology {
            line: line_at[k],
            message: format!("line {}-{} closes a cycle; the network must be radial", l.from, l.to),
        });
    }
    let report = validate(&case);
    if !report.is_ok() {
        return Err(CaseError::Invalid(report));
    }
    Ok(case)
}

/// Writes `case` in the native format; `parse_case` returns it unchanged.
pub fn serialize_case(case: &NetworkCase) -> String {
    let mut s = String::new();
    s.push_str("[meta]\n");
    if !case.name.is_empty() {
        let _ = writeln!(s, "name {}", case.name);
    }
    let _ = writeln!(s, "base_mva {}\nbase_kv {}\nv_root {}", case.base_mva, case.base_kv, case.v_root);
    s.push_str("\n[bus]\n# id p_load q_load v_min v_max\n");
    for b in &case.buses {
        let _ = write!(s, "{} {} {} {} {}", b.id, b.p_load, b.q_load, b.v_min, b.v_max);
        s.push_str(if b.is_root { " root\n" } else { "\n" });
    }
    s.push_str("\n[line]\n# from to r x l_max s_max\n");
    for l in &case.lines {
        let _ = writeln!(s, "{} {} {} {} {} {}", l.from, l.to, l.r, l.x, l.l_max, l.s_max);
    }
    s.push_str("\n[gen]\n# bus p_set q_set p_min p_max q_min q_max ramp_p\n");
    for g in &case.generators {
        let _ = writeln!(s, "{} {} {} {} {} {} {} {}", g.bus, g.p_set, g.q_set, g.p_min, g.p_max, g.q_min, g.q_max, g.ramp_p);
    }
    if !case.rpg_units.is_empty() {
        s.push_str("\n[rpg]\n# bus w_forecast w_cap mu\n");
        for w in &case.rpg_units {
            let _ = writeln!(s, "{} {} {} {}", w.bus, w.w_forecast, w.w_cap, w.mu);
        }
    }
    s
}
