//! CPLEX LP text output, for inspecting models in other tools.

use std::fmt::Write as _;

use crate::lp::{Direction, LpProblem, RowSense};

fn term(out: &mut String, first: &mut bool, coef: f64, name: &str) {
    if *first {
        let _ = write!(out, "{coef} {name}");
        *first = false;
    } else if coef < 0.0 {
        let _ = write!(out, " - {} {name}", -coef);
    } else {
        let _ = write!(out, " + {coef} {name}");
    }
}

/// Renders `p` in LP format. `names` gives variable names; `x{j}` is used when absent.
/// Variables flagged in `integer` go in a `General` section.
pub fn write_lp(p: &LpProblem, names: Option<&[String]>, integer: Option<&[bool]>) -> String {
    let name = |j: usize| -> String {
        names
            .and_then(|n| n.get(j).cloned())
            .unwrap_or_else(|| format!("x{j}"))
    };
    let mut out = String::new();
    out.push_str(match p.direction {
        Direction::Minimize => "Minimize\n obj: ",
        Direction::Maximize => "Maximize\n obj: ",
    });
    let mut first = true;
    for (j, &c) in p.objective.iter().enumerate() {
        if c != 0.0 {
            term(&mut out, &mut first, c, &name(j));
        }
    }
    if first {
        out.push('0');
    }
    out.push_str("\nSubject To\n");
    for (i, row) in p.matrix.to_rows().iter().enumerate() {
        let _ = write!(out, " c{i}: ");
        let mut first = true;
        for &(j, v) in row {
            term(&mut out, &mut first, v, &name(j));
        }
        if first {
            let _ = write!(out, "0 {}", name(0));
        }
        let op = match p.senses[i] {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", p.rhs[i]);
    }
    out.push_str("Bounds\n");
    for j in 0..p.num_vars() {
        let (l, u) = (p.lower[j], p.upper[j]);
        let n = name(j);
        match (l.is_finite(), u.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {n} free");
            }
            (true, false) => {
                let _ = writeln!(out, " {n} >= {l}");
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {n} <= {u}");
            }
            (true, true) => {
                let _ = writeln!(out, " {l} <= {n} <= {u}");
            }
        }
    }
    if let Some(int) = integer {
        let ints: Vec<String> = (0..p.num_vars()).filter(|&j| int.get(j) == Some(&true)).map(name).collect();
        if !ints.is_empty() {
            out.push_str("General\n ");
            out.push_str(&ints.join(" "));
            out.push('\n');
        }
    }
    out.push_str("End\n");
    out
}
