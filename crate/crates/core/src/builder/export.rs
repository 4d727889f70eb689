//! Text dump of a linear system for debugging and cross-implementation diffs.

use std::fmt::Write as _;

use super::LinearSystem;

/// Matrix Market coordinate dump of `[B C]`, the rhs as a dense array, and
/// one name per column and tag per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemDump {
    pub matrix: String,
    pub rhs: String,
    pub columns: String,
    pub rows: String,
}

pub fn export_system(sys: &LinearSystem) -> SystemDump {
    let ny = sys.num_y();
    let (m, n) = (sys.num_rows(), ny + sys.num_dw());
    let mut entries = sys.b_mat.triplets();
    entries.extend(sys.c_mat.triplets().into_iter().map(|(i, j, v)| (i, j + ny, v)));
    entries.sort_by_key(|&(i, j, _)| (j, i));
    let mut matrix = String::from("%%MatrixMarket matrix coordinate real general\n% columns: y then dw\n");
    let _ = writeln!(matrix, "{m} {n} {}", entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(matrix, "{} {} {v:e}", i + 1, j + 1);
    }
    let mut rhs = String::from("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(rhs, "{m} 1");
    for b in &sys.rhs {
        let _ = writeln!(rhs, "{b:e}");
    }
    let mut columns = String::from("column,name\n");
    for j in 0..ny {
        let _ = writeln!(columns, "{},{}", j + 1, sys.vars.name(j));
    }
    for (d, name) in sys.vars.dw_names.iter().enumerate() {
        let _ = writeln!(columns, "{},{name}", ny + d + 1);
    }
    let mut rows = String::from("row,tag,paired\n");
    for i in 0..m {
        let paired = sys.eq_first[i] || (i > 0 && sys.eq_first[i - 1]);
        let _ = writeln!(rows, "{},{},{}", i + 1, sys.tags[i], u8::from(paired));
    }
    SystemDump { matrix, rhs, columns, rows }
}

#[cfg(test)]
mod tests {
    use super::super::{build_la, tests::toy};
    use super::*;

    #[test]
    fn dump_shapes() {
        let sys = build_la(&toy(0.1)).unwrap();
        let d = export_system(&sys);
        let header = d.matrix.lines().nth(2).unwrap();
        assert_eq!(header, format!("{} {} {}", sys.num_rows(), sys.num_y() + 1, sys.b_mat.nnz() + sys.c_mat.nnz()));
        assert_eq!(d.columns.lines().count(), sys.num_y() + 2);
        assert_eq!(d.rows.lines().count(), sys.num_rows() + 1);
        assert!(d.columns.ends_with("dw[u0@2]\n"));
    }
}
