use std::path::Path;

use dispatch_region::netmodel::{ieee33, import_matpower, parse_case, serialize_case, synthetic_feeder};

fn read(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn shipped_dnet_matches_builtin() {
    let file = parse_case(&read("ieee33.dnet")).unwrap();
    assert_eq!(file, ieee33());
}

#[test]
fn matpower_import_matches_native_topology() {
    let native = parse_case(&read("ieee33.dnet")).unwrap();
    let mp = import_matpower(&read("case33.m"), &read("case33.rpg")).unwrap();
    assert!(mp.validate().is_ok(), "{:?}", mp.validate());
    assert_eq!(mp.buses.len(), native.buses.len());
    assert_eq!(mp.lines.len(), native.lines.len());
    for (a, b) in mp.lines.iter().zip(&native.lines) {
        assert_eq!((a.from, a.to), (b.from, b.to));
        assert!(close(a.r, b.r) && close(a.x, b.x), "line {}-{}: {a:?} vs {b:?}", a.from, a.to);
    }
    for (a, b) in mp.buses.iter().zip(&native.buses) {
        assert_eq!(a.id, b.id);
        assert!(close(a.p_load, b.p_load) && close(a.q_load, b.q_load), "bus {}", a.id);
    }
    let units = |c: &dispatch_region::netmodel::NetworkCase| c.rpg_units.iter().map(|u| u.bus).collect::<Vec<_>>();
    assert_eq!(units(&mp), units(&native));
}

#[test]
fn serialization_round_trips() {
    for case in [ieee33(), synthetic_feeder()] {
        let back = parse_case(&serialize_case(&case)).unwrap();
        assert_eq!(back, case);
    }
}

#[test]
fn synthetic_feeder_is_radial_and_valid() {
    let c = synthetic_feeder();
    assert_eq!(c.buses.len(), 141);
    assert_eq!(c.lines.len(), 140);
    assert_eq!(c.rpg_units.len(), 3);
    assert!(c.validate().is_ok());
}
