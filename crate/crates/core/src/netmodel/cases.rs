//! Bundled cases.

use super::{default_mu, parse_case, Bus, Generator, Line, NetworkCase, RpgUnit};

/// Native text of the bundled 33-bus feeder with two RPG units.
pub const IEEE33_TEXT: &str = include_str!("../../../../cases/ieee33.dnet");

pub fn ieee33() -> NetworkCase {
    parse_case(IEEE33_TEXT).expect("bundled 33-bus case parses")
}

/// The 33-bus feeder with a third RPG unit at bus 30.
pub fn ieee33_three_rpg() -> NetworkCase {
    let mut c = ieee33();
    c.name = "ieee33-3rpg".into();
    c.rpg_units.push(RpgUnit { bus: 30, w_forecast: 0.3, w_cap: 0.5, mu: default_mu() });
    c
}

/// Deterministic 141-bus feeder: a 41-bus trunk with twenty five-bus
/// laterals hanging off every other trunk bus, three RPG units and two DGs.
pub fn synthetic_feeder() -> NetworkCase {
    let v_min = 0.81;
    let v_max = 1.1025;
    let mut buses = Vec::with_capacity(141);
    let mut lines = Vec::with_capacity(140);
    // Loads cycle through a fixed pattern so the case needs no RNG.
    let load = |i: u32| 0.015 + 0.01 * f64::from((i * 37) % 7) / 6.0;
    for id in 1..=141u32 {
        let p = if id == 1 { 0.0 } else { load(id) };
        buses.push(Bus { id, p_load: p, q_load: 0.5 * p, v_min, v_max, is_root: id == 1 });
    }
    let line = |from, to, r: f64| Line { from, to, r, x: 0.6 * r, l_max: 120.0, s_max: 10.0 };
    for k in 1..=40u32 {
        lines.push(line(k, k + 1, 0.0004 + 0.0001 * f64::from((k * 3) % 5)));
    }
    for lat in 0..20u32 {
        let anchor = 2 * lat + 2;
        let first = 42 + 5 * lat;
        lines.push(line(anchor, first, 0.002));
        for j in 0..4 {
            lines.push(line(first + j, first + j + 1, 0.0015 + 0.0005 * f64::from(j % 2)));
        }
    }
    let gen = |bus, p_set, p_max, q_set, q_min, q_max| Generator {
        bus,
        p_set,
        q_set,
        p_min: 0.0,
        p_max,
        q_min,
        q_max,
        ramp_p: 0.25 * p_max,
    };
    NetworkCase {
        name: "feeder141".into(),
        base_mva: 1.0,
        base_kv: 10.0,
        v_root: 1.0,
        buses,
        lines,
        generators: vec![
            gen(1, 2.3, 3.0, 2.0, -1.0, 4.0),
            gen(41, 0.3, 0.4, 0.0, -0.2, 0.2),
            gen(91, 0.3, 0.4, 0.0, -0.2, 0.2),
        ],
        rpg_units: vec![
            RpgUnit { bus: 66, w_forecast: 0.4, w_cap: 0.8, mu: default_mu() },
            RpgUnit { bus: 111, w_forecast: 0.5, w_cap: 1.0, mu: default_mu() },
            RpgUnit { bus: 141, w_forecast: 0.3, w_cap: 0.6, mu: default_mu() },
        ],
    }
}

/// Looks up a bundled case by name (`ieee33`, `ieee33-3rpg`, `feeder141`).
pub fn builtin(name: &str) -> Option<NetworkCase> {
    match name {
        "ieee33" => Some(ieee33()),
        "ieee33-3rpg" => Some(ieee33_three_rpg()),
        "feeder141" => Some(synthetic_feeder()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{serialize_case, validate};

    #[test]
    fn bundled_33_bus() {
        let c = ieee33();
        assert_eq!(c.buses.len(), 33);
        assert_eq!(c.lines.len(), 32);
        let rpg: Vec<(u32, f64)> = c.rpg_units.iter().map(|w| (w.bus, w.w_cap)).collect();
        assert_eq!(rpg, vec![(12, 0.5), (26, 0.9)]);
    }

    #[test]
    fn synthetic_feeder_is_valid_and_round_trips() {
        let c = synthetic_feeder();
        assert_eq!(c.buses.len(), 141);
        assert_eq!(c.lines.len(), 140);
        assert!(validate(&c).is_ok(), "{}", validate(&c));
        assert_eq!(parse_case(&serialize_case(&c)).unwrap(), c);
        assert!(validate(&ieee33_three_rpg()).is_ok());
    }
}
