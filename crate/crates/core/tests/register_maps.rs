use ddrf_core::register::{evaluate_gate, fidelity_map, Channels};
use ddrf_core::sweep::linspace;
use ddrf_core::SpinTable;

fn grid() -> (Vec<u32>, Vec<f64>) {
    let pulses = (0..21).map(|k| 4 + 12 * k).collect();
    (pulses, linspace(4e-6, 60e-6, 21))
}

#[test]
fn c4_needs_long_gates() {
    let table = SpinTable::builtin();
    let cfg = table.register_config(None).unwrap();
    let (f, c) = (table.field().unwrap(), table.constants());
    let (pulses, taus) = grid();
    let map = fidelity_map(&cfg, "C4", &pulses, &taus, &f, &c, Channels::UNITARY).unwrap().map;
    let (mut short, mut long) = (Vec::new(), Vec::new());
    for (i, &n) in pulses.iter().enumerate() {
        for (j, &tau) in taus.iter().enumerate() {
            let v = map.value("fidelity", i, j).unwrap();
            if 2.0 * n as f64 * tau < 1.38e-3 {
                short.push(v)
            } else {
                long.push(v)
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&short) < mean(&long), "short {} long {}", mean(&short), mean(&long));
}

#[test]
fn c1_best_point_budget() {
    let table = SpinTable::builtin();
    let cfg = table.register_config(None).unwrap();
    let (f, c) = (table.field().unwrap(), table.constants());
    let (pulses, taus) = grid();
    let (n, tau, full) = fidelity_map(&cfg, "C1", &pulses, &taus, &f, &c, Channels::FULL).unwrap().best.unwrap();
    let target = cfg.target_index("C1").unwrap();
    let unitary = evaluate_gate(&cfg, target, n, tau, &f, &c, Channels::UNITARY).unwrap();
    assert!(unitary.fidelity > 0.99, "unitary {}", unitary.fidelity);
    assert!(full.lambda_t2 * full.lambda_bath > 0.99, "λ {} {}", full.lambda_t2, full.lambda_bath);
    assert!(full.fidelity <= unitary.fidelity + 1e-9);
}

#[test]
fn register_dimension_and_spin_roles() {
    let table = SpinTable::builtin();
    let cfg = table.register_config(None).unwrap();
    let (f, c) = (table.field().unwrap(), table.constants());
    let gate = ddrf_core::register::register_gate_unitary(&cfg, "C4", 40, 20e-6, &f, &c).unwrap();
    assert_eq!(gate.dimension(), 64);
    assert_eq!(gate.labels, ["C0", "C1", "C4", "C6", "C8"]);
    assert_eq!(gate.idler_phases[gate.target], 0.0);
}
