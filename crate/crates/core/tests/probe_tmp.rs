use rml_core::grid::{SpaceGrid, TimeGrid};
use rml_core::measure::{Atom, GridMeasure};
use rml_core::nonlinearity::NonlinearitySpec;
use rml_core::pde::solve_truncated;
use rml_core::relax::extract_trace_slices;
use rml_core::measure::TestFunction;

#[test]
fn probe() {
    let sg = SpaceGrid::new(-1.0, 1.0, 799).unwrap();
    let tg = TimeGrid::new(0.25, 1600).unwrap();
    let m = GridMeasure::new(sg, vec![Atom { loc: 0.0, mass: 1.0 }], vec![0.0; 800]).unwrap();
    let g = NonlinearitySpec::power(4.0, 1.0).unwrap();
    let ramp = 8.0 * sg.dx();
    let phi = TestFunction::from_fn(sg, |x| (sg.rho(x) / ramp).min(1.0)).unwrap();
    for k in [1.0, 10.0, 100.0, 1000.0, 10000.0] {
        let gk = g.with_level(k).unwrap();
        let f = solve_truncated(&m, &gk, &sg, &tg).unwrap();
        let tr = extract_trace_slices(&f, &phi).unwrap();
        println!(
            "k={k:>8} values={:?} value={:.6} no_trace={}",
            tr.values.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>(),
            tr.value,
            tr.no_trace
        );
    }
}
