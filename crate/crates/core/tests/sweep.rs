use hetcran::equilibrium::Concept;
use hetcran::experiments::{
    parse_csv, run_sweep, solve_concept, to_csv, CellOutcome, RowKind, SweepSpec, SweepVariable,
};
use hetcran::{NeOptions, Scenario};

fn total(outcome: &CellOutcome<f64>) -> Option<f64> {
    match outcome {
        CellOutcome::Solved { totals, .. } => totals.get(&RowKind::Total).copied(),
        CellOutcome::Failed(_) => None,
    }
}

#[test]
fn single_cell_matches_a_direct_solve() {
    let mut spec = SweepSpec::new(SweepVariable::NRrh, vec![3.0], Scenario::default());
    spec.n_realizations = 1;
    spec.concepts = vec![Concept::EqualPower];
    spec.seed = 17;
    let res = run_sweep(&spec).unwrap();
    let net = hetcran::experiments::realize(&spec.scenario_at(0), spec.cell_seed(0, 0)).unwrap();
    let direct = solve_concept(&net, Concept::EqualPower, &NeOptions::default()).unwrap();
    let row = res.row(0, Concept::EqualPower, RowKind::Total).unwrap();
    assert_eq!(row.mean, direct.total_rate);
    assert_eq!(row.n, 1);
}

#[test]
fn csv_survives_a_round_trip() {
    let mut spec = SweepSpec::new(SweepVariable::PMaxRrh, vec![0.1, 1.0], Scenario::default());
    spec.n_realizations = 3;
    let res = run_sweep(&spec).unwrap();
    let text = to_csv(&res.rows);
    let back = parse_csv::<f64>(&text, "inline").unwrap();
    assert_eq!(back, res.rows);
}

#[test]
fn che_total_beats_ne_total_in_most_cells() {
    let mut spec = SweepSpec::new(
        SweepVariable::NRrh,
        vec![2.0, 4.0, 6.0],
        Scenario::default(),
    );
    spec.concepts = vec![Concept::Ne, Concept::Che];
    let res = run_sweep(&spec).unwrap();
    let (mut wins, mut cells) = (0, 0);
    for v in 0..spec.values.len() {
        for r in 0..spec.n_realizations {
            let pick = |c: Concept| {
                res.cells_of(v, c)
                    .find(|cell| cell.realization == r)
                    .and_then(|cell| total(&cell.outcome))
            };
            if let (Some(ne), Some(che)) = (pick(Concept::Ne), pick(Concept::Che)) {
                cells += 1;
                wins += usize::from(che >= ne);
            }
        }
    }
    assert_eq!(cells, 150);
    assert!(
        wins as f64 >= 0.8 * cells as f64,
        "CHE total >= NE total in only {wins}/{cells} cells"
    );
}
