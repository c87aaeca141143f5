use nirp_core::integrator::Termination;
use nirp_core::scenario::{
    preset, run_cell, run_scenario, sweep, AxisValues, ScenarioRef, SweepAxis, SweepSpec,
    PRESET_NAMES,
};

#[test]
fn every_preset_meets_its_expected_outcome() {
    for name in PRESET_NAMES {
        let run = run_scenario(&preset(name).unwrap()).unwrap();
        let outcome = run.outcome.as_ref().unwrap();
        assert!(
            run.audit.pass,
            "{name}: audit failed {:?}",
            run.audit.failing().collect::<Vec<_>>()
        );
        assert!(outcome.pass, "{name}: {outcome:?}");
    }
}

#[test]
fn debt_sweep_without_policy_separates_regimes() {
    let spec = SweepSpec {
        base: ScenarioRef::Preset("fig2".into()),
        axes: vec![SweepAxis {
            name: "initial.core.private_debt_ratio".into(),
            values: AxisValues::List {
                values: vec![0.6, 6.0],
            },
        }],
    };
    let base = spec.base.resolve().unwrap();
    let grid = sweep(&spec, &base).unwrap();
    let classes: Vec<_> = grid.cells.iter().map(|c| c.termination).collect();
    assert_eq!(
        classes,
        vec![
            Some(Termination::ConvergedToEquilibrium),
            Some(Termination::DebtBlowup)
        ]
    );
}

#[test]
fn debt_sweep_with_policy_stays_bounded() {
    let spec = SweepSpec {
        base: ScenarioRef::Preset("fig5".into()),
        axes: vec![SweepAxis {
            name: "initial.core.private_debt_ratio".into(),
            values: AxisValues::List {
                values: vec![0.6, 6.0, 8.0],
            },
        }],
    };
    let base = spec.base.resolve().unwrap();
    let grid = sweep(&spec, &base).unwrap();
    for c in &grid.cells {
        assert_eq!(
            c.termination,
            Some(Termination::ConvergedToEquilibrium),
            "{c:?}"
        );
    }
    // deeper initial debt pushes the policy rate further below zero
    assert!(grid.cells[0].min_policy_rate > grid.cells[1].min_policy_rate);
    assert!(grid.cells[1].min_policy_rate > grid.cells[2].min_policy_rate);
}

#[test]
fn single_cell_sweep_matches_direct_run() {
    let spec = SweepSpec {
        base: ScenarioRef::Preset("fig4".into()),
        axes: vec![SweepAxis {
            name: "initial.core.private_debt_ratio".into(),
            values: AxisValues::List { values: vec![0.6] },
        }],
    };
    let base = spec.base.resolve().unwrap();
    let grid = sweep(&spec, &base).unwrap();
    let direct = run_scenario(&base).unwrap();
    let cell = &grid.cells[0];
    let last = direct.trajectory.last();
    assert_eq!(cell.termination, Some(direct.trajectory.termination));
    assert_eq!(cell.final_core, Some(last.core));
    assert_eq!(cell.final_aux, Some(last.aux));
    assert_eq!(cell.t_end, last.t);
}

#[test]
fn cell_results_do_not_depend_on_evaluation_order() {
    let spec: SweepSpec = serde_json::from_str(
        r#"{"base": "fig4", "axes": [
            {"name": "initial.core.private_debt_ratio", "values": [0.6, 3.0]},
            {"name": "params.rate_adjust_speed", "min": 0.05, "max": 0.15, "steps": 3}
        ]}"#,
    )
    .unwrap();
    let base = spec.base.resolve().unwrap();
    let grid = sweep(&spec, &base).unwrap();
    let coords = spec.cells().unwrap();
    let reversed: Vec<_> = (0..coords.len())
        .rev()
        .map(|i| run_cell(&base, &spec.axes, i, &coords[i]))
        .collect();
    for cell in reversed {
        assert_eq!(grid.cells[cell.index], cell);
    }
    let csv = grid.to_csv();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv
        .starts_with("index,initial.core.private_debt_ratio,params.rate_adjust_speed,termination"));
}
