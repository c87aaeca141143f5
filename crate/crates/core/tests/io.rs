use nirp_core::equilibrium::solve_interior_equilibrium;
use nirp_core::io::{read_trajectory_csv, render_svg, write_trajectory_csv};
use nirp_core::ledger::audit_trajectory;
use nirp_core::scenario::{preset, run_scenario};

fn polyline_points(svg: &str, id: &str) -> Vec<(f64, f64)> {
    let tag = format!(r#"<polyline id="series-{id}""#);
    let start = svg.find(&tag).expect("series present");
    let rest = &svg[start..];
    let p = rest.find("points=\"").unwrap() + 8;
    let end = rest[p..].find('"').unwrap();
    rest[p..p + end]
        .split_whitespace()
        .map(|xy| {
            let (x, y) = xy.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

fn attr(svg: &str, element_id: &str, name: &str) -> f64 {
    let start = svg
        .find(&format!(r#"id="{element_id}""#))
        .expect("element present");
    let rest = &svg[start..];
    let key = format!(r#"{name}=""#);
    let p = rest.find(&key).unwrap() + key.len();
    let end = rest[p..].find('"').unwrap();
    rest[p..p + end].parse().unwrap()
}

#[test]
fn fig6_chart_shows_negative_policy_rate() {
    let run = run_scenario(&preset("fig6").unwrap()).unwrap();
    let svg = render_svg(&run.trajectory, "fig6").unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let zero_y = attr(&svg, "zero-2-left", "y1");
    let pts = polyline_points(&svg, "policy_rate");
    assert_eq!(pts.len(), run.trajectory.samples.len());
    // screen y grows downwards
    assert!(pts.iter().any(|(_, y)| *y > zero_y + 1.0));
    assert!(pts.iter().any(|(_, y)| *y < zero_y - 1.0));
}

#[test]
fn chart_is_byte_deterministic() {
    let s = preset("fig4").unwrap();
    let a = render_svg(&run_scenario(&s).unwrap().trajectory, "fig4").unwrap();
    let b = render_svg(&run_scenario(&s).unwrap().trajectory, "fig4").unwrap();
    assert_eq!(a, b);
    for legend in [
        "omega",
        "lambda",
        "ell",
        "r_g",
        "rho",
        "inflation",
        "log10 Y",
    ] {
        assert!(a.contains(&format!(">{legend}</text>")), "{legend}");
    }
}

#[test]
fn fig2_csv_ends_at_equilibrium() {
    let s = preset("fig2").unwrap();
    let run = run_scenario(&s).unwrap();
    let mut buf = Vec::new();
    write_trajectory_csv(&run.trajectory, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[0].parse::<f64>().unwrap(), 0.0);
    let last: Vec<&str> = text.lines().last().unwrap().split(',').collect();
    let omega: f64 = last[1].parse().unwrap();
    let eq = solve_interior_equilibrium(&s.params, 0.0).unwrap();
    assert!(
        (omega - eq.omega_bar).abs() < 1e-3,
        "{omega} vs {}",
        eq.omega_bar
    );
    assert_eq!(last[12], "converged_to_equilibrium");
}

#[test]
fn audit_of_written_file_matches_in_memory() {
    for name in ["fig3", "fig5"] {
        let s = preset(name).unwrap();
        let run = run_scenario(&s).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&run.trajectory, &mut buf).unwrap();
        let back = read_trajectory_csv(buf.as_slice(), &s.params).unwrap();
        let audit = audit_trajectory(&back, &s.params).unwrap();
        assert_eq!(audit, run.audit, "{name}");
    }
}
