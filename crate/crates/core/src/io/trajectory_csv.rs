use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::integrator::{Sample, Termination, Trajectory};
use crate::model::{AuxState, CoreState};
use crate::params::ModelParams;

pub const TRAJECTORY_HEADER: [&str; 13] = [
    "t",
    "omega",
    "lambda",
    "ell",
    "rho",
    "r_g",
    "b",
    "p",
    "Y",
    "pi",
    "inflation",
    "g_K",
    "termination",
];

fn num(v: f64) -> String {
    // 17 significant digits: every f64 survives a round trip
    format!("{v:.16e}")
}

/// One row per sample; the termination class is repeated on every row.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    if traj.samples.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::csv("<trajectory>", e);
    w.write_record(TRAJECTORY_HEADER).map_err(to_err)?;
    let term = traj.termination.as_str();
    for s in &traj.samples {
        let c = &s.core;
        let row = [
            num(s.t),
            num(c.wage_share),
            num(c.employment),
            num(c.private_debt_ratio),
            num(c.target_rate),
            num(c.policy_rate),
            num(s.aux.gov_debt_ratio),
            num(s.aux.price_level),
            num(s.aux.real_output),
            num(s.derived.profit_share),
            num(s.derived.inflation),
            num(s.derived.capital_growth),
            term.to_string(),
        ];
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io("<trajectory>", e))?;
    Ok(())
}

/// Rebuilds a trajectory from its CSV form. Derived columns are recomputed
/// from the state under `params`; solver statistics are not stored and come
/// back as zero.
pub fn read_trajectory_csv<R: Read>(input: R, params: &ModelParams) -> Result<Trajectory> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let headers = r
        .headers()
        .map_err(|e| Error::csv("<trajectory>", e))?
        .clone();
    if headers.iter().ne(TRAJECTORY_HEADER.iter().copied()) {
        return Err(Error::malformed(
            "trajectory csv (line 1)",
            format!("header must be `{}`", TRAJECTORY_HEADER.join(",")),
        ));
    }
    let mut samples = Vec::new();
    let mut termination: Option<Termination> = None;
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::csv("<trajectory>", e))?;
        let field = |k: usize| -> Result<f64> {
            let raw = rec.get(k).unwrap_or("");
            raw.trim().parse::<f64>().map_err(|_| {
                Error::malformed(
                    format!(
                        "trajectory csv (line {line}, column {})",
                        TRAJECTORY_HEADER[k]
                    ),
                    format!("`{raw}` is not a number"),
                )
            })
        };
        let t = field(0)?;
        let core = CoreState::new(field(1)?, field(2)?, field(3)?, field(4)?, field(5)?);
        let aux = AuxState {
            gov_debt_ratio: field(6)?,
            price_level: field(7)?,
            real_output: field(8)?,
        };
        let raw_term = rec.get(12).unwrap_or("");
        let term = Termination::parse(raw_term).ok_or_else(|| {
            Error::malformed(
                format!("trajectory csv (line {line}, column termination)"),
                format!("unknown termination `{raw_term}`"),
            )
        })?;
        match termination {
            None => termination = Some(term),
            Some(prev) if prev != term => {
                return Err(Error::malformed(
                    format!("trajectory csv (line {line}, column termination)"),
                    "termination differs from earlier rows",
                ))
            }
            _ => {}
        }
        if let Some(prev) = samples.last().map(|s: &Sample| s.t) {
            if t <= prev {
                return Err(Error::malformed(
                    format!("trajectory csv (line {line}, column t)"),
                    "time must be strictly increasing",
                ));
            }
        }
        samples.push(Sample::new(t, core, aux, params));
    }
    let termination = termination.ok_or(Error::EmptyTrajectory)?;
    Ok(Trajectory {
        samples,
        termination,
        accumulated_error: 0.0,
        rejected_steps: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{integrate, SolverSettings};

    fn short_run() -> (Trajectory, ModelParams) {
        let p = ModelParams::with_policy(0.2, 0.0, 0.03, 0.1, 0.2);
        let traj = integrate(
            CoreState::new(0.8, 0.9, 6.0, 0.0, 0.0),
            AuxState::initial(0.4),
            &p,
            &SolverSettings::with_horizon(20.0),
        )
        .unwrap();
        (traj, p)
    }

    #[test]
    fn round_trip_is_exact() {
        let (traj, p) = short_run();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,omega,lambda,ell,rho,r_g,b,p,Y,pi,inflation,g_K,termination\n"));
        assert_eq!(text.lines().count(), traj.samples.len() + 1);
        let back = read_trajectory_csv(buf.as_slice(), &p).unwrap();
        assert_eq!(back.termination, traj.termination);
        assert_eq!(back.samples, traj.samples);
        assert_eq!(back.first().t, 0.0);
    }

    #[test]
    fn rejects_bad_header_and_values() {
        let p = ModelParams::default();
        let err = read_trajectory_csv("t,omega\n0,1\n".as_bytes(), &p).unwrap_err();
        assert!(err.to_string().contains("line 1"));

        let (traj, p) = short_run();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let comma = lines[3].find(',').unwrap();
        lines[3] = format!("abc{}", &lines[3][comma..]);
        let bad = lines.join("\n");
        let err = read_trajectory_csv(bad.as_bytes(), &p).unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");

        let header_only = format!("{}\n", TRAJECTORY_HEADER.join(","));
        assert!(matches!(
            read_trajectory_csv(header_only.as_bytes(), &p),
            Err(Error::EmptyTrajectory)
        ));
    }
}
