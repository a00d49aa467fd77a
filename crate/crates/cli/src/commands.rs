use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use ghrelax::instances::{
    circle_net, covering_error_transfer, er_graph_metric, hemisphere_net, isometric_copy,
    unit_cube_cloud, EpsNet,
};
use ghrelax::io::read_space;
use ghrelax::metric::{normalize_pair, normalized_distortion_gap, RHO_WORK_LIMIT};
use ghrelax::relaxation::{build_blocks, safe_c_threshold};
use ghrelax::solver::{auto_c, brute_force_bijective, brute_force_dgh, estimate_dgh, CChoice, SolverConfig};
use ghrelax::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::{Command, Kind};

/// Largest `n + m` for which diagnose runs the exact eigendecomposition.
const EXACT_NCONV_SIZE: usize = 20;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Compute {
            file_a,
            file_b,
            solver,
        } => {
            let a = read_space(&file_a, solver.strict_metric)?;
            let b = read_space(&file_b, solver.strict_metric)?;
            let report = estimate_dgh(&a, &b, &solver.config(CChoice::Auto))?;
            for note in &report.notes {
                eprintln!("note: {note}");
            }
            if let Some(traces) = &report.traces {
                eprintln!("{}", to_json(traces)?);
            }
            print_json(&report.to_json())
        }
        Command::Synthetic {
            kind,
            n,
            trials,
            c_grid,
            p,
            budget,
            seed,
            gap_tol,
            parallel,
            run_cap,
        } => {
            let base = SolverConfig {
                iteration_budget: budget,
                gap_tolerance: gap_tol,
                parallel_runs: parallel,
                run_iteration_cap: run_cap.0,
                ..SolverConfig::default()
            };
            base.validate()?;
            synthetic(kind, n, trials, &c_grid, p, seed, &base)
        }
        Command::Spheres {
            delta,
            circle_points,
            ring_fraction,
            azimuth_fraction,
            write_points,
            solver,
        } => {
            let circle = circle_net(circle_points)?;
            let hemisphere = hemisphere_net(delta, ring_fraction, azimuth_fraction)?;
            if let Some(dir) = write_points {
                write_net(&circle, &dir.join("circle.csv"))?;
                write_net(&hemisphere, &dir.join("hemisphere.csv"))?;
            }
            let report = estimate_dgh(
                &circle.space,
                &hemisphere.space,
                &solver.config(CChoice::Fixed(1e12)),
            )?;
            if let Some(traces) = &report.traces {
                eprintln!("{}", to_json(traces)?);
            }
            let continuum = covering_error_transfer(
                report.dgh_upper,
                circle.certified_eps,
                hemisphere.certified_eps,
            )?;
            print_json(&json!({
                "net_dgh_upper": report.dgh_upper,
                "certified_eps_circle": circle.certified_eps,
                "certified_eps_hemisphere": hemisphere.certified_eps,
                "continuum_upper_bound": continuum,
                "point_counts": {"circle": circle.len(), "hemisphere": hemisphere.len()},
                "c": report.c_used,
                "iterations": report.iterations_used,
                "restarts": report.restarts_completed,
                "seconds": report.wall_time,
            }))
        }
        Command::Oracle {
            file_a,
            file_b,
            strict_metric,
        } => {
            let a = read_space(&file_a, strict_metric)?;
            let b = read_space(&file_b, strict_metric)?;
            let (dgh, pair) = brute_force_dgh(&a, &b)?;
            let bijective = brute_force_bijective(&a, &b)?.map(|(value, _)| value);
            print_json(&json!({
                "dgh_exact": dgh,
                "f": pair.f,
                "g": pair.g,
                "bijective_min": bijective,
            }))
        }
        Command::Diagnose {
            file_a,
            file_b,
            c,
            strict_metric,
        } => {
            let a = read_space(&file_a, strict_metric)?;
            let b = read_space(&file_b, strict_metric)?;
            diagnose(&a, &b, c)
        }
    }
}

fn diagnose(a: &ghrelax::MetricSpace, b: &ghrelax::MetricSpace, c: CChoice) -> Result<()> {
    let (big, small) = if a.size() < b.size() { (b, a) } else { (a, b) };
    let (x, y, _) = normalize_pair(big, small)?;
    let mut notes = Vec::new();
    let rho = match normalized_distortion_gap(big, small, RHO_WORK_LIMIT) {
        Ok(r) => Some(r),
        Err(e @ Error::WorkLimitExceeded { .. }) => {
            notes.push(e.to_string());
            None
        }
        Err(e) => return Err(e),
    };
    let threshold = rho
        .map(|r| safe_c_threshold(x.size(), y.size(), r))
        .transpose()?;
    let c = match c {
        CChoice::Fixed(c) => c,
        CChoice::Auto => auto_c(threshold),
    };
    let blocks = build_blocks(&x, &y, c)?;
    let bound = blocks.nconv_bound();
    let exact = if x.size() + y.size() <= EXACT_NCONV_SIZE {
        blocks.hessian_nconv_exact_with_limit(EXACT_NCONV_SIZE * EXACT_NCONV_SIZE)?.exact_nconv
    } else {
        None
    };
    // JSON has no infinity; a single difference value means any c works
    let rho_json = rho.filter(|r| r.is_finite());
    print_json(&json!({
        "rho": rho_json,
        "safe_c_threshold": threshold.map(|t| t.value),
        "threshold_capped": threshold.map(|t| t.capped),
        "c": c,
        "nconv_alpha": bound.alpha_bound,
        "exact_nconv": exact,
        "notes": notes,
    }))
}

fn synthetic(
    kind: Kind,
    n: usize,
    trials: usize,
    c_grid: &[CChoice],
    p: f64,
    seed: u64,
    base: &SolverConfig,
) -> Result<()> {
    let stdout = io::stdout();
    let mut out = csv::Writer::from_writer(stdout.lock());
    let mut recovered = vec![0usize; c_grid.len()];
    write_row(&mut out, ["kind", "c", "trial", "recovered", "seconds"])?;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let space = match kind {
            Kind::Cloud => unit_cube_cloud(n, &mut rng)?,
            Kind::Graph => er_graph_metric(n, p, &mut rng)?,
        };
        let (copy, _) = isometric_copy(&space, &mut rng);
        for (k, &c) in c_grid.iter().enumerate() {
            let config = SolverConfig {
                c,
                seed: seed.wrapping_add(trial as u64),
                ..base.clone()
            };
            let started = Instant::now();
            let report = estimate_dgh(&space, &copy, &config)?;
            let seconds = started.elapsed().as_secs_f64();
            let ok = report.exact && report.dgh_upper == 0.0;
            recovered[k] += ok as usize;
            write_row(
                &mut out,
                [
                    kind.name().to_string(),
                    c_label(c),
                    trial.to_string(),
                    ok.to_string(),
                    seconds.to_string(),
                ],
            )?;
        }
    }
    out.flush()?;
    for (c, hits) in c_grid.iter().zip(&recovered) {
        let rate = if trials == 0 { 0.0 } else { *hits as f64 / trials as f64 };
        eprintln!("c={}: recovered {hits}/{trials} ({:.1}%)", c_label(*c), 100.0 * rate);
    }
    Ok(())
}

fn c_label(c: CChoice) -> String {
    match c {
        CChoice::Auto => "auto".into(),
        CChoice::Fixed(c) => c.to_string(),
    }
}

fn write_row<W: Write, I, T>(out: &mut csv::Writer<W>, row: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    out.write_record(row).map_err(|e| Error::Io(e.to_string()))
}

fn write_net(net: &EpsNet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    net.write_points_csv(BufWriter::new(file))
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::Io(e.to_string()))
}

fn print_json<T: Serialize + ?Sized>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    let mut out = io::stdout().lock();
    writeln!(out, "{text}")?;
    Ok(())
}
