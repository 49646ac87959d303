//! Trajectory CSV files.
//!
//! Format: a header `traj_id,t,y1,...,y{n_y}` followed by one row per
//! measurement, sorted by `(traj_id, t)`, with `t = step·dt` in seconds.
//! Values are written with 17 significant digits so a write/read cycle is
//! lossless. Input must already be aligned on a common time grid starting
//! at `t = 0`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::trajectory::{SampleSet, Trajectory};

/// Scientific notation with 17 significant digits (round-trip exact).
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectories_csv<W: Write>(set: &SampleSet, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    write!(w, "traj_id,t")?;
    for k in 1..=set.output_dim() {
        write!(w, ",y{k}")?;
    }
    writeln!(w)?;
    for (id, traj) in set.iter().enumerate() {
        for (step, row) in traj.rows().enumerate() {
            write!(w, "{id},{}", format_float(step as f64 * traj.dt()))?;
            for v in row {
                write!(w, ",{}", format_float(*v))?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_trajectories_csv(set: &SampleSet, path: &Path) -> Result<()> {
    write_trajectories_csv(set, File::create(path)?)
}

pub fn load_trajectories_csv(path: &Path) -> Result<SampleSet> {
    let file = File::open(path)?;
    let mut set = parse_trajectories_csv(BufReader::new(file))?;
    set.label = path.display().to_string();
    Ok(set)
}

struct Pending {
    id: String,
    times: Vec<f64>,
    values: Vec<f64>,
    first_line: u64,
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Parses the trajectory CSV format from any reader.
pub fn parse_trajectories_csv<R: Read>(input: R) -> Result<SampleSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 3 || names[0] != "traj_id" || names[1] != "t" {
        return Err(Error::Csv {
            line: 1,
            message: format!("expected header traj_id,t,y1,... but found {:?}", names.join(",")),
        });
    }
    for (k, name) in names[2..].iter().enumerate() {
        if *name != format!("y{}", k + 1) {
            return Err(Error::Csv {
                line: 1,
                message: format!("column {}: expected y{} but found {name:?}", k + 3, k + 1),
            });
        }
    }
    let ny = names.len() - 2;

    let mut order: Vec<Pending> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = line_of(&record);
        let parse = |col: usize| -> Result<f64> {
            let cell = &record[col];
            let v: f64 = cell.parse().map_err(|_| Error::Csv {
                line,
                message: format!("column {} ({}): not a number: {cell:?}", col + 1, names[col]),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Csv {
                    line,
                    message: format!("column {} ({}): non-finite value", col + 1, names[col]),
                })
            }
        };
        let id = record[0].to_string();
        let t = parse(1)?;
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            order.push(Pending {
                id,
                times: Vec::new(),
                values: Vec::new(),
                first_line: line,
            });
            order.len() - 1
        });
        let p = &mut order[slot];
        p.times.push(t);
        for col in 2..2 + ny {
            p.values.push(parse(col)?);
        }
    }
    if order.is_empty() {
        return Err(Error::Csv {
            line: 1,
            message: "no trajectory rows".into(),
        });
    }

    let steps = order[0].times.len();
    if let Some(bad) = order.iter().find(|p| p.times.len() != steps) {
        return Err(Error::RaggedTrajectory {
            id: bad.id.clone(),
            message: format!("{} rows, but trajectory {} has {steps}", bad.times.len(), order[0].id),
        });
    }
    let dt = if steps > 1 {
        order[0].times[1] - order[0].times[0]
    } else {
        1.0
    };
    if !(dt > 0.0) {
        return Err(Error::RaggedTrajectory {
            id: order[0].id.clone(),
            message: "time column must be strictly increasing".into(),
        });
    }
    let mut trajectories = Vec::with_capacity(order.len());
    for p in order {
        for (step, &t) in p.times.iter().enumerate() {
            let expect = step as f64 * dt;
            if (t - expect).abs() > 1e-9 * expect.abs().max(dt) {
                return Err(Error::RaggedTrajectory {
                    id: p.id.clone(),
                    message: format!(
                        "row {} (from line {}): t = {t} is off the grid t = step·{dt}",
                        step + 1,
                        p.first_line
                    ),
                });
            }
        }
        trajectories.push(Trajectory::new(p.values, steps, ny, dt)?);
    }
    SampleSet::new(trajectories, "")
}
