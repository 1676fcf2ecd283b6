//! CSV persistence for topologies and population grids.
//!
//! Topology files start with `#` lines carrying the bounds, seed and
//! provenance, followed by `link_id,tx_x,tx_y,rx_x,rx_y,coord_range,beta`.
//! Floats are written in shortest round-trip form, so a save/load cycle is
//! exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{LinkSpec, PopulationCell, PopulationGrid, Rect, Topology};
use crate::error::TopologyError;
use crate::geo::Position;

const TOPOLOGY_HEADER: [&str; 7] = [
    "link_id",
    "tx_x",
    "tx_y",
    "rx_x",
    "rx_y",
    "coord_range",
    "beta",
];
const GRID_HEADER: [&str; 3] = ["cell_x", "cell_y", "population"];

fn io_err(path: &Path, source: std::io::Error) -> TopologyError {
    TopologyError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `t` in the topology file format.
pub fn write_topology<W: Write>(t: &Topology, out: W) -> Result<(), TopologyError> {
    let mut out = out;
    let b = &t.bounds;
    let meta = format!(
        "# bounds={},{},{},{}\n# seed={}\n# provenance={}\n",
        b.min_x,
        b.min_y,
        b.max_x,
        b.max_y,
        t.seed,
        t.provenance.replace('\n', " ")
    );
    out.write_all(meta.as_bytes())
        .map_err(|e| TopologyError::Csv(e.into()))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(TOPOLOGY_HEADER)?;
    for l in &t.links {
        let s = l.spec();
        w.write_record([
            s.link_id.to_string(),
            s.transmitter.x.to_string(),
            s.transmitter.y.to_string(),
            s.receiver.x.to_string(),
            s.receiver.y.to_string(),
            s.coordination_range.to_string(),
            s.beta.to_string(),
        ])?;
    }
    w.flush().map_err(|e| TopologyError::Csv(e.into()))?;
    Ok(())
}

pub fn save_topology(t: &Topology, path: &Path) -> Result<(), TopologyError> {
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    write_topology(t, std::io::BufWriter::new(f))
}

struct Meta {
    bounds: Option<Rect>,
    seed: u64,
    provenance: String,
}

fn parse_meta(text: &str) -> Result<(Meta, usize), TopologyError> {
    let mut meta = Meta {
        bounds: None,
        seed: 0,
        provenance: String::new(),
    };
    let mut n = 0;
    for line in text.lines() {
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        n += 1;
        let parse_err = |message: String| TopologyError::Parse {
            line: n as u64,
            message,
        };
        let rest = rest.trim();
        if let Some(v) = rest.strip_prefix("bounds=") {
            let vals: Vec<f64> = v
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| parse_err(format!("bad bounds: {e}")))?;
            if vals.len() != 4 {
                return Err(parse_err("bounds needs four values".into()));
            }
            meta.bounds = Some(Rect::new(vals[0], vals[1], vals[2], vals[3]));
        } else if let Some(v) = rest.strip_prefix("seed=") {
            meta.seed = v
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("bad seed: {e}")))?;
        } else if let Some(v) = rest.strip_prefix("provenance=") {
            meta.provenance = v.to_string();
        }
    }
    Ok((meta, n))
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    i: usize,
    line: u64,
) -> Result<T, TopologyError>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(i).ok_or_else(|| TopologyError::Parse {
        line,
        message: format!("missing column {}", TOPOLOGY_HEADER.get(i).unwrap_or(&"?")),
    })?;
    raw.trim().parse().map_err(|e| TopologyError::Parse {
        line,
        message: format!("bad value `{raw}`: {e}"),
    })
}

/// Parses a topology file's contents.
///
/// Without a `# bounds=` line the bounds are the bounding box of all nodes.
pub fn parse_topology(text: &str) -> Result<Topology, TopologyError> {
    let (meta, skipped) = parse_meta(text)?;
    let body: String = text.lines().skip(skipped).collect::<Vec<_>>().join("\n");
    if body.trim().is_empty() {
        return Err(TopologyError::Empty);
    }
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(body.as_bytes());
    let header = r.headers()?.clone();
    if header.iter().map(str::trim).ne(TOPOLOGY_HEADER) {
        return Err(TopologyError::Parse {
            line: skipped as u64 + 1,
            message: format!("expected header `{}`", TOPOLOGY_HEADER.join(",")),
        });
    }
    let mut specs = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line()) + skipped as u64;
        if rec.len() != TOPOLOGY_HEADER.len() {
            return Err(TopologyError::Parse {
                line,
                message: format!(
                    "expected {} fields, found {}",
                    TOPOLOGY_HEADER.len(),
                    rec.len()
                ),
            });
        }
        specs.push(LinkSpec {
            link_id: field(&rec, 0, line)?,
            transmitter: Position::new(field(&rec, 1, line)?, field(&rec, 2, line)?),
            receiver: Position::new(field(&rec, 3, line)?, field(&rec, 4, line)?),
            coordination_range: field(&rec, 5, line)?,
            beta: field(&rec, 6, line)?,
        });
    }
    if specs.is_empty() {
        return Err(TopologyError::Empty);
    }
    let bounds = meta.bounds.unwrap_or_else(|| {
        let mut b = Rect::new(
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        );
        for s in &specs {
            for p in [s.transmitter, s.receiver] {
                b.min_x = b.min_x.min(p.x);
                b.min_y = b.min_y.min(p.y);
                b.max_x = b.max_x.max(p.x);
                b.max_y = b.max_y.max(p.y);
            }
        }
        b
    });
    let t = Topology::from_specs(&specs, bounds, meta.seed, meta.provenance);
    t.validate()?;
    Ok(t)
}

pub fn load_topology(path: &Path) -> Result<Topology, TopologyError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_topology(&text)
}

/// Parses a population grid. A `# cell_size=` line overrides the 100 m default.
pub fn parse_population_grid(text: &str) -> Result<PopulationGrid, TopologyError> {
    let mut cell_size = PopulationGrid::DEFAULT_CELL_SIZE;
    let mut skipped = 0;
    for line in text.lines() {
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        skipped += 1;
        if let Some(v) = rest.trim().strip_prefix("cell_size=") {
            cell_size = v.trim().parse().map_err(|e| TopologyError::Parse {
                line: skipped as u64,
                message: format!("bad cell_size: {e}"),
            })?;
        }
    }
    let body: String = text.lines().skip(skipped).collect::<Vec<_>>().join("\n");
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(body.as_bytes());
    let header = r.headers()?.clone();
    if header.iter().map(str::trim).ne(GRID_HEADER) {
        return Err(TopologyError::Parse {
            line: skipped as u64 + 1,
            message: format!("expected header `{}`", GRID_HEADER.join(",")),
        });
    }
    let mut cells = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line()) + skipped as u64;
        let get = |i: usize| -> Result<&str, TopologyError> {
            rec.get(i)
                .map(str::trim)
                .ok_or_else(|| TopologyError::Parse {
                    line,
                    message: format!("missing column {}", GRID_HEADER[i]),
                })
        };
        let bad = |e: std::num::ParseIntError| TopologyError::Parse {
            line,
            message: e.to_string(),
        };
        let cell = PopulationCell {
            cell_x: get(0)?.parse().map_err(bad)?,
            cell_y: get(1)?.parse().map_err(bad)?,
            population: get(2)?.parse().map_err(bad)?,
        };
        if cell.population == 0 {
            return Err(TopologyError::Parse {
                line,
                message: "listed cells must have population >= 1".into(),
            });
        }
        cells.push(cell);
    }
    if cells.is_empty() {
        return Err(TopologyError::Empty);
    }
    Ok(PopulationGrid { cell_size, cells })
}

pub fn load_population_grid(path: &Path) -> Result<PopulationGrid, TopologyError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_population_grid(&text)
}

pub fn save_population_grid(grid: &PopulationGrid, path: &Path) -> Result<(), TopologyError> {
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut f = std::io::BufWriter::new(f);
    if grid.cell_size != PopulationGrid::DEFAULT_CELL_SIZE {
        writeln!(f, "# cell_size={}", grid.cell_size).map_err(|e| io_err(path, e))?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(f);
    w.write_record(GRID_HEADER)?;
    for c in &grid.cells {
        w.write_record([
            c.cell_x.to_string(),
            c.cell_y.to_string(),
            c.population.to_string(),
        ])?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}
