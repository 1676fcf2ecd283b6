use std::f64::consts::{SQRT_2, TAU};
use std::fmt;

use rand::Rng;

use super::{LinkSpec, PopulationGrid, Rect, Topology, BETA_RANGE};
use crate::error::TopologyError;
use crate::geo::Position;
use crate::rng::{streams, Seed, SimRng};

/// Receiver draws per link before generation gives up.
pub const MAX_PLACEMENT_ATTEMPTS: u32 = 1000;

/// How a receiver is placed around its transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReceiverPlacement {
    /// Independent uniform offsets in x and y within `±max/√2`, i.e. uniform
    /// over the square inscribed in the max-distance disc.
    #[default]
    Square,
    /// Uniform over the disc of radius `max_link_distance`.
    Disc,
}

impl fmt::Display for ReceiverPlacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Square => "square",
            Self::Disc => "disc",
        })
    }
}

impl std::str::FromStr for ReceiverPlacement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "square" => Ok(Self::Square),
            "disc" => Ok(Self::Disc),
            _ => Err(format!("unknown receiver placement `{s}` (square|disc)")),
        }
    }
}

fn place_receiver(
    rng: &mut SimRng,
    tx: Position,
    max_link_distance: f64,
    placement: ReceiverPlacement,
    bounds: &Rect,
) -> Result<Position, TopologyError> {
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let (dx, dy) = match placement {
            ReceiverPlacement::Square => {
                let h = max_link_distance / SQRT_2;
                (rng.random_range(-h..=h), rng.random_range(-h..=h))
            }
            ReceiverPlacement::Disc => {
                let r = max_link_distance * rng.random::<f64>().sqrt();
                let a = rng.random::<f64>() * TAU;
                (r * a.cos(), r * a.sin())
            }
        };
        let p = Position::new(tx.x + dx, tx.y + dy);
        if bounds.contains(&p) {
            return Ok(p);
        }
    }
    Err(TopologyError::Placement {
        attempts: MAX_PLACEMENT_ATTEMPTS,
    })
}

fn uniform_in(rng: &mut SimRng, r: &Rect) -> Position {
    Position::new(
        rng.random_range(r.min_x..=r.max_x),
        rng.random_range(r.min_y..=r.max_y),
    )
}

fn check_args(bounds: &Rect, max_link_distance: f64) -> Result<(), TopologyError> {
    if !bounds.is_valid() {
        return Err(TopologyError::Argument(format!(
            "invalid bounds {bounds:?}"
        )));
    }
    if !(max_link_distance > 0.0 && max_link_distance.is_finite()) {
        return Err(TopologyError::Argument(format!(
            "max_link_distance must be positive, got {max_link_distance}"
        )));
    }
    Ok(())
}

/// Interleaves the bits of the quantized transmitter position, so links that
/// are close in space end up close in memory.
fn morton_key(p: &Position, bounds: &Rect) -> u64 {
    fn spread(v: u32) -> u64 {
        let mut x = u64::from(v);
        x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF;
        x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF;
        x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
        x = (x | (x << 2)) & 0x3333_3333_3333_3333;
        x = (x | (x << 1)) & 0x5555_5555_5555_5555;
        x
    }
    let q = |v: f64, lo: f64, span: f64| -> u32 {
        if span <= 0.0 {
            0
        } else {
            (((v - lo) / span).clamp(0.0, 1.0) * f64::from(u32::MAX)) as u32
        }
    };
    spread(q(p.x, bounds.min_x, bounds.width()))
        | (spread(q(p.y, bounds.min_y, bounds.height())) << 1)
}

fn finish(mut specs: Vec<LinkSpec>, bounds: Rect, seed: u64, provenance: String) -> Topology {
    specs.sort_by_key(|s| morton_key(&s.transmitter, &bounds));
    for (i, s) in specs.iter_mut().enumerate() {
        s.link_id = i as u32;
    }
    Topology::from_specs(&specs, bounds, seed, provenance)
}

/// Places `n_pairs` links uniformly in `bounds`.
///
/// Links are numbered in a space-filling-curve order of their transmitters.
pub fn gen_random_pairs(
    n_pairs: usize,
    bounds: Rect,
    max_link_distance: f64,
    placement: ReceiverPlacement,
    seed: u64,
) -> Result<Topology, TopologyError> {
    if n_pairs == 0 {
        return Err(TopologyError::Argument("n_pairs must be at least 1".into()));
    }
    check_args(&bounds, max_link_distance)?;
    let s = Seed(seed);
    let mut pos_rng = s.stream(streams::TOPOLOGY);
    let mut beta_rng = s.stream(streams::BETA);
    let mut specs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let tx = uniform_in(&mut pos_rng, &bounds);
        let rx = place_receiver(&mut pos_rng, tx, max_link_distance, placement, &bounds)?;
        let beta = beta_rng.random_range(BETA_RANGE.0..=BETA_RANGE.1);
        specs.push(LinkSpec::new(0, tx, rx, beta));
    }
    let provenance = format!(
        "random-pairs n_pairs={n_pairs} bounds={},{},{},{} max_link_distance={max_link_distance} placement={placement}",
        bounds.min_x, bounds.min_y, bounds.max_x, bounds.max_y
    );
    Ok(finish(specs, bounds, seed, provenance))
}

/// Draws `n` link specs with transmitters uniform in `area` and receivers
/// kept inside `bounds`. Specs carry `link_id` 0; callers number them.
pub fn gen_link_specs(
    n: usize,
    area: &Rect,
    bounds: &Rect,
    max_link_distance: f64,
    placement: ReceiverPlacement,
    rng: &mut SimRng,
) -> Result<Vec<LinkSpec>, TopologyError> {
    check_args(bounds, max_link_distance)?;
    if !area.is_valid() {
        return Err(TopologyError::Argument(format!("invalid area {area:?}")));
    }
    (0..n)
        .map(|_| {
            let tx = uniform_in(rng, area);
            let rx = place_receiver(rng, tx, max_link_distance, placement, bounds)?;
            let beta = rng.random_range(BETA_RANGE.0..=BETA_RANGE.1);
            Ok(LinkSpec::new(0, tx, rx, beta))
        })
        .collect()
}

/// Number of households (links) for a cell population: the population divided
/// by `persons_per_household`, rounded up.
pub fn households(population: u32, persons_per_household: f64) -> u32 {
    let q = f64::from(population) / persons_per_household;
    let r = q.round();
    // 111 / 2.22 lands a hair above 50 in floating point.
    if (q - r).abs() < 1e-9 {
        r as u32
    } else {
        q.ceil() as u32
    }
}

/// One link per household, transmitters uniform within their cell.
pub fn gen_from_population_grid(
    grid: &PopulationGrid,
    persons_per_household: f64,
    max_link_distance: f64,
    placement: ReceiverPlacement,
    seed: u64,
) -> Result<Topology, TopologyError> {
    let bounds = grid.bounds().ok_or(TopologyError::Empty)?;
    check_args(&bounds, max_link_distance)?;
    if persons_per_household.is_nan() || persons_per_household <= 0.0 {
        return Err(TopologyError::Argument(
            "persons_per_household must be positive".into(),
        ));
    }
    let s = Seed(seed);
    let mut pos_rng = s.stream(streams::TOPOLOGY);
    let mut beta_rng = s.stream(streams::BETA);
    let mut specs = Vec::new();
    for cell in &grid.cells {
        let rect = grid.cell_rect(cell.cell_x, cell.cell_y);
        for _ in 0..households(cell.population, persons_per_household) {
            let tx = uniform_in(&mut pos_rng, &rect);
            let rx = place_receiver(&mut pos_rng, tx, max_link_distance, placement, &bounds)?;
            let beta = beta_rng.random_range(BETA_RANGE.0..=BETA_RANGE.1);
            specs.push(LinkSpec::new(0, tx, rx, beta));
        }
    }
    if specs.is_empty() {
        return Err(TopologyError::Empty);
    }
    let provenance = format!(
        "population-grid cells={} population={} persons_per_household={persons_per_household} max_link_distance={max_link_distance} placement={placement}",
        grid.cells.len(),
        grid.total_population()
    );
    Ok(finish(specs, bounds, seed, provenance))
}
