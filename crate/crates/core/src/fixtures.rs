//! Bundled synthetic population grids.
//!
//! The grids are generated by `scripts/make_grids.py` and imitate small
//! municipalities: a town centre, outskirts, villages and scattered farms.
//! Household totals give 2913 (Tynset-like), 2037 (Vinje-like) and 13018
//! (Lillehammer-like) links.

use crate::topology::{parse_population_grid, PopulationGrid, Rect};

const TYNSET: &str = include_str!("../data/tynset_synthetic.csv");
const VINJE: &str = include_str!("../data/vinje_synthetic.csv");
const LILLEHAMMER: &str = include_str!("../data/lillehammer_synthetic.csv");

/// The 1 x 1 km square in the Tynset-like grid holding 305 links.
pub const TYNSET_FOCUS: Rect = Rect {
    min_x: 9_500.0,
    min_y: 9_500.0,
    max_x: 10_500.0,
    max_y: 10_500.0,
};

/// Links in [`TYNSET_FOCUS`].
pub const TYNSET_FOCUS_LINKS: usize = 305;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Municipality {
    Tynset,
    Vinje,
    Lillehammer,
}

impl Municipality {
    pub const ALL: [Municipality; 3] = [Self::Tynset, Self::Vinje, Self::Lillehammer];

    pub fn name(self) -> &'static str {
        match self {
            Self::Tynset => "tynset",
            Self::Vinje => "vinje",
            Self::Lillehammer => "lillehammer",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Links the grid yields at 2.22 persons per household.
    pub fn expected_links(self) -> usize {
        match self {
            Self::Tynset => 2913,
            Self::Vinje => 2037,
            Self::Lillehammer => 13018,
        }
    }

    pub fn grid(self) -> PopulationGrid {
        let text = match self {
            Self::Tynset => TYNSET,
            Self::Vinje => VINJE,
            Self::Lillehammer => LILLEHAMMER,
        };
        parse_population_grid(text).expect("bundled grid parses")
    }
}
