//! Ground truth and measurements.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::discovery::ImportantEntry;
use crate::geo::{utility, Address, NodeDescriptor};
use crate::topology::Topology;

/// Every node's true candidate set, in compressed sparse row form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    offsets: Vec<usize>,
    neighbours: Vec<Address>,
}

impl GroundTruth {
    /// Builds from per-node candidate lists (each sorted ascending).
    pub fn from_lists(lists: Vec<Vec<Address>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut neighbours = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        for l in lists {
            neighbours.extend(l);
            offsets.push(neighbours.len());
        }
        Self {
            offsets,
            neighbours,
        }
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Candidates of `node`, ascending by address.
    pub fn candidates(&self, node: Address) -> &[Address] {
        let i = node.index();
        &self.neighbours[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, node: Address) -> usize {
        let i = node.index();
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.offsets.windows(2).map(|w| w[1] - w[0])
    }

    pub fn stats(&self) -> DegreeStats {
        DegreeStats::from_degrees(self.degrees())
    }

    /// `true` iff `j ∈ candidates(i) ⟺ i ∈ candidates(j)` for all pairs.
    pub fn is_symmetric(&self) -> bool {
        (0..self.len() as u32).all(|i| {
            self.candidates(Address(i))
                .iter()
                .all(|&j| self.candidates(j).binary_search(&Address(i)).is_ok())
        })
    }
}

/// Summary of a degree distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeStats {
    pub nodes: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub max: usize,
}

impl DegreeStats {
    pub fn from_degrees(degrees: impl Iterator<Item = usize>) -> Self {
        let (mut n, mut sum, mut sum_sq, mut max) = (0usize, 0f64, 0f64, 0usize);
        for d in degrees {
            n += 1;
            sum += d as f64;
            sum_sq += (d * d) as f64;
            max = max.max(d);
        }
        let mean = if n == 0 { 0.0 } else { sum / n as f64 };
        let var = if n == 0 {
            0.0
        } else {
            (sum_sq / n as f64 - mean * mean).max(0.0)
        };
        Self {
            nodes: n,
            mean,
            std_dev: var.sqrt(),
            max,
        }
    }
}

/// Exact candidate sets for every node of `topology`.
pub fn compute_ground_truth(topology: &Topology) -> GroundTruth {
    let nodes: Vec<NodeDescriptor> = topology.nodes().copied().collect();
    ground_truth_of(&nodes)
}

/// Exact candidate sets for `nodes`, whose addresses must be `0..n`.
///
/// Nodes are bucketed into square cells at least as wide as the largest
/// possible candidate distance (the sum of the two largest ranges), so each
/// node only needs to look at its own and the eight surrounding cells.
pub fn ground_truth_of(nodes: &[NodeDescriptor]) -> GroundTruth {
    if nodes.is_empty() {
        return GroundTruth::from_lists(Vec::new());
    }
    let grid = SpatialGrid::new(nodes);
    let lists: Vec<Vec<Address>> = nodes
        .par_iter()
        .map(|a| {
            let mut out = Vec::new();
            grid.for_each_near(&a.position, |j| {
                let b = &nodes[j as usize];
                if b.address != a.address && utility(a, b) > 1.0 {
                    out.push(b.address);
                }
            });
            out.sort_unstable();
            out
        })
        .collect();
    GroundTruth::from_lists(lists)
}

/// Uniform bucket grid over node positions (x and y only).
struct SpatialGrid {
    min_x: f64,
    min_y: f64,
    cell: f64,
    cols: usize,
    rows: usize,
    starts: Vec<u32>,
    members: Vec<u32>,
}

impl SpatialGrid {
    fn new(nodes: &[NodeDescriptor]) -> Self {
        let mut top = [0.0f64; 2];
        for n in nodes {
            let r = n.coordination_range;
            if r > top[0] {
                top = [r, top[0]];
            } else if r > top[1] {
                top[1] = r;
            }
        }
        let (mut min_x, mut min_y, mut max_x, mut max_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for n in nodes {
            min_x = min_x.min(n.position.x);
            min_y = min_y.min(n.position.y);
            max_x = max_x.max(n.position.x);
            max_y = max_y.max(n.position.y);
        }
        // Candidate distance is below the range sum; one meter of slack
        // covers the clamp on tiny distances.
        let mut cell = (top[0] + top[1]).max(1.0);
        let span = (max_x - min_x).max(max_y - min_y);
        // Very sparse layouts would otherwise allocate a huge empty grid.
        let max_cells_per_axis = ((nodes.len() as f64).sqrt() * 4.0).max(1.0);
        if span / cell > max_cells_per_axis {
            cell = cell.max(span / max_cells_per_axis);
        }
        let cols = ((max_x - min_x) / cell).floor() as usize + 1;
        let rows = ((max_y - min_y) / cell).floor() as usize + 1;
        let mut g = Self {
            min_x,
            min_y,
            cell,
            cols,
            rows,
            starts: vec![0; cols * rows + 1],
            members: vec![0; nodes.len()],
        };
        let cells: Vec<usize> = nodes
            .iter()
            .map(|n| g.cell_of(n.position.x, n.position.y))
            .collect();
        for &c in &cells {
            g.starts[c + 1] += 1;
        }
        for i in 1..g.starts.len() {
            g.starts[i] += g.starts[i - 1];
        }
        let mut fill = g.starts.clone();
        for (i, &c) in cells.iter().enumerate() {
            g.members[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        g
    }

    fn coords(&self, x: f64, y: f64) -> (usize, usize) {
        let cx = (((x - self.min_x) / self.cell).floor().max(0.0) as usize).min(self.cols - 1);
        let cy = (((y - self.min_y) / self.cell).floor().max(0.0) as usize).min(self.rows - 1);
        (cx, cy)
    }

    fn cell_of(&self, x: f64, y: f64) -> usize {
        let (cx, cy) = self.coords(x, y);
        cy * self.cols + cx
    }

    fn for_each_near(&self, p: &crate::geo::Position, mut f: impl FnMut(u32)) {
        let (cx, cy) = self.coords(p.x, p.y);
        for y in cy.saturating_sub(1)..=(cy + 1).min(self.rows - 1) {
            for x in cx.saturating_sub(1)..=(cx + 1).min(self.cols - 1) {
                let c = y * self.cols + x;
                for &m in &self.members[self.starts[c] as usize..self.starts[c + 1] as usize] {
                    f(m);
                }
            }
        }
    }
}

/// Fraction of complete nodes and the number of incomplete ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub fraction_complete: f64,
    pub nodes_missing: usize,
}

/// A node is complete when the candidate entries of its table include every
/// true candidate. `tables` yields each node's candidate entries in address
/// order.
pub fn coverage<'a>(
    tables: impl Iterator<Item = &'a [ImportantEntry]>,
    truth: &GroundTruth,
) -> Coverage {
    let mut missing = 0;
    let mut n = 0;
    let mut known: Vec<Address> = Vec::new();
    for (i, entries) in tables.enumerate() {
        n += 1;
        known.clear();
        known.extend(entries.iter().filter(|e| e.is_candidate()).map(|e| e.node));
        known.sort_unstable();
        let complete = truth
            .candidates(Address(i as u32))
            .iter()
            .all(|c| known.binary_search(c).is_ok());
        if !complete {
            missing += 1;
        }
    }
    Coverage {
        fraction_complete: if n == 0 {
            1.0
        } else {
            (n - missing) as f64 / n as f64
        },
        nodes_missing: missing,
    }
}

/// Candidate count to number of nodes with that count.
pub fn degree_histogram(truth: &GroundTruth) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for d in truth.degrees() {
        *h.entry(d).or_insert(0) += 1;
    }
    h
}

/// Most frequent degree (smallest on ties).
pub fn histogram_mode(h: &BTreeMap<usize, usize>) -> Option<usize> {
    h.iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&d, _)| d)
}

pub fn write_histogram<W: Write>(h: &BTreeMap<usize, usize>, out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["degree", "count"])?;
    for (d, c) in h {
        w.write_record([d.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Links whose channel differs between two allocations. Links beyond the
/// shorter of the two are not compared.
pub fn frequency_change_count(now: &[Option<u16>], before: &[Option<u16>]) -> usize {
    now.iter().zip(before).filter(|(a, b)| a != b).count()
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Time series of named measurements plus a final outcome.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceLog {
    pub rows: Vec<TraceRow>,
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub time_s: f64,
    pub metric: &'static str,
    pub value: f64,
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    /// Simulated seconds until every node knew all its candidates.
    StableAt(f64),
    /// Iterations until every node knew all its candidates.
    StableAfter(u32),
    /// The run was cut at this many seconds or iterations.
    NotConverged(f64),
}

impl TraceLog {
    pub fn push(&mut self, time_s: f64, metric: &'static str, value: f64) {
        self.rows.push(TraceRow {
            time_s,
            metric,
            value,
        });
    }

    /// Values of one metric, in time order.
    pub fn series(&self, metric: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| (r.time_s, r.value))
            .collect()
    }

    /// `time_s,metric,value` CSV. The outcome is the last row, with metric
    /// `stable_time_s`, `stable_iterations` or `not_converged`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["time_s", "metric", "value"])?;
        for r in &self.rows {
            w.write_record([
                r.time_s.to_string(),
                r.metric.to_string(),
                r.value.to_string(),
            ])?;
        }
        let end = self.rows.last().map_or(0.0, |r| r.time_s);
        match self.outcome {
            Some(Outcome::StableAt(t)) => {
                w.write_record([end.to_string(), "stable_time_s".into(), t.to_string()])?
            }
            Some(Outcome::StableAfter(i)) => {
                w.write_record([end.to_string(), "stable_iterations".into(), i.to_string()])?
            }
            Some(Outcome::NotConverged(at)) => {
                w.write_record([end.to_string(), "not_converged".into(), at.to_string()])?
            }
            None => {}
        }
        w.flush()?;
        Ok(())
    }
}

pub mod metric {
    pub const COVERAGE_FRACTION: &str = "coverage_fraction";
    pub const NODES_MISSING: &str = "nodes_missing_candidates";
    pub const BYTES_SENT_TOTAL: &str = "bytes_sent_total";
    pub const STABLE_FLAG: &str = "stable_flag";
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{NodeId, Position};
    use crate::time::SimTime;

    fn node(i: u32, x: f64, y: f64, cr: f64) -> NodeDescriptor {
        NodeDescriptor {
            id: NodeId(u64::from(i)),
            position: Position::new(x, y),
            coordination_range: cr,
            address: Address(i),
        }
    }

    #[test]
    fn pair_and_isolated() {
        let nodes = [
            node(0, 0.0, 0.0, 50.0),
            node(1, 99.0, 0.0, 50.0),
            node(2, 5000.0, 0.0, 50.0),
        ];
        let t = ground_truth_of(&nodes);
        assert_eq!(t.candidates(Address(0)), &[Address(1)]);
        assert_eq!(t.candidates(Address(1)), &[Address(0)]);
        assert!(t.candidates(Address(2)).is_empty());
        assert!(t.is_symmetric());
        let h = degree_histogram(&t);
        assert_eq!(h, BTreeMap::from([(0, 1), (1, 2)]));
    }

    #[test]
    fn empty_histogram() {
        let t = ground_truth_of(&[]);
        assert!(degree_histogram(&t).is_empty());
    }

    #[test]
    fn heterogeneous_ranges_found_across_cells() {
        // One large range among small ones: the pair at 150 m overlaps only
        // because of the 140 m range.
        let nodes = [
            node(0, 0.0, 0.0, 140.0),
            node(1, 150.0, 0.0, 20.0),
            node(2, 300.0, 0.0, 20.0),
            node(3, 330.0, 0.0, 20.0),
        ];
        let t = ground_truth_of(&nodes);
        assert_eq!(t.candidates(Address(0)), &[Address(1)]);
        assert_eq!(t.candidates(Address(2)), &[Address(3)]);
    }

    #[test]
    fn coverage_counts_incomplete_nodes() {
        let nodes = [node(0, 0.0, 0.0, 50.0), node(1, 10.0, 0.0, 50.0)];
        let t = ground_truth_of(&nodes);
        let e = |n: u32| ImportantEntry {
            node: Address(n),
            last_seen: SimTime(0),
            utility: 100.0,
        };
        let full = [vec![e(1)], vec![e(0)]];
        let c = coverage(full.iter().map(Vec::as_slice), &t);
        assert_eq!(
            c,
            Coverage {
                fraction_complete: 1.0,
                nodes_missing: 0
            }
        );
        let half = [vec![e(1)], vec![]];
        let c = coverage(half.iter().map(Vec::as_slice), &t);
        assert_eq!(c.nodes_missing, 1);
    }

    #[test]
    fn frequency_changes() {
        let a = [Some(1), Some(2), Some(3)];
        assert_eq!(frequency_change_count(&a, &a), 0);
        assert_eq!(
            frequency_change_count(&[Some(1), Some(4), Some(3), Some(0)], &a),
            1
        );
    }

    #[test]
    fn trace_csv_layout() {
        let mut t = TraceLog::default();
        t.push(0.0, metric::COVERAGE_FRACTION, 0.5);
        t.push(10.0, metric::COVERAGE_FRACTION, 1.0);
        t.outcome = Some(Outcome::StableAt(7.25));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time_s,metric,value\n0,coverage_fraction,0.5\n10,coverage_fraction,1\n10,stable_time_s,7.25\n"
        );
    }
}
