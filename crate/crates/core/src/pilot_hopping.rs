//! Latin-square SRS hopping.
//!
//! Rows of a Latin square index SRS subcarriers, columns index slots. A UE bound
//! to `(square t, symbol n)` transmits in slot `s` on the row where column
//! `s` of square `t` holds `n`. Squares of the prime-order family
//! `A_t(i, j) = ((t i + j) mod N) + 1`, `t = 1..N-1`, are pairwise orthogonal, so
//! two UEs on different squares meet exactly once per `N` slots and two UEs on
//! the same square with different symbols never meet.

use std::path::Path;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{torus_distance, Point};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatinSquare {
    order: usize,
    /// Row-major, entries in `1..=order`.
    cells: Vec<usize>,
}

impl LatinSquare {
    pub fn from_rows(rows: &[Vec<usize>]) -> Result<Self> {
        let order = rows.len();
        if order == 0 || rows.iter().any(|r| r.len() != order) {
            return Err(invalid("a Latin square must be a non-empty square array"));
        }
        let sq = Self { order, cells: rows.concat() };
        if !sq.is_latin() {
            return Err(invalid("rows and columns must be permutations of 1..=N"));
        }
        Ok(sq)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Entry at 0-based `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> usize {
        self.cells[row * self.order + col]
    }

    pub fn rows(&self) -> Vec<Vec<usize>> {
        self.cells.chunks(self.order).map(<[usize]>::to_vec).collect()
    }

    pub fn is_latin(&self) -> bool {
        let n = self.order;
        let perm = |values: Vec<usize>| {
            let mut seen = vec![false; n + 1];
            values.into_iter().all(|v| (1..=n).contains(&v) && !std::mem::replace(&mut seen[v], true))
        };
        (0..n).all(|i| perm((0..n).map(|j| self.get(i, j)).collect()) && perm((0..n).map(|j| self.get(j, i)).collect()))
    }

    /// 0-based row holding `symbol` in 0-based column `col`.
    pub fn row_of(&self, col: usize, symbol: usize) -> usize {
        (0..self.order)
            .find(|&r| self.get(r, col) == symbol)
            .expect("Latin column contains every symbol")
    }
}

/// All `N^2` elementwise pairs are distinct.
pub fn mutually_orthogonal(a: &LatinSquare, b: &LatinSquare) -> bool {
    let n = a.order;
    if b.order != n {
        return false;
    }
    let mut seen = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            let key = (a.get(i, j) - 1) * n + (b.get(i, j) - 1);
            if std::mem::replace(&mut seen[key], true) {
                return false;
            }
        }
    }
    true
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

/// The `N - 1` squares of order `N`, index `t - 1` holding square `t`.
pub fn mols_family(n: usize) -> Result<Vec<LatinSquare>> {
    if !is_prime(n) {
        return Err(invalid(format!(
            "N must be prime (got {n}); prime-power orders are not supported"
        )));
    }
    Ok((1..n)
        .map(|t| LatinSquare {
            order: n,
            cells: (0..n * n).map(|idx| ((t * (idx / n) + idx % n) % n) + 1).collect(),
        })
        .collect())
}

/// Pointy-top hexagonal cells laid over the torus square.
#[derive(Debug, Clone, PartialEq)]
pub struct HexCells {
    pub radius: f64,
    /// Axial coordinates of each kept cell.
    pub axial: Vec<(i64, i64)>,
    pub centers: Vec<Point>,
}

impl HexCells {
    /// `radius = None` yields a single cell covering the whole area.
    pub fn new(area_side: f64, radius: Option<f64>) -> Result<Self> {
        let Some(radius) = radius else {
            return Ok(Self { radius: f64::INFINITY, axial: vec![(0, 0)], centers: vec![Point::new(0.0, 0.0)] });
        };
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("hex cell radius must be positive"));
        }
        let width = 3f64.sqrt() * radius;
        let row_step = 1.5 * radius;
        let mut axial = Vec::new();
        let mut centers = Vec::new();
        let rows = (area_side / row_step).ceil() as i64;
        for r in 0..=rows {
            let y = row_step * r as f64;
            if y >= area_side {
                break;
            }
            let q_lo = -(r / 2) - 1;
            let q_hi = (area_side / width).ceil() as i64 + 1;
            for q in q_lo..=q_hi {
                let x = width * (q as f64 + r as f64 / 2.0);
                if (0.0..area_side).contains(&x) {
                    axial.push((q, r));
                    centers.push(Point::new(x, y));
                }
            }
        }
        Ok(Self { radius, axial, centers })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Nearest centre under the torus metric; cells clipped at the seam merge
    /// into whichever neighbour is closer.
    pub fn cell_of(&self, p: Point, area_side: f64) -> usize {
        (0..self.centers.len())
            .min_by(|&a, &b| {
                torus_distance(p, self.centers[a], area_side).total_cmp(&torus_distance(p, self.centers[b], area_side))
            })
            .expect("at least one cell")
    }

    /// Reuse colour `(q mod a) + a (r mod b)` with `a, b >= 2` and `a b <= colors`.
    /// Axial neighbours differ in `q` or `r` by one, so they get distinct
    /// colours whenever `colors >= 4`.
    pub fn color(&self, cell: usize, colors: usize) -> usize {
        let colors = colors.max(1);
        let a = ((colors as f64).sqrt().floor() as usize).max(1);
        let b = (colors / a).max(1);
        let (q, r) = self.axial[cell];
        (q.rem_euclid(a as i64) as usize + a * r.rem_euclid(b as i64) as usize) % colors
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        let (qa, ra) = self.axial[a];
        let (qb, rb) = self.axial[b];
        let (dq, dr) = (qb - qa, rb - ra);
        matches!((dq, dr), (1, 0) | (-1, 0) | (0, 1) | (0, -1) | (1, -1) | (-1, 1))
    }
}

/// Radius giving about `ceil(K / N)` cells over the area; `None` when one cell suffices.
pub fn default_cell_radius(area_side: f64, num_ues: usize, n: usize) -> Option<f64> {
    let cells = num_ues.div_ceil(n.max(1));
    if cells <= 1 {
        return None;
    }
    let area = area_side * area_side;
    Some((2.0 * area / (3.0 * 3f64.sqrt() * cells as f64)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SrsAssignment {
    pub cell: usize,
    /// Multiplier `t` in `1..N`.
    pub square_id: usize,
    /// Hopping symbol in `1..=N`.
    pub symbol_id: usize,
}

pub fn allocate_squares(
    ue_positions: &[Point],
    area_side: f64,
    family: &[LatinSquare],
    cell_radius: Option<f64>,
) -> Result<Vec<SrsAssignment>> {
    if family.is_empty() {
        return Err(invalid("Latin square family is empty"));
    }
    let n = family[0].order();
    let cells = HexCells::new(area_side, cell_radius)?;
    let mut fill = vec![0usize; cells.len()];
    Ok(ue_positions
        .iter()
        .map(|&p| {
            let cell = cells.cell_of(p, area_side);
            let symbol_id = fill[cell] % n + 1;
            fill[cell] += 1;
            SrsAssignment { cell, square_id: cells.color(cell, family.len()) + 1, symbol_id }
        })
        .collect())
}

/// Number of UE pairs holding an identical `(square, symbol)` assignment.
pub fn duplicate_assignment_pairs(assignments: &[SrsAssignment]) -> usize {
    let mut count = 0;
    for (i, a) in assignments.iter().enumerate() {
        for b in &assignments[i + 1..] {
            if a.square_id == b.square_id && a.symbol_id == b.symbol_id {
                count += 1;
            }
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrsSchedule {
    n: usize,
    slots: usize,
    assignments: Vec<SrsAssignment>,
    /// `subcarriers[ue][s]`: 1-based subcarrier in 0-based slot `s`.
    subcarriers: Vec<Vec<usize>>,
    /// `occupancy[s][f - 1]`: UEs on subcarrier `f` in slot `s`, ascending.
    occupancy: Vec<Vec<Vec<usize>>>,
}

pub fn build_schedule(assignments: &[SrsAssignment], family: &[LatinSquare], slots: usize) -> Result<SrsSchedule> {
    if slots == 0 {
        return Err(invalid("SRS sequence needs at least one slot"));
    }
    if family.is_empty() {
        return Err(invalid("Latin square family is empty"));
    }
    let n = family[0].order();
    let mut subcarriers = Vec::with_capacity(assignments.len());
    for a in assignments {
        if a.square_id == 0 || a.square_id > family.len() || a.symbol_id == 0 || a.symbol_id > n {
            return Err(invalid(format!("assignment {a:?} is outside the family")));
        }
        let square = &family[a.square_id - 1];
        subcarriers.push((0..slots).map(|s| square.row_of(s % n, a.symbol_id) + 1).collect::<Vec<_>>());
    }
    let mut occupancy = vec![vec![Vec::new(); n]; slots];
    for (ue, seq) in subcarriers.iter().enumerate() {
        for (s, &f) in seq.iter().enumerate() {
            occupancy[s][f - 1].push(ue);
        }
    }
    Ok(SrsSchedule { n, slots, assignments: assignments.to_vec(), subcarriers, occupancy })
}

impl SrsSchedule {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn num_ues(&self) -> usize {
        self.subcarriers.len()
    }

    pub fn assignment(&self, ue: usize) -> SrsAssignment {
        self.assignments[ue]
    }

    /// 1-based subcarrier for 0-based `slot`.
    pub fn subcarrier(&self, ue: usize, slot: usize) -> usize {
        self.subcarriers[ue][slot]
    }

    pub fn sequence(&self, ue: usize) -> &[usize] {
        &self.subcarriers[ue]
    }

    pub fn collide(&self, a: usize, b: usize, slot: usize) -> bool {
        self.subcarriers[a][slot] == self.subcarriers[b][slot]
    }

    /// Other UEs sharing `ue`'s subcarrier in `slot`.
    pub fn colliders(&self, ue: usize, slot: usize) -> impl Iterator<Item = usize> + '_ {
        let f = self.subcarriers[ue][slot];
        self.occupancy[slot][f - 1].iter().copied().filter(move |&j| j != ue)
    }

    pub fn collision_count(&self, a: usize, b: usize, slots: std::ops::Range<usize>) -> usize {
        slots.filter(|&s| self.collide(a, b, s)).count()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["ue_id", "slot", "subcarrier", "square_id", "symbol_id"]).map_err(csv_err)?;
        for (ue, seq) in self.subcarriers.iter().enumerate() {
            let a = self.assignments[ue];
            for (s, &f) in seq.iter().enumerate() {
                w.write_record(&[
                    ue.to_string(),
                    (s + 1).to_string(),
                    f.to_string(),
                    a.square_id.to_string(),
                    a.symbol_id.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }
}
