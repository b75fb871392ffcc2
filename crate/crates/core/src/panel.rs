//! Age grids, density curves, and the rectangular state × gender × year panel.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Life-table radix: the number of deaths each curve sums to.
pub const DEFAULT_RADIX: f64 = 1e5;

/// Relative size of the floor used to replace zero death counts.
const ZERO_FLOOR: f64 = 1e-5;

/// Ordered ages with composite-trapezoid quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeGrid {
    ages: Vec<f64>,
    weights: Vec<f64>,
}

impl AgeGrid {
    pub fn new(ages: Vec<f64>) -> Result<Self> {
        if ages.len() < 2 {
            return Err(Error::domain("an age grid needs at least two ages"));
        }
        if ages.iter().any(|a| !a.is_finite()) {
            return Err(Error::domain("age grid contains a non-finite age"));
        }
        if ages.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("ages must be strictly increasing"));
        }
        let p = ages.len();
        let mut weights = vec![0.0; p];
        for i in 0..p - 1 {
            let half = 0.5 * (ages[i + 1] - ages[i]);
            weights[i] += half;
            weights[i + 1] += half;
        }
        Ok(Self { ages, weights })
    }

    /// Unit-spaced grid `first, first + 1, ..., last`.
    pub fn unit(first: u32, last: u32) -> Result<Self> {
        Self::new((first..=last).map(f64::from).collect())
    }

    /// Single-year ages 0 through 110.
    pub fn life_table() -> Self {
        Self::unit(0, 110).expect("0..=110 is a valid grid")
    }

    pub fn ages(&self) -> &[f64] {
        &self.ages
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.ages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ages.is_empty()
    }

    /// Length of the age interval, `x_D - x_1`.
    pub fn span(&self) -> f64 {
        self.ages[self.ages.len() - 1] - self.ages[0]
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Quadrature inner product.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    fn same_ages(&self, other: &[f64]) -> bool {
        self.ages.len() == other.len()
            && self
                .ages
                .iter()
                .zip(other)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs()))
    }
}

impl Default for AgeGrid {
    fn default() -> Self {
        Self::life_table()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Gender {
    F,
    M,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::F, Gender::M];

    pub fn index(self) -> usize {
        match self {
            Gender::F => 0,
            Gender::M => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::F => "F",
            Gender::M => "M",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "F" | "f" => Ok(Gender::F),
            "M" | "m" => Ok(Gender::M),
            other => Err(Error::domain(format!("gender must be F or M, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PanelKey {
    pub state: String,
    pub gender: Gender,
    pub year: i32,
}

impl fmt::Display for PanelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.state, self.gender, self.year)
    }
}

/// Deaths per year of age on a grid. The life-table radix is the mass the
/// curve is normalized to.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    grid: Arc<AgeGrid>,
    values: Vec<f64>,
    radix: f64,
}

impl DensityCurve {
    /// Values must be finite and nonnegative. No normalization is applied.
    pub fn new(grid: Arc<AgeGrid>, values: Vec<f64>, radix: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "curve has {} values for a grid of {} ages",
                values.len(),
                grid.len()
            )));
        }
        if !(radix > 0.0 && radix.is_finite()) {
            return Err(Error::domain("radix must be positive"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain("density values must be finite and nonnegative"));
        }
        Ok(Self {
            grid,
            values,
            radix,
        })
    }

    pub(crate) fn from_parts_unchecked(grid: Arc<AgeGrid>, values: Vec<f64>, radix: f64) -> Self {
        Self {
            grid,
            values,
            radix,
        }
    }

    pub fn grid(&self) -> &Arc<AgeGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn radix(&self) -> f64 {
        self.radix
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.values.iter().all(|v| *v > 0.0)
    }

    /// Rescale so the quadrature integral equals the radix.
    pub fn normalized(&self) -> Result<Self> {
        let mass = self.integral();
        if !(mass > 0.0) {
            return Err(Error::domain("cannot normalize a curve with zero mass"));
        }
        let scale = self.radix / mass;
        Ok(Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| v * scale).collect(),
            radix: self.radix,
        })
    }

    /// Quadrature mean age at death.
    pub fn mean_age(&self) -> f64 {
        let mass = self.integral();
        self.grid
            .weights()
            .iter()
            .zip(self.grid.ages())
            .zip(&self.values)
            .map(|((w, x), d)| w * x * d)
            .sum::<f64>()
            / mass
    }
}

/// Rectangular panel of curves indexed by state, gender and year.
///
/// Cells are stored state-major, then gender, then year, so the yearly
/// series of one (state, gender) pair is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel<C> {
    grid: Arc<AgeGrid>,
    states: Vec<String>,
    years: Vec<i32>,
    cells: Vec<C>,
}

pub type DensityPanel = Panel<DensityCurve>;

impl<C> Panel<C> {
    pub fn from_cells(
        grid: Arc<AgeGrid>,
        states: Vec<String>,
        years: Vec<i32>,
        cells: Vec<C>,
    ) -> Result<Self> {
        let expected = states.len() * 2 * years.len();
        if cells.len() != expected {
            return Err(Error::Shape(format!(
                "{} cells for {} states x 2 genders x {} years",
                cells.len(),
                states.len(),
                years.len()
            )));
        }
        if states.is_empty() || years.is_empty() {
            return Err(Error::domain("a panel needs at least one state and one year"));
        }
        Ok(Self {
            grid,
            states,
            years,
            cells,
        })
    }

    /// Build a panel by calling `f(state_index, gender, year_index)` for every cell.
    pub fn from_fn<F>(grid: Arc<AgeGrid>, states: Vec<String>, years: Vec<i32>, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, Gender, usize) -> Result<C>,
    {
        let mut cells = Vec::with_capacity(states.len() * 2 * years.len());
        for s in 0..states.len() {
            for g in Gender::ALL {
                for t in 0..years.len() {
                    cells.push(f(s, g, t)?);
                }
            }
        }
        Self::from_cells(grid, states, years, cells)
    }

    pub fn grid(&self) -> &Arc<AgeGrid> {
        &self.grid
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    fn offset(&self, s: usize, g: Gender) -> usize {
        (s * 2 + g.index()) * self.years.len()
    }

    pub fn cell(&self, s: usize, g: Gender, t: usize) -> &C {
        assert!(t < self.years.len(), "year index out of range");
        &self.cells[self.offset(s, g) + t]
    }

    pub fn cell_mut(&mut self, s: usize, g: Gender, t: usize) -> &mut C {
        assert!(t < self.years.len(), "year index out of range");
        let at = self.offset(s, g) + t;
        &mut self.cells[at]
    }

    /// The yearly series of one (state, gender) pair, oldest first.
    pub fn series(&self, s: usize, g: Gender) -> &[C] {
        let start = self.offset(s, g);
        &self.cells[start..start + self.years.len()]
    }

    pub fn get(&self, key: &PanelKey) -> Option<&C> {
        let s = self.states.iter().position(|x| *x == key.state)?;
        let t = self.years.iter().position(|y| *y == key.year)?;
        Some(self.cell(s, key.gender, t))
    }

    pub fn key(&self, s: usize, g: Gender, t: usize) -> PanelKey {
        PanelKey {
            state: self.states[s].clone(),
            gender: g,
            year: self.years[t],
        }
    }

    /// Every cell with its indices, in storage order.
    pub fn iter_indexed(&self) -> impl Iterator<Item = (usize, Gender, usize, &C)> + '_ {
        let n_t = self.years.len();
        self.cells.iter().enumerate().map(move |(i, c)| {
            let t = i % n_t;
            let sg = i / n_t;
            let g = if sg % 2 == 0 { Gender::F } else { Gender::M };
            (sg / 2, g, t, c)
        })
    }

    pub fn cells(&self) -> &[C] {
        &self.cells
    }

    pub fn map<D>(&self, f: impl FnMut(&C) -> D) -> Panel<D> {
        Panel {
            grid: Arc::clone(&self.grid),
            states: self.states.clone(),
            years: self.years.clone(),
            cells: self.cells.iter().map(f).collect(),
        }
    }

    pub fn try_map<D>(&self, mut f: impl FnMut(&C) -> Result<D>) -> Result<Panel<D>> {
        let mut cells = Vec::with_capacity(self.cells.len());
        for (s, g, t, c) in self.iter_indexed() {
            cells.push(f(c).map_err(|e| e.context(self.key(s, g, t).to_string()))?);
        }
        Ok(Panel {
            grid: Arc::clone(&self.grid),
            states: self.states.clone(),
            years: self.years.clone(),
            cells,
        })
    }

    /// Sub-panel holding the year indices in `range`.
    pub fn select_years(&self, range: Range<usize>) -> Result<Panel<C>>
    where
        C: Clone,
    {
        if range.start >= range.end || range.end > self.years.len() {
            return Err(Error::domain(format!(
                "year range {range:?} outside a panel of {} years",
                self.years.len()
            )));
        }
        let years = self.years[range.clone()].to_vec();
        let mut cells = Vec::with_capacity(self.states.len() * 2 * years.len());
        for s in 0..self.states.len() {
            for g in Gender::ALL {
                cells.extend_from_slice(&self.series(s, g)[range.clone()]);
            }
        }
        Ok(Panel {
            grid: Arc::clone(&self.grid),
            states: self.states.clone(),
            years,
            cells,
        })
    }

    /// Keep only the given state indices, in the order given.
    pub fn select_states(&self, indices: &[usize]) -> Result<Panel<C>>
    where
        C: Clone,
    {
        if indices.is_empty() || indices.iter().any(|&s| s >= self.states.len()) {
            return Err(Error::domain("invalid state selection"));
        }
        let mut cells = Vec::with_capacity(indices.len() * 2 * self.years.len());
        for &s in indices {
            for g in Gender::ALL {
                cells.extend_from_slice(self.series(s, g));
            }
        }
        Ok(Panel {
            grid: Arc::clone(&self.grid),
            states: indices.iter().map(|&s| self.states[s].clone()).collect(),
            years: self.years.clone(),
            cells,
        })
    }
}

/// Column names of the input table.
#[derive(Debug, Clone)]
pub struct Schema {
    pub state: String,
    pub gender: String,
    pub year: String,
    pub age: String,
    pub dx: String,
    pub qx: String,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            state: "state".into(),
            gender: "gender".into(),
            year: "year".into(),
            age: "age".into(),
            dx: "dx".into(),
            qx: "qx".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub grid: AgeGrid,
    pub radix: f64,
    pub schema: Schema,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            grid: AgeGrid::life_table(),
            radix: DEFAULT_RADIX,
            schema: Schema::default(),
        }
    }
}

struct RawRow {
    age: f64,
    dx: f64,
    qx: Option<f64>,
    row: usize,
}

/// Read a long-format life-table CSV into a rectangular density panel.
///
/// Death counts are rebuilt from `qx` when every age of a cell carries a
/// valid value, otherwise zero counts are floored. Cells whose ages differ
/// from the configured grid are linearly interpolated onto it. Every curve
/// is normalized so its quadrature integral equals the radix.
pub fn load_panel<R: Read>(source: R, options: &LoadOptions) -> Result<DensityPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            row: 1,
            message: format!("missing column {name:?}"),
        })
    };
    let schema = &options.schema;
    let c_state = column(&schema.state)?;
    let c_gender = column(&schema.gender)?;
    let c_year = column(&schema.year)?;
    let c_age = column(&schema.age)?;
    let c_dx = column(&schema.dx)?;
    let c_qx = headers.iter().position(|h| h == schema.qx);

    let mut groups: BTreeMap<(String, Gender, i32), Vec<RawRow>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |idx: usize, name: &str| -> Result<&str> {
            record.get(idx).ok_or_else(|| Error::Parse {
                row,
                message: format!("missing field {name}"),
            })
        };
        let number = |idx: usize, name: &str| -> Result<f64> {
            let raw = field(idx, name)?;
            raw.parse::<f64>().map_err(|_| Error::Parse {
                row,
                message: format!("{name} is not numeric: {raw:?}"),
            })
        };
        let state = field(c_state, "state")?.to_string();
        if state.is_empty() {
            return Err(Error::Parse {
                row,
                message: "empty state".into(),
            });
        }
        let gender: Gender = field(c_gender, "gender")?.parse().map_err(|e: Error| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let year_raw = field(c_year, "year")?;
        let year: i32 = year_raw.parse().map_err(|_| Error::Parse {
            row,
            message: format!("year is not an integer: {year_raw:?}"),
        })?;
        let age = number(c_age, "age")?;
        let dx = number(c_dx, "dx")?;
        if !dx.is_finite() || dx < 0.0 {
            return Err(Error::Parse {
                row,
                message: format!("dx must be finite and nonnegative, got {dx}"),
            });
        }
        let qx = match c_qx {
            Some(idx) => match record.get(idx) {
                Some("") | None => None,
                Some(_) => Some(number(idx, "qx")?),
            },
            None => None,
        };
        groups.entry((state, gender, year)).or_default().push(RawRow { age, dx, qx, row });
    }

    let states: Vec<String> = groups
        .keys()
        .map(|k| k.0.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let years: Vec<i32> = groups
        .keys()
        .map(|k| k.2)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if states.is_empty() {
        return Err(Error::NotEnoughData("input has no data rows".into()));
    }

    let mut missing = Vec::new();
    for state in &states {
        for g in Gender::ALL {
            for &year in &years {
                if !groups.contains_key(&(state.clone(), g, year)) {
                    missing.push(PanelKey {
                        state: state.clone(),
                        gender: g,
                        year,
                    });
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::NotRectangular { missing });
    }

    let grid = Arc::new(options.grid.clone());
    let radix = options.radix;
    Panel::from_fn(Arc::clone(&grid), states.clone(), years.clone(), |s, g, t| {
        let key = PanelKey {
            state: states[s].clone(),
            gender: g,
            year: years[t],
        };
        let rows = groups
            .get_mut(&(key.state.clone(), g, key.year))
            .expect("rectangularity checked");
        rows.sort_by(|a, b| a.age.total_cmp(&b.age));
        for pair in rows.windows(2) {
            if pair[0].age == pair[1].age {
                return Err(Error::DuplicateRow {
                    row: pair[1].row,
                    key: key.clone(),
                    age: pair[1].age,
                });
            }
        }
        build_cell(rows, &grid, radix).map_err(|e| e.context(key.to_string()))
    })
}

fn build_cell(rows: &[RawRow], grid: &Arc<AgeGrid>, radix: f64) -> Result<DensityCurve> {
    let ages: Vec<f64> = rows.iter().map(|r| r.age).collect();
    let qx: Option<Vec<f64>> = rows.iter().map(|r| r.qx).collect();
    let qx = qx.filter(|q| q.iter().all(|v| *v > 0.0 && *v <= 1.0));

    let raw_counts: Vec<f64> = match &qx {
        Some(q) => life_table_deaths(q, radix),
        None => rows.iter().map(|r| r.dx).collect(),
    };
    let on_grid = if grid.same_ages(&ages) {
        raw_counts
    } else {
        interpolate_linear(&ages, &raw_counts, grid.ages())?
    };
    let curve = DensityCurve::new(Arc::clone(grid), on_grid, radix)?;
    if qx.is_some() && curve.is_strictly_positive() {
        curve.normalized()
    } else {
        repair_zero_counts(&curve, None)
    }
}

fn life_table_deaths(qx: &[f64], radix: f64) -> Vec<f64> {
    let mut survivors = radix;
    qx.iter()
        .map(|q| {
            let deaths = survivors * q;
            survivors *= 1.0 - q;
            deaths
        })
        .collect()
}

fn interpolate_linear(xs: &[f64], ys: &[f64], targets: &[f64]) -> Result<Vec<f64>> {
    if xs.len() < 2 {
        return Err(Error::domain("need at least two ages to interpolate"));
    }
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let slack = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
    targets
        .iter()
        .map(|&x| {
            if x < lo - slack || x > hi + slack {
                return Err(Error::domain(format!(
                    "grid age {x} outside the observed ages [{lo}, {hi}]"
                )));
            }
            let j = xs.partition_point(|&a| a <= x).clamp(1, xs.len() - 1);
            let (x0, x1) = (xs[j - 1], xs[j]);
            let frac = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
            Ok(ys[j - 1] + frac * (ys[j] - ys[j - 1]))
        })
        .collect()
}

/// Remove zero death counts so the curve can be log-transformed.
///
/// With `qx`, counts are rebuilt from the life-table recursion
/// `l_{x+1} = l_x (1 - q_x)`, `d_x = l_x q_x`, `l_0 = radix` and returned
/// as is. Without it, zero cells are set to `1e-5 * radix / p` and the
/// remaining cells are rescaled so the integral equals the radix.
pub fn repair_zero_counts(curve: &DensityCurve, qx: Option<&[f64]>) -> Result<DensityCurve> {
    let grid = curve.grid();
    let radix = curve.radix();
    if let Some(qx) = qx {
        if qx.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} qx values for {} ages",
                qx.len(),
                grid.len()
            )));
        }
        if let Some(bad) = qx.iter().find(|q| !(**q > 0.0 && **q <= 1.0)) {
            return Err(Error::domain(format!("qx must lie in (0, 1], got {bad}")));
        }
        return DensityCurve::new(Arc::clone(grid), life_table_deaths(qx, radix), radix);
    }

    let floor = ZERO_FLOOR * radix / grid.len() as f64;
    let weights = grid.weights();
    let (mut zero_mass, mut positive_mass) = (0.0, 0.0);
    for (w, v) in weights.iter().zip(curve.values()) {
        if *v > 0.0 {
            positive_mass += w * v;
        } else {
            zero_mass += w * floor;
        }
    }
    if positive_mass == 0.0 {
        let level = radix / grid.span();
        return DensityCurve::new(Arc::clone(grid), vec![level; grid.len()], radix);
    }
    let scale = (radix - zero_mass) / positive_mass;
    if !(scale > 0.0) {
        return Err(Error::Numerical("zero floor exceeds the radix".into()));
    }
    let values = curve
        .values()
        .iter()
        .map(|v| if *v > 0.0 { v * scale } else { floor })
        .collect();
    DensityCurve::new(Arc::clone(grid), values, radix)
}

/// Gini coefficient of the age-at-death distribution,
/// `sum_i sum_j w_i w_j d_i d_j |x_i - x_j| / (2 mu (sum_i w_i d_i)^2)`.
pub fn gini_coefficient(curve: &DensityCurve) -> Result<f64> {
    let grid = curve.grid();
    let mass: Vec<f64> = grid
        .weights()
        .iter()
        .zip(curve.values())
        .map(|(w, d)| w * d)
        .collect();
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) {
        return Err(Error::domain("Gini coefficient of a curve with zero mass"));
    }
    let mean_age = mass.iter().zip(grid.ages()).map(|(m, x)| m * x).sum::<f64>() / total;
    if !(mean_age > 0.0) {
        return Err(Error::domain("Gini coefficient needs a positive mean age at death"));
    }
    // Ages are sorted, so |x_i - x_j| splits into prefix sums.
    let (mut below_mass, mut below_moment, mut pair_sum) = (0.0, 0.0, 0.0);
    for (m, x) in mass.iter().zip(grid.ages()) {
        pair_sum += m * (x * below_mass - below_moment);
        below_mass += m;
        below_moment += m * x;
    }
    Ok(2.0 * pair_sum / (2.0 * mean_age * total * total))
}

/// Gini coefficient of every curve in the panel, in storage order.
pub fn gini_summary(panel: &DensityPanel) -> Result<Vec<(PanelKey, f64)>> {
    panel
        .iter_indexed()
        .map(|(s, g, t, curve)| {
            let key = panel.key(s, g, t);
            gini_coefficient(curve)
                .map(|v| (key.clone(), v))
                .map_err(|e| e.context(key.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_grid(last: u32) -> Arc<AgeGrid> {
        Arc::new(AgeGrid::unit(0, last).unwrap())
    }

    fn csv_panel(states: &[&str], years: &[i32], skip: Option<(&str, Gender, i32)>) -> String {
        let mut out = String::from("state,gender,year,age,dx\n");
        for st in states {
            for g in Gender::ALL {
                for y in years {
                    if skip == Some((st, g, *y)) {
                        continue;
                    }
                    for age in 0..=110 {
                        let dx = 1.0 + (age as f64 - 80.0).powi(2).recip().min(5.0) * 100.0;
                        out.push_str(&format!("{st},{g},{y},{age},{dx}\n"));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn trapezoid_weights_sum_to_span() {
        let grid = AgeGrid::new(vec![0.0, 1.0, 3.0, 7.0]).unwrap();
        assert_eq!(grid.weights(), &[0.5, 1.5, 3.0, 2.0]);
        assert!((grid.weights().iter().sum::<f64>() - grid.span()).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_bad_ages() {
        assert!(AgeGrid::new(vec![1.0]).is_err());
        assert!(AgeGrid::new(vec![0.0, 0.0, 1.0]).is_err());
        assert!(AgeGrid::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn loads_well_formed_panel() {
        let text = csv_panel(&["AK", "AL"], &[2000, 2001, 2002], None);
        let panel = load_panel(text.as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!(panel.cells().len(), 12);
        assert_eq!(panel.n_states(), 2);
        assert_eq!(panel.years(), &[2000, 2001, 2002]);
        assert_eq!(panel.grid().len(), 111);
        for curve in panel.cells() {
            assert!((curve.integral() - DEFAULT_RADIX).abs() <= 1e-8 * DEFAULT_RADIX);
            assert!(curve.is_strictly_positive());
        }
    }

    #[test]
    fn missing_cell_is_named() {
        let text = csv_panel(&["AK", "AL"], &[2000, 2001], Some(("AL", Gender::M, 2001)));
        let err = load_panel(text.as_bytes(), &LoadOptions::default()).unwrap_err();
        match err {
            Error::NotRectangular { missing } => {
                assert_eq!(
                    missing,
                    vec![PanelKey {
                        state: "AL".into(),
                        gender: Gender::M,
                        year: 2001
                    }]
                );
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn duplicate_and_non_numeric_rows_rejected() {
        let mut text = csv_panel(&["AK", "AL"], &[2000], None);
        text.push_str("AK,F,2000,5,3.0\n");
        assert!(matches!(
            load_panel(text.as_bytes(), &LoadOptions::default()),
            Err(Error::DuplicateRow { .. })
        ));

        let text = "state,gender,year,age,dx\nAK,F,2000,0,abc\n";
        match load_panel(text.as_bytes(), &LoadOptions::default()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn interpolates_coarse_ages_onto_grid() {
        let mut text = String::from("state,gender,year,age,dx\n");
        for st in ["A", "B"] {
            for g in ["F", "M"] {
                for age in (0..=110).step_by(10) {
                    text.push_str(&format!("{st},{g},1990,{age},{}\n", 1 + age));
                }
            }
        }
        let panel = load_panel(text.as_bytes(), &LoadOptions::default()).unwrap();
        let curve = panel.cell(0, Gender::F, 0);
        let v = curve.values();
        // linear in age before normalization, so equal spacing stays linear
        assert!(((v[5] - v[0]) - (v[10] - v[5])).abs() < 1e-9);
        assert!((curve.integral() - DEFAULT_RADIX).abs() < 1e-6);
    }

    #[test]
    fn qx_column_rebuilds_counts() {
        let mut text = String::from("state,gender,year,age,dx,qx\n");
        for st in ["A", "B"] {
            for g in ["F", "M"] {
                for age in 0..=110 {
                    let q = if age == 110 { 1.0 } else { 0.01 + age as f64 * 0.005 };
                    let q: f64 = q.min(1.0);
                    text.push_str(&format!("{st},{g},2000,{age},0,{q}\n"));
                }
            }
        }
        let panel = load_panel(text.as_bytes(), &LoadOptions::default()).unwrap();
        assert!(panel.cells().iter().all(|c| c.is_strictly_positive()));
    }

    #[test]
    fn life_table_recursion_hand_case() {
        let grid = unit_grid(1);
        let curve = DensityCurve::new(grid, vec![0.0, 0.0], DEFAULT_RADIX).unwrap();
        let fixed = repair_zero_counts(&curve, Some(&[0.5, 1.0])).unwrap();
        assert_eq!(fixed.values(), &[50_000.0, 50_000.0]);
    }

    #[test]
    fn qx_outside_unit_interval_is_domain_error() {
        let curve = DensityCurve::new(unit_grid(1), vec![1.0, 1.0], DEFAULT_RADIX).unwrap();
        assert!(matches!(
            repair_zero_counts(&curve, Some(&[0.0, 1.0])),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            repair_zero_counts(&curve, Some(&[0.5, 1.5])),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn zero_cell_gets_floor_and_mass_restored() {
        let grid = unit_grid(10);
        let mut values = vec![1000.0; 11];
        values[10] = 0.0;
        let curve = DensityCurve::new(Arc::clone(&grid), values, DEFAULT_RADIX).unwrap();
        let fixed = repair_zero_counts(&curve, None).unwrap();
        let floor = 1e-5 * DEFAULT_RADIX / 11.0;
        assert_eq!(fixed.values()[10], floor);
        assert!((fixed.integral() - DEFAULT_RADIX).abs() < 1e-8 * DEFAULT_RADIX);
    }

    #[test]
    fn no_zero_curve_only_renormalized() {
        let grid = unit_grid(4);
        let curve = DensityCurve::new(grid, vec![1.0, 2.0, 3.0, 2.0, 1.0], DEFAULT_RADIX).unwrap();
        let fixed = repair_zero_counts(&curve, None).unwrap();
        let expected = curve.normalized().unwrap();
        for (a, b) in fixed.values().iter().zip(expected.values()) {
            assert!((a - b).abs() < 1e-9 * b);
        }
    }

    /// Direct double sum over all pairs of ages.
    fn gini_double_sum(ages: &[f64], weights: &[f64], d: &[f64]) -> f64 {
        let total: f64 = weights.iter().zip(d).map(|(w, v)| w * v).sum();
        let mean = weights.iter().zip(d).zip(ages).map(|((w, v), x)| w * v * x).sum::<f64>() / total;
        let mut acc = 0.0;
        for i in 0..ages.len() {
            for j in 0..ages.len() {
                acc += weights[i] * weights[j] * d[i] * d[j] * (ages[i] - ages[j]).abs();
            }
        }
        acc / (2.0 * mean * total * total)
    }

    #[test]
    fn gini_point_mass_is_zero() {
        let mut values = vec![0.0; 11];
        values[7] = 5.0;
        let curve = DensityCurve::new(unit_grid(10), values, DEFAULT_RADIX).unwrap();
        assert_eq!(gini_coefficient(&curve).unwrap(), 0.0);
    }

    #[test]
    fn gini_two_point_masses_match_double_sum() {
        // interior ages of a unit grid carry weight one
        let grid = unit_grid(8);
        let mut values = vec![0.0; 9];
        values[2] = 1.0;
        values[6] = 1.0;
        let curve = DensityCurve::new(Arc::clone(&grid), values.clone(), DEFAULT_RADIX).unwrap();
        let oracle = gini_double_sum(grid.ages(), grid.weights(), &values);
        assert!((oracle - 0.25).abs() < 1e-15);
        assert!((gini_coefficient(&curve).unwrap() - oracle).abs() < 1e-15);
    }

    #[test]
    fn gini_mass_at_age_zero_is_domain_error() {
        let mut values = vec![0.0; 5];
        values[0] = 1.0;
        let curve = DensityCurve::new(unit_grid(4), values, DEFAULT_RADIX).unwrap();
        assert!(matches!(gini_coefficient(&curve), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn gini_matches_double_sum_and_is_scale_free(
            values in prop::collection::vec(0.0f64..100.0, 12),
            scale in 1e-3f64..1e3,
        ) {
            prop_assume!(values[1..].iter().sum::<f64>() > 1e-3);
            let grid = unit_grid(11);
            let curve = DensityCurve::new(Arc::clone(&grid), values.clone(), DEFAULT_RADIX).unwrap();
            let g = gini_coefficient(&curve).unwrap();
            let oracle = gini_double_sum(grid.ages(), grid.weights(), &values);
            prop_assert!((g - oracle).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&g));
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let curve2 = DensityCurve::new(grid, scaled, DEFAULT_RADIX).unwrap();
            prop_assert!((gini_coefficient(&curve2).unwrap() - g).abs() < 1e-12);
        }

        #[test]
        fn zero_repair_is_idempotent(
            values in prop::collection::vec(prop_oneof![Just(0.0), 1e-3f64..1e4], 15),
        ) {
            let curve = DensityCurve::new(unit_grid(14), values, DEFAULT_RADIX).unwrap();
            let once = repair_zero_counts(&curve, None).unwrap();
            let twice = repair_zero_counts(&once, None).unwrap();
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
            prop_assert!(once.is_strictly_positive());
        }
    }
}
