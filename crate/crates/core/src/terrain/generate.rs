use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::heightfield::{CellKind, Heightfield};
use crate::error::{Error, Result};

/// Cell edge length of every generated terrain, half the heightmap pitch.
pub const GENERATION_RESOLUTION: f64 = 0.05;
pub const MAX_LEVEL: u8 = 9;

/// Terrain families that have their own generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomicKind {
    Smooth,
    Rough,
    Discrete,
    StairsUp,
    StairsDown,
    Stones,
    Beams,
    Pallets,
    Circles,
    SmallStones,
    Pits,
    Gaps,
}

impl AtomicKind {
    pub const ALL: [AtomicKind; 12] = [
        AtomicKind::Smooth,
        AtomicKind::Rough,
        AtomicKind::Discrete,
        AtomicKind::StairsUp,
        AtomicKind::StairsDown,
        AtomicKind::Stones,
        AtomicKind::Beams,
        AtomicKind::Pallets,
        AtomicKind::Circles,
        AtomicKind::SmallStones,
        AtomicKind::Pits,
        AtomicKind::Gaps,
    ];

    /// The six curriculum terrains seen in training.
    pub const TRAINING: [AtomicKind; 6] = [
        AtomicKind::Smooth,
        AtomicKind::Rough,
        AtomicKind::Discrete,
        AtomicKind::StairsUp,
        AtomicKind::StairsDown,
        AtomicKind::Stones,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AtomicKind::Smooth => "smooth",
            AtomicKind::Rough => "rough",
            AtomicKind::Discrete => "discrete",
            AtomicKind::StairsUp => "stairs_up",
            AtomicKind::StairsDown => "stairs_down",
            AtomicKind::Stones => "stones",
            AtomicKind::Beams => "beams",
            AtomicKind::Pallets => "pallets",
            AtomicKind::Circles => "circles",
            AtomicKind::SmallStones => "small_stones",
            AtomicKind::Pits => "pits",
            AtomicKind::Gaps => "gaps",
        }
    }
}

impl FromStr for AtomicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        let kind = match s.as_str() {
            "smooth" | "flat" => AtomicKind::Smooth,
            "rough" | "r" => AtomicKind::Rough,
            "discrete" => AtomicKind::Discrete,
            "stairs_up" | "stairsup" | "su" => AtomicKind::StairsUp,
            "stairs_down" | "stairsdown" | "sd" => AtomicKind::StairsDown,
            "stones" | "s" => AtomicKind::Stones,
            "beams" => AtomicKind::Beams,
            "pallets" => AtomicKind::Pallets,
            "circles" => AtomicKind::Circles,
            "small_stones" | "smallstones" => AtomicKind::SmallStones,
            "pits" => AtomicKind::Pits,
            "gaps" => AtomicKind::Gaps,
            _ => return Err(Error::InvalidArgument(format!("unknown terrain kind `{s}`"))),
        };
        Ok(kind)
    }
}

/// A terrain family, possibly the superposition of two atomic ones.
///
/// Combos hold atomic kinds only, so nesting is unrepresentable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TerrainKind {
    Atomic(AtomicKind),
    Combo(AtomicKind, AtomicKind),
}

impl From<AtomicKind> for TerrainKind {
    fn from(kind: AtomicKind) -> Self {
        TerrainKind::Atomic(kind)
    }
}

impl fmt::Display for TerrainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerrainKind::Atomic(k) => f.write_str(k.name()),
            TerrainKind::Combo(a, b) => write!(f, "{}+{}", a.name(), b.name()),
        }
    }
}

impl FromStr for TerrainKind {
    type Err = Error;

    /// `stones`, or `stones+rough` for a combo.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('+').collect();
        match parts.as_slice() {
            [one] => Ok(TerrainKind::Atomic(one.parse()?)),
            [a, b] => Ok(TerrainKind::Combo(a.parse()?, b.parse()?)),
            _ => Err(Error::InvalidArgument(format!(
                "combo terrains take exactly two atomic kinds, got `{s}`"
            ))),
        }
    }
}

impl TryFrom<String> for TerrainKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TerrainKind> for String {
    fn from(kind: TerrainKind) -> Self {
        kind.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerrainSpec {
    pub kind: TerrainKind,
    pub level: u8,
    /// Field size along world x and y, meters.
    pub extent: [f64; 2],
    pub seed: u64,
    /// Half-width of the flat spawn square centered on the world origin.
    pub platform_margin: f64,
}

impl TerrainSpec {
    pub fn new(kind: impl Into<TerrainKind>, level: u8, seed: u64) -> Self {
        TerrainSpec {
            kind: kind.into(),
            level,
            extent: [12.0, 8.0],
            seed,
            platform_margin: 1.0,
        }
    }

    pub fn with_extent(mut self, extent: [f64; 2]) -> Self {
        self.extent = extent;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_level(self.level)?;
        if !(self.platform_margin >= 0.0) || !self.platform_margin.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "platform margin must be non-negative, got {}",
                self.platform_margin
            )));
        }
        for (axis, &e) in ["x", "y"].iter().zip(&self.extent) {
            if !e.is_finite() || e < 2.0 * self.platform_margin || e < GENERATION_RESOLUTION {
                return Err(Error::InvalidArgument(format!(
                    "extent {axis} = {e} m is smaller than twice the platform margin ({} m)",
                    self.platform_margin
                )));
            }
        }
        Ok(())
    }
}

fn check_level(level: u8) -> Result<()> {
    if level > MAX_LEVEL {
        return Err(Error::InvalidArgument(format!(
            "difficulty level must be in 0..=9, got {level}"
        )));
    }
    Ok(())
}

/// Stepping-stone layout for one difficulty level, meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoneParams {
    pub stone_size: f64,
    pub stone_gap: f64,
    pub max_shift: f64,
    pub max_height: f64,
}

/// Level-0 row of the stone difficulty table.
pub const STONES_EASIEST: StoneParams = StoneParams {
    stone_size: 0.92,
    stone_gap: 0.025,
    max_shift: 0.0,
    max_height: 0.01,
};

/// Level-9 row of the stone difficulty table.
pub const STONES_HARDEST: StoneParams = StoneParams {
    stone_size: 0.40,
    stone_gap: 0.20,
    max_shift: 0.10,
    max_height: 0.10,
};

/// Linear blend of `easy` (level 0) and `hard` (level 9) values.
fn by_level(easy: f64, hard: f64, level: u8) -> f64 {
    match level {
        0 => easy,
        MAX_LEVEL => hard,
        l => easy + (hard - easy) * f64::from(l) / f64::from(MAX_LEVEL),
    }
}

/// Stone parameters for a difficulty level; intermediate levels interpolate
/// linearly between the table's endpoint rows.
pub fn stones_params(level: u8) -> Result<StoneParams> {
    check_level(level)?;
    let (a, b) = (STONES_EASIEST, STONES_HARDEST);
    Ok(StoneParams {
        stone_size: by_level(a.stone_size, b.stone_size, level),
        stone_gap: by_level(a.stone_gap, b.stone_gap, level),
        max_shift: by_level(a.max_shift, b.max_shift, level),
        max_height: by_level(a.max_height, b.max_height, level),
    })
}

/// A quantity that scales linearly from level 0 to level 9.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub easy: f64,
    pub hard: f64,
}

impl Ramp {
    pub const fn new(easy: f64, hard: f64) -> Self {
        Ramp { easy, hard }
    }

    pub fn at(&self, level: u8) -> f64 {
        by_level(self.easy, self.hard, level.min(MAX_LEVEL))
    }
}

/// Generator parameters for every terrain family.
///
/// Every hazard quantity is a [`Ramp`] over difficulty, so hazard grows
/// monotonically with level as long as each ramp does.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerrainConfig {
    /// Uniform noise amplitude of `rough`, m.
    pub rough_amplitude: Ramp,
    /// Edge of the square noise patches of `rough`, m.
    pub rough_patch: f64,
    /// Block height bound of `discrete`, m; heights are uniform in `[-h, h]`.
    pub discrete_height: Ramp,
    /// Block edge range of `discrete`, m.
    pub discrete_block_size: [f64; 2],
    /// Blocks per square meter of `discrete`.
    pub discrete_density: f64,
    pub stair_width: f64,
    pub stair_rise: Ramp,
    /// Width of longitudinal beams (along x), m.
    pub beam_width: Ramp,
    pub beam_gap: Ramp,
    /// Width of transverse pallet slats (along y), m.
    pub pallet_width: Ramp,
    pub pallet_gap: Ramp,
    pub circle_radius: Ramp,
    pub circle_gap: Ramp,
    pub circle_shift: Ramp,
    pub circle_height: Ramp,
    /// Scale applied to stone size and gap for `small_stones`.
    pub small_stone_scale: f64,
    pub pit_size: Ramp,
    /// Pits per square meter.
    pub pit_density: f64,
    /// Width of transverse gaps, m.
    pub gap_width: Ramp,
    /// Distance between consecutive gap centers, m.
    pub gap_spacing: f64,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        TerrainConfig {
            rough_amplitude: Ramp::new(0.01, 0.10),
            rough_patch: 0.1,
            discrete_height: Ramp::new(0.02, 0.20),
            discrete_block_size: [0.4, 1.0],
            discrete_density: 0.3,
            stair_width: 0.31,
            stair_rise: Ramp::new(0.03, 0.21),
            beam_width: Ramp::new(0.40, 0.15),
            beam_gap: Ramp::new(0.10, 0.35),
            pallet_width: Ramp::new(0.30, 0.12),
            pallet_gap: Ramp::new(0.05, 0.30),
            circle_radius: Ramp::new(0.35, 0.15),
            circle_gap: Ramp::new(0.05, 0.30),
            circle_shift: Ramp::new(0.0, 0.10),
            circle_height: Ramp::new(0.0, 0.08),
            small_stone_scale: 0.5,
            pit_size: Ramp::new(0.20, 0.65),
            pit_density: 0.25,
            gap_width: Ramp::new(0.05, 0.50),
            gap_spacing: 1.0,
        }
    }
}

/// Generates a terrain with the default generator configuration.
pub fn generate_terrain(spec: &TerrainSpec) -> Result<Heightfield> {
    generate_terrain_with(spec, &TerrainConfig::default())
}

pub fn generate_terrain_with(spec: &TerrainSpec, config: &TerrainConfig) -> Result<Heightfield> {
    spec.validate()?;
    let res = GENERATION_RESOLUTION;
    let cols = (spec.extent[0] / res).round().max(1.0) as usize;
    let rows = (spec.extent[1] / res).round().max(1.0) as usize;
    let origin = [
        -0.5 * cols as f64 * res + 0.5 * res,
        -0.5 * rows as f64 * res + 0.5 * res,
    ];
    let mut canvas = Canvas::new(origin, res, rows, cols);

    match spec.kind {
        TerrainKind::Atomic(kind) => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            paint(&mut canvas, kind, spec, config, &mut rng)?;
        }
        TerrainKind::Combo(a, b) => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            paint(&mut canvas, a, spec, config, &mut rng)?;
            let mut overlay = Canvas::new(origin, res, rows, cols);
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
            paint(&mut overlay, b, spec, config, &mut rng)?;
            canvas.superimpose(&overlay);
        }
    }

    canvas.flatten_platform(spec.platform_margin);
    canvas.finish()
}

struct Canvas {
    origin: [f64; 2],
    res: f64,
    rows: usize,
    cols: usize,
    heights: Vec<f64>,
    void: Vec<bool>,
}

impl Canvas {
    fn new(origin: [f64; 2], res: f64, rows: usize, cols: usize) -> Self {
        Canvas {
            origin,
            res,
            rows,
            cols,
            heights: vec![0.0; rows * cols],
            void: vec![false; rows * cols],
        }
    }

    fn x(&self, col: usize) -> f64 {
        self.origin[0] + col as f64 * self.res
    }

    fn y(&self, row: usize) -> f64 {
        self.origin[1] + row as f64 * self.res
    }

    fn x_range(&self) -> (f64, f64) {
        (self.x(0), self.x(self.cols - 1))
    }

    fn y_range(&self) -> (f64, f64) {
        (self.y(0), self.y(self.rows - 1))
    }

    fn fill_void(&mut self) {
        self.void.fill(true);
    }

    /// Applies `f(x, y)` to every cell center.
    fn for_each(&mut self, mut f: impl FnMut(f64, f64, &mut f64, &mut bool)) {
        for row in 0..self.rows {
            let y = self.y(row);
            for col in 0..self.cols {
                let i = row * self.cols + col;
                f(self.x(col), y, &mut self.heights[i], &mut self.void[i]);
            }
        }
    }

    /// Cell index range whose centers fall in `[lo, hi]` along one axis.
    fn span(&self, lo: f64, hi: f64, origin: f64, n: usize) -> Option<(usize, usize)> {
        let first = ((lo - origin) / self.res).ceil().max(0.0);
        let last = ((hi - origin) / self.res).floor().min(n as f64 - 1.0);
        (first <= last).then_some((first as usize, last as usize))
    }

    /// Sets an axis-aligned rectangle of cells to a solid height.
    fn solid_rect(&mut self, center: [f64; 2], half: [f64; 2], height: f64) {
        let Some((c0, c1)) = self.span(center[0] - half[0], center[0] + half[0], self.origin[0], self.cols) else {
            return;
        };
        let Some((r0, r1)) = self.span(center[1] - half[1], center[1] + half[1], self.origin[1], self.rows) else {
            return;
        };
        for row in r0..=r1 {
            for col in c0..=c1 {
                let i = row * self.cols + col;
                self.heights[i] = height;
                self.void[i] = false;
            }
        }
    }

    fn void_rect(&mut self, center: [f64; 2], half: [f64; 2]) {
        let Some((c0, c1)) = self.span(center[0] - half[0], center[0] + half[0], self.origin[0], self.cols) else {
            return;
        };
        let Some((r0, r1)) = self.span(center[1] - half[1], center[1] + half[1], self.origin[1], self.rows) else {
            return;
        };
        for row in r0..=r1 {
            for col in c0..=c1 {
                self.void[row * self.cols + col] = true;
            }
        }
    }

    fn solid_disc(&mut self, center: [f64; 2], radius: f64, height: f64) {
        let Some((c0, c1)) = self.span(center[0] - radius, center[0] + radius, self.origin[0], self.cols) else {
            return;
        };
        let Some((r0, r1)) = self.span(center[1] - radius, center[1] + radius, self.origin[1], self.rows) else {
            return;
        };
        for row in r0..=r1 {
            let dy = self.y(row) - center[1];
            for col in c0..=c1 {
                let dx = self.x(col) - center[0];
                if dx * dx + dy * dy <= radius * radius {
                    let i = row * self.cols + col;
                    self.heights[i] = height;
                    self.void[i] = false;
                }
            }
        }
    }

    fn superimpose(&mut self, other: &Canvas) {
        for i in 0..self.heights.len() {
            self.heights[i] += other.heights[i];
            self.void[i] |= other.void[i];
        }
    }

    /// Forces every cell whose center lies within `margin` (plus one cell) of
    /// the origin along both axes to solid ground at height 0.
    fn flatten_platform(&mut self, margin: f64) {
        let reach = margin + self.res;
        self.for_each(|x, y, h, void| {
            if x.abs() <= reach && y.abs() <= reach {
                *h = 0.0;
                *void = false;
            }
        });
    }

    fn finish(mut self) -> Result<Heightfield> {
        let mut kinds = Vec::with_capacity(self.void.len());
        for (h, &void) in self.heights.iter_mut().zip(&self.void) {
            if void {
                *h = 0.0;
                kinds.push(CellKind::Void);
            } else {
                kinds.push(CellKind::Solid);
            }
        }
        Heightfield::new(self.origin, self.res, self.rows, self.cols, self.heights, kinds)
    }
}

fn paint(
    canvas: &mut Canvas,
    kind: AtomicKind,
    spec: &TerrainSpec,
    cfg: &TerrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let level = spec.level;
    let platform = spec.platform_margin + canvas.res;
    match kind {
        AtomicKind::Smooth => {}
        AtomicKind::Rough => rough(canvas, cfg.rough_amplitude.at(level), cfg.rough_patch, rng),
        AtomicKind::Discrete => discrete(canvas, level, cfg, rng),
        AtomicKind::StairsUp => stairs(canvas, platform, cfg.stair_width, cfg.stair_rise.at(level)),
        AtomicKind::StairsDown => stairs(canvas, platform, cfg.stair_width, -cfg.stair_rise.at(level)),
        AtomicKind::Stones => stones(canvas, &stones_params(level)?, rng),
        AtomicKind::SmallStones => {
            let mut p = stones_params(level)?;
            p.stone_size *= cfg.small_stone_scale;
            p.stone_gap *= cfg.small_stone_scale;
            stones(canvas, &p, rng)
        }
        AtomicKind::Beams => beams(canvas, cfg.beam_width.at(level), cfg.beam_gap.at(level)),
        AtomicKind::Pallets => pallets(canvas, cfg.pallet_width.at(level), cfg.pallet_gap.at(level)),
        AtomicKind::Circles => circles(canvas, level, cfg, rng),
        AtomicKind::Pits => pits(canvas, cfg.pit_size.at(level), cfg.pit_density, rng),
        AtomicKind::Gaps => gaps(canvas, cfg.gap_width.at(level), cfg.gap_spacing),
    }
    Ok(())
}

/// Sample uniformly from `[-bound, bound]`; zero bound draws nothing.
fn symmetric(rng: &mut ChaCha8Rng, bound: f64) -> f64 {
    if bound > 0.0 {
        rng.random_range(-bound..=bound)
    } else {
        0.0
    }
}

fn rough(canvas: &mut Canvas, amplitude: f64, patch: f64, rng: &mut ChaCha8Rng) {
    let (x0, x1) = canvas.x_range();
    let (y0, y1) = canvas.y_range();
    let pcols = ((x1 - x0) / patch).floor() as usize + 1;
    let prows = ((y1 - y0) / patch).floor() as usize + 1;
    let noise: Vec<f64> = (0..pcols * prows).map(|_| symmetric(rng, amplitude)).collect();
    canvas.for_each(|x, y, h, _| {
        let pc = (((x - x0) / patch).floor() as usize).min(pcols - 1);
        let pr = (((y - y0) / patch).floor() as usize).min(prows - 1);
        *h += noise[pr * pcols + pc];
    });
}

fn discrete(canvas: &mut Canvas, level: u8, cfg: &TerrainConfig, rng: &mut ChaCha8Rng) {
    let (x0, x1) = canvas.x_range();
    let (y0, y1) = canvas.y_range();
    let area = (x1 - x0) * (y1 - y0);
    let count = (area * cfg.discrete_density).round() as usize;
    let height = cfg.discrete_height.at(level);
    let [smin, smax] = cfg.discrete_block_size;
    for _ in 0..count {
        let cx = rng.random_range(x0..=x1);
        let cy = rng.random_range(y0..=y1);
        let sx = rng.random_range(smin..=smax);
        let sy = rng.random_range(smin..=smax);
        let h = symmetric(rng, height);
        canvas.solid_rect([cx, cy], [0.5 * sx, 0.5 * sy], h);
    }
}

/// Stairs along world x, climbing (or descending for negative rise) away
/// from the spawn platform in both directions. The first step starts at the
/// platform edge.
fn stairs(canvas: &mut Canvas, start: f64, width: f64, rise: f64) {
    canvas.for_each(|x, _, h, _| {
        let run = x.abs() - start;
        if run > 0.0 {
            *h += (run / width).ceil() * rise;
        }
    });
}

fn stones(canvas: &mut Canvas, p: &StoneParams, rng: &mut ChaCha8Rng) {
    canvas.fill_void();
    let pitch = p.stone_size + p.stone_gap;
    let half = 0.5 * p.stone_size;
    let (x0, x1) = canvas.x_range();
    let (y0, y1) = canvas.y_range();
    let (i0, i1) = ((x0 / pitch).floor() as i64 - 1, (x1 / pitch).ceil() as i64 + 1);
    let (j0, j1) = ((y0 / pitch).floor() as i64 - 1, (y1 / pitch).ceil() as i64 + 1);
    for j in j0..=j1 {
        for i in i0..=i1 {
            let cx = i as f64 * pitch + symmetric(rng, p.max_shift);
            let cy = j as f64 * pitch + symmetric(rng, p.max_shift);
            let h = symmetric(rng, p.max_height);
            canvas.solid_rect([cx, cy], [half, half], h);
        }
    }
}

fn beams(canvas: &mut Canvas, width: f64, gap: f64) {
    let pitch = width + gap;
    canvas.for_each(|_, y, _, void| {
        // Beam centered on y = 0, repeating laterally.
        let offset = (y / pitch).round() * pitch;
        if (y - offset).abs() > 0.5 * width {
            *void = true;
        }
    });
}

fn pallets(canvas: &mut Canvas, width: f64, gap: f64) {
    let pitch = width + gap;
    canvas.for_each(|x, _, _, void| {
        let offset = (x / pitch).round() * pitch;
        if (x - offset).abs() > 0.5 * width {
            *void = true;
        }
    });
}

fn circles(canvas: &mut Canvas, level: u8, cfg: &TerrainConfig, rng: &mut ChaCha8Rng) {
    canvas.fill_void();
    let radius = cfg.circle_radius.at(level);
    let pitch = 2.0 * radius + cfg.circle_gap.at(level);
    let shift = cfg.circle_shift.at(level);
    let height = cfg.circle_height.at(level);
    let (x0, x1) = canvas.x_range();
    let (y0, y1) = canvas.y_range();
    let row_pitch = pitch * 3f64.sqrt() / 2.0;
    let (j0, j1) = ((y0 / row_pitch).floor() as i64 - 1, (y1 / row_pitch).ceil() as i64 + 1);
    let (i0, i1) = ((x0 / pitch).floor() as i64 - 1, (x1 / pitch).ceil() as i64 + 1);
    for j in j0..=j1 {
        // Hexagonal packing: odd rows offset by half a pitch.
        let stagger = if j.rem_euclid(2) == 1 { 0.5 * pitch } else { 0.0 };
        for i in i0..=i1 {
            let cx = i as f64 * pitch + stagger + symmetric(rng, shift);
            let cy = j as f64 * row_pitch + symmetric(rng, shift);
            let h = symmetric(rng, height);
            canvas.solid_disc([cx, cy], radius, h);
        }
    }
}

fn pits(canvas: &mut Canvas, size: f64, density: f64, rng: &mut ChaCha8Rng) {
    let (x0, x1) = canvas.x_range();
    let (y0, y1) = canvas.y_range();
    let count = ((x1 - x0) * (y1 - y0) * density).round() as usize;
    let half = 0.5 * size;
    for _ in 0..count {
        let cx = rng.random_range(x0..=x1);
        let cy = rng.random_range(y0..=y1);
        canvas.void_rect([cx, cy], [half, half]);
    }
}

/// Transverse void bands centered at odd multiples of half the spacing.
fn gaps(canvas: &mut Canvas, width: f64, spacing: f64) {
    canvas.for_each(|x, _, _, void| {
        let shifted = x - 0.5 * spacing;
        let offset = (shifted / spacing).round() * spacing;
        if (shifted - offset).abs() <= 0.5 * width {
            *void = true;
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::Height;

    fn field(kind: impl Into<TerrainKind>, level: u8, seed: u64) -> Heightfield {
        generate_terrain(&TerrainSpec::new(kind, level, seed)).unwrap()
    }

    #[test]
    fn stone_table_endpoints() {
        assert_eq!(stones_params(0).unwrap(), STONES_EASIEST);
        assert_eq!(stones_params(9).unwrap(), STONES_HARDEST);
        let p = stones_params(5).unwrap();
        assert!((p.stone_size - 0.6311).abs() < 1e-4);
        assert!((p.stone_gap - 0.1222).abs() < 1e-4);
        assert!((p.max_shift - 0.0556).abs() < 1e-4);
        assert!((p.max_height - 0.06).abs() < 1e-12);
        assert!(matches!(stones_params(10), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn stones_stay_standable() {
        for level in 0..=9 {
            let p = stones_params(level).unwrap();
            assert!(p.stone_size > p.stone_gap, "level {level}");
            assert!(p.stone_gap >= 0.0 && p.max_shift >= 0.0 && p.max_height >= 0.0);
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("stones".parse::<TerrainKind>().unwrap(), AtomicKind::Stones.into());
        assert_eq!(
            "S+R".parse::<TerrainKind>().unwrap(),
            TerrainKind::Combo(AtomicKind::Stones, AtomicKind::Rough)
        );
        assert!("stones+rough+gaps".parse::<TerrainKind>().is_err());
        assert!("lava".parse::<TerrainKind>().is_err());
        let k = TerrainKind::Combo(AtomicKind::Stones, AtomicKind::StairsUp);
        assert_eq!(k.to_string().parse::<TerrainKind>().unwrap(), k);
    }

    #[test]
    fn extent_must_fit_platform() {
        let spec = TerrainSpec::new(AtomicKind::Smooth, 0, 1).with_extent([1.5, 8.0]);
        assert!(matches!(generate_terrain(&spec), Err(Error::InvalidArgument(_))));
        let mut spec = TerrainSpec::new(AtomicKind::Smooth, 0, 1);
        spec.level = 10;
        assert!(generate_terrain(&spec).is_err());
    }

    #[test]
    fn smooth_is_flat_and_sized() {
        let hf = field(AtomicKind::Smooth, 7, 3);
        assert_eq!(hf.resolution(), GENERATION_RESOLUTION);
        assert_eq!((hf.rows(), hf.cols()), (160, 240));
        assert!(hf.heights().iter().all(|&h| h == 0.0));
        assert!(hf.cell_kinds().iter().all(|&k| k == CellKind::Solid));
        let (lo, hi) = hf.bounds();
        assert!((lo[0] + 6.0).abs() < 1e-9 && (hi[0] - 6.0).abs() < 1e-9);
        assert!((lo[1] + 4.0).abs() < 1e-9 && (hi[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn hardest_stones_have_gaps_and_bounded_tops() {
        let hf = field(AtomicKind::Stones, 9, 42);
        assert!(hf.cell_kinds().iter().any(|&k| k == CellKind::Void));
        for (h, k) in hf.heights().iter().zip(hf.cell_kinds()) {
            if *k == CellKind::Solid {
                assert!(h.abs() <= 0.10 + 1e-12, "stone top {h}");
            }
        }
    }

    #[test]
    fn stair_rise_matches_level() {
        let cfg = TerrainConfig::default();
        for level in [0, 4, 9] {
            let hf = field(AtomicKind::StairsUp, level, 0);
            let rise = cfg.stair_rise.at(level);
            let row = hf.rows() / 2;
            for col in 1..hf.cols() {
                let (Height::Solid(a), Height::Solid(b)) = (hf.cell(row, col - 1), hf.cell(row, col)) else {
                    panic!("stairs are solid");
                };
                let step = (b - a).abs();
                assert!(step < 1e-12 || (step - rise).abs() < 1e-12, "step {step} vs rise {rise}");
            }
            // Far end is higher than the platform.
            assert!(matches!(hf.cell(row, hf.cols() - 1), Height::Solid(h) if h > 0.0));
        }
        let down = field(AtomicKind::StairsDown, 5, 0);
        assert!(matches!(down.cell(down.rows() / 2, 0), Height::Solid(h) if h < 0.0));
    }

    #[test]
    fn gap_width_follows_level() {
        let cfg = TerrainConfig::default();
        for level in 0..=9 {
            assert!((cfg.gap_width.at(level) - 0.05 * f64::from(level + 1)).abs() < 1e-12);
        }
        let hf = field(AtomicKind::Gaps, 9, 0);
        // First gap band beyond the platform is centered at x = 1.5.
        assert_eq!(hf.height_at(1.5, 0.0).unwrap(), Height::Void);
        assert_eq!(hf.height_at(2.0, 0.0).unwrap(), Height::Solid(0.0));
    }

    #[test]
    fn every_kind_generates_with_safe_spawn() {
        for kind in AtomicKind::ALL {
            for level in [0, 9] {
                let spec = TerrainSpec::new(kind, level, 11);
                let hf = generate_terrain(&spec).unwrap();
                for row in 0..hf.rows() {
                    for col in 0..hf.cols() {
                        let [x, y] = hf.cell_center(row, col);
                        if x.hypot(y) <= spec.platform_margin {
                            assert_eq!(hf.cell(row, col), Height::Solid(0.0), "{kind:?} level {level}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn combo_superimposes_roughness_on_stones() {
        let stones_only = field(AtomicKind::Stones, 4, 5);
        let combo = field(TerrainKind::Combo(AtomicKind::Stones, AtomicKind::Rough), 4, 5);
        // The stone layout is driven by the same seed, so voids coincide.
        assert_eq!(stones_only.cell_kinds(), combo.cell_kinds());
        assert_ne!(stones_only.heights(), combo.heights());
        let amp = TerrainConfig::default().rough_amplitude.at(4);
        for (a, b) in stones_only.heights().iter().zip(combo.heights()) {
            assert!((a - b).abs() <= amp + 1e-12);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for kind in AtomicKind::ALL {
            let a = field(kind, 6, 99);
            let b = field(kind, 6, 99);
            assert_eq!(a, b, "{kind:?}");
        }
        assert_ne!(field(AtomicKind::Stones, 6, 1), field(AtomicKind::Stones, 6, 2));
    }
}
