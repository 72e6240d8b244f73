//! A 2D world of scalar-valued elements with movable square objects, sensed
//! through a 3×3 window.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{quantize, MotorCommand, MotorOutcome, MotorSpace, World, WorldError};
use crate::rng::StreamRng;
use crate::sample::{HiddenLabel, MotorState, SensoryInput};

pub const SENSOR_SIDE: usize = 3;
const PLACEMENT_TRIES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridWorldConfig {
    pub width: usize,
    pub height: usize,
    pub toroidal: bool,
    pub n_objects: usize,
    pub object_side: usize,
    pub decimals: u32,
    /// Probability that a new scene gets a freshly drawn background.
    pub p_env_redraw: f64,
    /// Motor commands as `(dx, dy)` element steps.
    pub deltas: Vec<(i64, i64)>,
    /// Whether objects in scenes after the first may overlap.
    pub allow_overlap: bool,
}

impl Default for GridWorldConfig {
    fn default() -> Self {
        Self {
            width: 100,
            height: 100,
            toroidal: true,
            n_objects: 3,
            object_side: 20,
            decimals: 3,
            p_env_redraw: 0.05,
            deltas: vec![(1, 0), (-1, 0), (0, 1), (0, -1)],
            allow_overlap: true,
        }
    }
}

impl GridWorldConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.width < SENSOR_SIDE || self.height < SENSOR_SIDE {
            return Err(WorldError::Config(
                "the 3x3 sensor does not fit in the world".into(),
            ));
        }
        if self.n_objects > 0
            && (self.object_side == 0 || self.object_side > self.width.min(self.height))
        {
            return Err(WorldError::Config(format!(
                "object side {} does not fit the world",
                self.object_side
            )));
        }
        if !(0.0..=1.0).contains(&self.p_env_redraw) {
            return Err(WorldError::Config("p_env_redraw outside [0, 1]".into()));
        }
        if self.deltas.is_empty() {
            return Err(WorldError::Config(
                "at least one motor delta is required".into(),
            ));
        }
        Ok(())
    }

    pub fn quantize(&self, v: f64) -> f64 {
        quantize(v, self.decimals)
    }
}

/// Square block of element values, fixed once per experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectPatch {
    pub side: usize,
    pub values: Vec<f64>,
}

pub fn draw_patches(cfg: &GridWorldConfig, rng: &mut StreamRng) -> Vec<ObjectPatch> {
    let n = cfg.object_side * cfg.object_side;
    (0..cfg.n_objects)
        .map(|_| ObjectPatch {
            side: cfg.object_side,
            values: (0..n).map(|_| cfg.quantize(rng.gen())).collect(),
        })
        .collect()
}

pub fn draw_background(cfg: &GridWorldConfig, rng: &mut StreamRng) -> Vec<f64> {
    (0..cfg.width * cfg.height)
        .map(|_| cfg.quantize(rng.gen()))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridScene {
    width: usize,
    height: usize,
    toroidal: bool,
    values: Vec<f64>,
    /// Which object painted each element last, if any.
    owner: Vec<Option<usize>>,
    placements: Vec<(usize, usize)>,
}

impl GridScene {
    pub fn from_background(cfg: &GridWorldConfig, background: &[f64]) -> Result<Self, WorldError> {
        if background.len() != cfg.width * cfg.height {
            return Err(WorldError::Config(
                "background size does not match the world".into(),
            ));
        }
        Ok(Self {
            width: cfg.width,
            height: cfg.height,
            toroidal: cfg.toroidal,
            values: background.to_vec(),
            owner: vec![None; background.len()],
            placements: Vec::new(),
        })
    }

    /// Paints `patch` with its top-left corner at `(x, y)`, over anything
    /// already there.
    pub fn paint(
        &mut self,
        object: usize,
        patch: &ObjectPatch,
        x: usize,
        y: usize,
    ) -> Result<(), WorldError> {
        if !self.toroidal && (x + patch.side > self.width || y + patch.side > self.height) {
            return Err(WorldError::Position(format!(
                "object at ({x}, {y}) leaves the world"
            )));
        }
        for r in 0..patch.side {
            for c in 0..patch.side {
                let idx = ((y + r) % self.height) * self.width + (x + c) % self.width;
                self.values[idx] = patch.values[r * patch.side + c];
                self.owner[idx] = Some(object);
            }
        }
        self.placements.push((x, y));
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn value(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn placements(&self) -> &[(usize, usize)] {
        &self.placements
    }

    pub fn owner(&self, x: usize, y: usize) -> Option<usize> {
        self.owner[y * self.width + x]
    }

    /// Element coordinates covered by the sensor centred at `pos`, row-major.
    fn window(&self, pos: (usize, usize)) -> Result<[(usize, usize); 9], WorldError> {
        let (x, y) = pos;
        if x >= self.width || y >= self.height {
            return Err(WorldError::Position(format!(
                "({x}, {y}) outside the world"
            )));
        }
        if !self.toroidal && (x == 0 || y == 0 || x + 1 >= self.width || y + 1 >= self.height) {
            return Err(WorldError::Position(format!(
                "sensor at ({x}, {y}) leaves the world"
            )));
        }
        let mut cells = [(0, 0); 9];
        for dr in 0..3 {
            for dc in 0..3 {
                let cx = (x + self.width + dc - 1) % self.width;
                let cy = (y + self.height + dr - 1) % self.height;
                cells[dr * 3 + dc] = (cx, cy);
            }
        }
        Ok(cells)
    }

    /// Ground truth at a sensor position: the object whose interior fully
    /// covers the window, the background when no object is visible, or none.
    pub fn truth_at(&self, pos: (usize, usize)) -> Result<HiddenLabel, WorldError> {
        let cells = self.window(pos)?;
        let first = self.owner(cells[0].0, cells[0].1);
        if cells.iter().any(|&(cx, cy)| self.owner(cx, cy) != first) {
            return Ok(HiddenLabel::NONE);
        }
        Ok(match first {
            Some(o) => HiddenLabel::object(o),
            None => HiddenLabel::background(),
        })
    }
}

fn overlaps(
    a: (usize, usize),
    b: (usize, usize),
    side: usize,
    width: usize,
    height: usize,
    toroidal: bool,
) -> bool {
    let axis = |p: usize, q: usize, size: usize| {
        let d = p.abs_diff(q);
        let d = if toroidal { d.min(size - d) } else { d };
        d < side
    };
    axis(a.0, b.0, width) && axis(a.1, b.1, height)
}

fn random_corner(cfg: &GridWorldConfig, rng: &mut StreamRng) -> (usize, usize) {
    if cfg.toroidal {
        (rng.gen_range(0..cfg.width), rng.gen_range(0..cfg.height))
    } else {
        (
            rng.gen_range(0..=cfg.width - cfg.object_side),
            rng.gen_range(0..=cfg.height - cfg.object_side),
        )
    }
}

/// Builds a scene: optionally redraws `background` in place, then places
/// every object at a uniform random position and paints them in index order,
/// so higher-index objects occlude lower ones. With `non_overlap` the
/// placement is rejection-sampled until no two objects intersect.
pub fn grid_build_scene(
    cfg: &GridWorldConfig,
    patches: &[ObjectPatch],
    background: &mut Vec<f64>,
    rng: &mut StreamRng,
    redraw_background: bool,
    non_overlap: bool,
) -> Result<GridScene, WorldError> {
    if redraw_background {
        *background = draw_background(cfg, rng);
    }
    let mut scene = GridScene::from_background(cfg, background)?;
    if patches.is_empty() {
        return Ok(scene);
    }
    let side = patches[0].side;
    let mut corners = Vec::with_capacity(patches.len());
    for attempt in 0.. {
        if attempt == PLACEMENT_TRIES {
            return Err(WorldError::Config(format!(
                "could not place {} objects of side {side} without overlap",
                patches.len()
            )));
        }
        corners.clear();
        corners.extend((0..patches.len()).map(|_| random_corner(cfg, rng)));
        let clash = non_overlap
            && (0..corners.len()).any(|i| {
                (0..i).any(|j| {
                    overlaps(
                        corners[i],
                        corners[j],
                        side,
                        cfg.width,
                        cfg.height,
                        cfg.toroidal,
                    )
                })
            });
        if !clash {
            break;
        }
    }
    for (i, (patch, &(x, y))) in patches.iter().zip(&corners).enumerate() {
        scene.paint(i, patch, x, y)?;
    }
    Ok(scene)
}

/// Row-major 3×3 readings centred at `pos`, wrapping around the torus.
pub fn grid_sense(scene: &GridScene, pos: (usize, usize)) -> Result<SensoryInput, WorldError> {
    let cells = scene.window(pos)?;
    let values = cells.iter().map(|&(x, y)| scene.value(x, y)).collect();
    Ok(SensoryInput::new(values).expect("finite element values"))
}

pub fn contrast(patch: &SensoryInput) -> f64 {
    let (lo, hi) = patch
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

pub fn grid_salient(patch: &SensoryInput, tau: f64) -> bool {
    contrast(patch) >= tau
}

/// Threshold that lets the top `fraction` of `contrasts` through.
pub fn salience_threshold(contrasts: &[f64], fraction: f64) -> f64 {
    let mut sorted = contrasts.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.is_empty() {
        return 0.0;
    }
    let keep = ((sorted.len() as f64) * fraction).round() as usize;
    let idx = sorted.len().saturating_sub(keep.max(1));
    sorted[idx]
}

#[derive(Clone, Debug)]
pub struct GridWorld {
    cfg: GridWorldConfig,
    scene: GridScene,
    pos: (usize, usize),
}

impl GridWorld {
    pub fn new(
        cfg: GridWorldConfig,
        scene: GridScene,
        pos: (usize, usize),
    ) -> Result<Self, WorldError> {
        scene.window(pos)?;
        Ok(Self { cfg, scene, pos })
    }

    /// Places the sensor uniformly at random over valid positions.
    pub fn with_random_position(
        cfg: GridWorldConfig,
        scene: GridScene,
        rng: &mut StreamRng,
    ) -> Result<Self, WorldError> {
        let pos = if cfg.toroidal {
            (rng.gen_range(0..cfg.width), rng.gen_range(0..cfg.height))
        } else {
            (
                rng.gen_range(1..cfg.width - 1),
                rng.gen_range(1..cfg.height - 1),
            )
        };
        Self::new(cfg, scene, pos)
    }

    pub fn position(&self) -> (usize, usize) {
        self.pos
    }

    pub fn scene(&self) -> &GridScene {
        &self.scene
    }
}

impl World for GridWorld {
    fn sensory_dim(&self) -> usize {
        SENSOR_SIDE * SENSOR_SIDE
    }

    fn motor_space(&self) -> MotorSpace {
        MotorSpace::Deltas(self.cfg.deltas.len())
    }

    fn motor_state(&self) -> MotorState {
        MotorState(self.pos.1 * self.cfg.width + self.pos.0)
    }

    fn sense(&self) -> SensoryInput {
        grid_sense(&self.scene, self.pos).expect("position kept valid")
    }

    fn apply(&mut self, command: MotorCommand) -> Result<MotorOutcome, WorldError> {
        let MotorCommand::Delta(delta) = command else {
            return Err(WorldError::Command(
                "the grid world takes motor deltas".into(),
            ));
        };
        let &(dx, dy) = self
            .cfg
            .deltas
            .get(delta.0)
            .ok_or_else(|| WorldError::Command(format!("delta {} out of range", delta.0)))?;
        let (w, h) = (self.cfg.width as i64, self.cfg.height as i64);
        let (nx, ny) = (self.pos.0 as i64 + dx, self.pos.1 as i64 + dy);
        if self.cfg.toroidal {
            self.pos = (nx.rem_euclid(w) as usize, ny.rem_euclid(h) as usize);
            return Ok(MotorOutcome::default());
        }
        if nx < 1 || ny < 1 || nx > w - 2 || ny > h - 2 {
            return Ok(MotorOutcome { clamped: true });
        }
        self.pos = (nx as usize, ny as usize);
        Ok(MotorOutcome::default())
    }

    fn exogenous_step(&mut self, _rng: &mut StreamRng) -> bool {
        false
    }

    fn truth(&self) -> HiddenLabel {
        self.scene.truth_at(self.pos).expect("position kept valid")
    }
}
