//! A binary visual scene viewed through a 10×10 window split into four 5×5
//! receptive fields, moved by saccades of one field width.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MotorCommand, MotorOutcome, MotorSpace, World, WorldError};
use crate::rng::StreamRng;
use crate::sample::{HiddenLabel, MotorDelta, MotorState, SensoryInput};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetinaWorldConfig {
    pub width: usize,
    pub height: usize,
    /// Side of one receptive field; the window is two fields wide.
    pub field_side: usize,
    pub square_count: usize,
    pub min_square_side: usize,
    pub max_square_side: usize,
    pub noise_mode: bool,
}

impl Default for RetinaWorldConfig {
    fn default() -> Self {
        Self {
            width: 50,
            height: 50,
            field_side: 5,
            square_count: 10,
            min_square_side: 3,
            max_square_side: 12,
            noise_mode: false,
        }
    }
}

impl RetinaWorldConfig {
    pub fn window_side(&self) -> usize {
        2 * self.field_side
    }

    pub fn field_len(&self) -> usize {
        self.field_side * self.field_side
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if self.field_side == 0
            || self.window_side() > self.width
            || self.window_side() > self.height
        {
            return Err(WorldError::Config("window does not fit the scene".into()));
        }
        if self.min_square_side == 0 || self.min_square_side > self.max_square_side {
            return Err(WorldError::Config("square side range is empty".into()));
        }
        Ok(())
    }

    /// The eight saccades `(dx, dy)`, in motor-command order.
    pub fn saccades(&self) -> [(i64, i64); 8] {
        let f = self.field_side as i64;
        [
            (f, 0),
            (-f, 0),
            (0, f),
            (0, -f),
            (f, f),
            (f, -f),
            (-f, f),
            (-f, -f),
        ]
    }
}

/// Receptive fields in reading order. `y` grows downwards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Field {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl Field {
    pub const ALL: [Field; 4] = [
        Field::TopLeft,
        Field::TopRight,
        Field::BottomLeft,
        Field::BottomRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Offset of the field inside the window, in field units.
    pub fn offset(self) -> (i64, i64) {
        match self {
            Field::TopLeft => (0, 0),
            Field::TopRight => (1, 0),
            Field::BottomLeft => (0, 1),
            Field::BottomRight => (1, 1),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Field::TopLeft => "TL",
            Field::TopRight => "TR",
            Field::BottomLeft => "BL",
            Field::BottomRight => "BR",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RetinaScene {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RetinaScene {
    pub fn black(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel count");
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn white_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }

    /// Paints a white square with top-left corner `(x, y)`, clipped at the
    /// scene border.
    pub fn paint_square(&mut self, x: usize, y: usize, side: usize) {
        for yy in y..(y + side).min(self.height) {
            for xx in x..(x + side).min(self.width) {
                self.set(xx, yy, 1);
            }
        }
    }

    /// Plain-text PGM (P2) rendering.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n1\n", self.width, self.height);
        for row in self.pixels.chunks(self.width) {
            let line: Vec<&str> = row
                .iter()
                .map(|&p| if p != 0 { "1" } else { "0" })
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

pub fn retina_render(cfg: &RetinaWorldConfig, rng: &mut StreamRng) -> RetinaScene {
    let mut scene = RetinaScene::black(cfg.width, cfg.height);
    if cfg.noise_mode {
        for p in scene.pixels.iter_mut() {
            *p = u8::from(rng.gen::<bool>());
        }
        return scene;
    }
    for _ in 0..cfg.square_count {
        let side = rng.gen_range(cfg.min_square_side..=cfg.max_square_side);
        let x = rng.gen_range(0..cfg.width);
        let y = rng.gen_range(0..cfg.height);
        scene.paint_square(x, y, side);
    }
    scene
}

/// The four field patches of the window whose top-left corner is `pos`,
/// ordered TL, TR, BL, BR, each row-major.
pub fn retina_sense(
    scene: &RetinaScene,
    pos: (usize, usize),
    field_side: usize,
) -> Result<[SensoryInput; 4], WorldError> {
    let window = 2 * field_side;
    if pos.0 + window > scene.width || pos.1 + window > scene.height {
        return Err(WorldError::Position(format!(
            "window at {pos:?} leaves the {}x{} scene",
            scene.width, scene.height
        )));
    }
    Ok(Field::ALL.map(|field| {
        let (fx, fy) = field.offset();
        let x0 = pos.0 + fx as usize * field_side;
        let y0 = pos.1 + fy as usize * field_side;
        let mut values = Vec::with_capacity(field_side * field_side);
        for y in y0..y0 + field_side {
            for x in x0..x0 + field_side {
                values.push(f64::from(scene.pixel(x, y)));
            }
        }
        SensoryInput::new(values).expect("binary pixels")
    }))
}

/// Moves the window by saccade `delta`. Moves that would push the window
/// out of the scene are not executed and come back flagged.
pub fn retina_saccade(
    cfg: &RetinaWorldConfig,
    pos: (usize, usize),
    delta: MotorDelta,
) -> Result<((usize, usize), bool), WorldError> {
    let &(dx, dy) = cfg
        .saccades()
        .get(delta.0)
        .ok_or_else(|| WorldError::Command(format!("saccade {} out of range", delta.0)))?;
    let nx = pos.0 as i64 + dx;
    let ny = pos.1 as i64 + dy;
    let max_x = (cfg.width - cfg.window_side()) as i64;
    let max_y = (cfg.height - cfg.window_side()) as i64;
    if nx < 0 || ny < 0 || nx > max_x || ny > max_y {
        return Ok((pos, true));
    }
    Ok(((nx as usize, ny as usize), false))
}

/// Field pairs `(before, after)` such that the patch seen by `after` once the
/// saccade is done equals the patch `before` saw prior to it.
pub fn correspondence_table(
    cfg: &RetinaWorldConfig,
    delta: MotorDelta,
) -> Result<Vec<(Field, Field)>, WorldError> {
    let &(dx, dy) = cfg
        .saccades()
        .get(delta.0)
        .ok_or_else(|| WorldError::Command(format!("saccade {} out of range", delta.0)))?;
    let f = cfg.field_side as i64;
    let mut pairs = Vec::new();
    for after in Field::ALL {
        let (bx, by) = after.offset();
        // pixel offset of `after` relative to the old window corner
        let target = (bx * f + dx, by * f + dy);
        if let Some(before) = Field::ALL.into_iter().find(|b| {
            let (ax, ay) = b.offset();
            (ax * f, ay * f) == target
        }) {
            pairs.push((before, after));
        }
    }
    pairs.sort();
    Ok(pairs)
}

#[derive(Clone, Debug)]
pub struct RetinaWorld {
    cfg: RetinaWorldConfig,
    scene: RetinaScene,
    pos: (usize, usize),
}

impl RetinaWorld {
    pub fn new(
        cfg: RetinaWorldConfig,
        scene: RetinaScene,
        pos: (usize, usize),
    ) -> Result<Self, WorldError> {
        cfg.validate()?;
        retina_sense(&scene, pos, cfg.field_side)?;
        Ok(Self { cfg, scene, pos })
    }

    pub fn with_random_position(
        cfg: RetinaWorldConfig,
        scene: RetinaScene,
        rng: &mut StreamRng,
    ) -> Result<Self, WorldError> {
        cfg.validate()?;
        let pos = (
            rng.gen_range(0..=cfg.width - cfg.window_side()),
            rng.gen_range(0..=cfg.height - cfg.window_side()),
        );
        Self::new(cfg, scene, pos)
    }

    pub fn position(&self) -> (usize, usize) {
        self.pos
    }

    pub fn scene(&self) -> &RetinaScene {
        &self.scene
    }
}

impl World for RetinaWorld {
    fn sensory_dim(&self) -> usize {
        4 * self.cfg.field_len()
    }

    fn motor_space(&self) -> MotorSpace {
        MotorSpace::Deltas(8)
    }

    fn motor_state(&self) -> MotorState {
        MotorState(self.pos.1 * self.cfg.width + self.pos.0)
    }

    /// The four fields concatenated in TL, TR, BL, BR order.
    fn sense(&self) -> SensoryInput {
        let fields =
            retina_sense(&self.scene, self.pos, self.cfg.field_side).expect("position kept valid");
        let values = fields
            .into_iter()
            .flat_map(SensoryInput::into_inner)
            .collect();
        SensoryInput::new(values).expect("binary pixels")
    }

    fn apply(&mut self, command: MotorCommand) -> Result<MotorOutcome, WorldError> {
        let MotorCommand::Delta(delta) = command else {
            return Err(WorldError::Command(
                "the retina world takes saccades".into(),
            ));
        };
        let (pos, clamped) = retina_saccade(&self.cfg, self.pos, delta)?;
        self.pos = pos;
        Ok(MotorOutcome { clamped })
    }

    fn exogenous_step(&mut self, _rng: &mut StreamRng) -> bool {
        false
    }

    fn truth(&self) -> HiddenLabel {
        HiddenLabel::NONE
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;
    use Field::*;

    #[test]
    fn empty_scene_is_black() {
        let cfg = RetinaWorldConfig {
            square_count: 0,
            ..RetinaWorldConfig::default()
        };
        let scene = retina_render(&cfg, &mut Streams::new(0).stream("scene"));
        assert_eq!(scene.white_count(), 0);
        let fields = retina_sense(&scene, (12, 30), 5).unwrap();
        assert!(fields.iter().all(|f| f.values().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn one_small_square() {
        let mut scene = RetinaScene::black(50, 50);
        scene.paint_square(10, 10, 3);
        assert_eq!(scene.white_count(), 9);
        let mut edge = RetinaScene::black(50, 50);
        edge.paint_square(48, 49, 3);
        assert_eq!(edge.white_count(), 2);
    }

    #[test]
    fn noise_is_balanced() {
        let cfg = RetinaWorldConfig {
            noise_mode: true,
            ..RetinaWorldConfig::default()
        };
        let scene = retina_render(&cfg, &mut Streams::new(11).stream("scene"));
        // 2500 fair coins: 0.02 is four standard deviations
        let fraction = scene.white_count() as f64 / 2500.0;
        assert!((fraction - 0.5).abs() <= 0.02, "{fraction}");
    }

    #[test]
    fn white_left_half() {
        let mut scene = RetinaScene::black(50, 50);
        for y in 0..50 {
            for x in 0..25 {
                scene.set(x, y, 1);
            }
        }
        let fields = retina_sense(&scene, (20, 7), 5).unwrap();
        assert!(fields[0].values().iter().all(|&v| v == 1.0));
        assert!(fields[2].values().iter().all(|&v| v == 1.0));
        assert!(fields[1].values().iter().all(|&v| v == 0.0));
        assert!(fields[3].values().iter().all(|&v| v == 0.0));
        assert!(retina_sense(&scene, (41, 0), 5).is_err());
    }

    #[test]
    fn right_field_becomes_left_field_after_shift() {
        let cfg = RetinaWorldConfig::default();
        let scene = retina_render(&cfg, &mut Streams::new(4).stream("scene"));
        let before = retina_sense(&scene, (7, 9), 5).unwrap();
        let after = retina_sense(&scene, (12, 9), 5).unwrap();
        assert_eq!(before[TopRight.index()], after[TopLeft.index()]);
    }

    #[test]
    fn saccade_moves_and_clamps() {
        let cfg = RetinaWorldConfig::default();
        assert_eq!(
            retina_saccade(&cfg, (20, 20), MotorDelta(0)).unwrap(),
            ((25, 20), false)
        );
        assert_eq!(
            retina_saccade(&cfg, (40, 20), MotorDelta(0)).unwrap(),
            ((40, 20), true)
        );
        assert_eq!(
            retina_saccade(&cfg, (3, 0), MotorDelta(3)).unwrap(),
            ((3, 0), true)
        );
        let (there, _) = retina_saccade(&cfg, (13, 22), MotorDelta(0)).unwrap();
        let (back, _) = retina_saccade(&cfg, there, MotorDelta(1)).unwrap();
        assert_eq!(back, (13, 22));
        assert!(retina_saccade(&cfg, (0, 0), MotorDelta(8)).is_err());
    }

    #[test]
    fn correspondence_examples() {
        let cfg = RetinaWorldConfig::default();
        assert_eq!(
            correspondence_table(&cfg, MotorDelta(0)).unwrap(),
            vec![(TopRight, TopLeft), (BottomRight, BottomLeft)]
        );
        assert_eq!(
            correspondence_table(&cfg, MotorDelta(2)).unwrap(),
            vec![(BottomLeft, TopLeft), (BottomRight, TopRight)]
        );
        assert_eq!(
            correspondence_table(&cfg, MotorDelta(4)).unwrap(),
            vec![(BottomRight, TopLeft)]
        );
        assert_eq!(
            correspondence_table(&cfg, MotorDelta(7)).unwrap(),
            vec![(TopLeft, BottomRight)]
        );
    }

    #[test]
    fn pgm_header() {
        let scene = RetinaScene::black(3, 2);
        assert_eq!(scene.to_pgm(), "P2\n3 2\n1\n0 0 0\n0 0 0\n");
    }
}
