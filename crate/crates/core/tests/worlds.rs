use smc_core::rng::Streams;
use smc_core::worlds::grid::{draw_background, draw_patches, grid_build_scene, grid_sense};
use smc_core::worlds::retina::{correspondence_table, retina_render, retina_saccade, retina_sense};
use smc_core::worlds::wall::{wall_env_step, wall_sense};
use smc_core::worlds::{Field, GridWorldConfig, RetinaWorldConfig, WallWorldConfig};
use smc_core::{HiddenLabel, MotorDelta, MotorState};

#[test]
fn wall_switch_frequency_matches_p_env() {
    let cfg = WallWorldConfig::default();
    let mut rng = Streams::new(1).stream("env");
    let n = 1_000_000;
    let mut env = 0;
    let mut switches = 0u64;
    let mut landed = vec![0u64; cfg.n_env_states];
    for _ in 0..n {
        let next = wall_env_step(&cfg, env, &mut rng);
        if next != env {
            switches += 1;
            landed[next] += 1;
        }
        env = next;
    }
    let p = cfg.p_env;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    let freq = switches as f64 / n as f64;
    assert!((freq - p).abs() <= 3.0 * sigma, "switch frequency {freq}");
    // every destination is reachable and none is favoured by much
    let expected = switches as f64 / cfg.n_env_states as f64;
    for (s, &c) in landed.iter().enumerate() {
        assert!(
            (c as f64 - expected).abs() < 5.0 * expected.sqrt() + 0.1 * expected,
            "state {s}: {c}"
        );
    }
}

#[test]
fn wall_readings_follow_the_cosine_law() {
    let cfg = WallWorldConfig::default();
    for env in 0..cfg.n_env_states {
        let d = cfg.distances()[env];
        for m in 0..cfg.n_angles {
            let s = wall_sense(&cfg, env, MotorState(m)).unwrap().values()[0];
            let want = (d / cfg.angle_deg(m).to_radians().cos()).min(cfg.s_max);
            assert!((s - want).abs() < 1e-12);
        }
        let centre = wall_sense(&cfg, env, MotorState(cfg.n_angles / 2))
            .unwrap()
            .values()[0];
        assert!(centre >= d);
    }
    assert!(wall_sense(&cfg, cfg.n_env_states, MotorState(0)).is_err());
    assert!(wall_sense(&cfg, 0, MotorState(cfg.n_angles)).is_err());
}

#[test]
fn retina_fields_follow_saccades() {
    let cfg = RetinaWorldConfig::default();
    let streams = Streams::new(2);
    for scene in 0..10 {
        let img = retina_render(&cfg, &mut streams.stream(&format!("scene{scene}")));
        let max = cfg.width - cfg.window_side();
        for y in (0..=max).step_by(3) {
            for x in (0..=max).step_by(3) {
                let before = retina_sense(&img, (x, y), cfg.field_side).unwrap();
                for q in 0..8 {
                    let (pos, clamped) = retina_saccade(&cfg, (x, y), MotorDelta(q)).unwrap();
                    let (dx, dy) = cfg.saccades()[q];
                    let nx = x as i64 + dx;
                    let ny = y as i64 + dy;
                    let inside = nx >= 0 && ny >= 0 && nx <= max as i64 && ny <= max as i64;
                    assert_eq!(clamped, !inside);
                    if clamped {
                        assert_eq!(pos, (x, y));
                        continue;
                    }
                    let after = retina_sense(&img, pos, cfg.field_side).unwrap();
                    for (b, a) in correspondence_table(&cfg, MotorDelta(q)).unwrap() {
                        assert_eq!(after[a.index()], before[b.index()]);
                    }
                }
            }
        }
    }
}

#[test]
fn every_saccade_has_a_correspondence() {
    let cfg = RetinaWorldConfig::default();
    for q in 0..8 {
        let table = correspondence_table(&cfg, MotorDelta(q)).unwrap();
        assert!(!table.is_empty() && table.len() <= Field::ALL.len());
    }
}

#[test]
fn noise_scenes_are_balanced() {
    let cfg = RetinaWorldConfig {
        noise_mode: true,
        ..Default::default()
    };
    let streams = Streams::new(3);
    let mut white = 0usize;
    let mut total = 0usize;
    for s in 0..20 {
        let img = retina_render(&cfg, &mut streams.stream(&format!("noise{s}")));
        white += img.white_count();
        total += img.pixels().len();
    }
    let sigma = (0.25 / total as f64).sqrt();
    assert!((white as f64 / total as f64 - 0.5).abs() <= 4.0 * sigma);
}

#[test]
fn objects_are_rigid_across_scenes() {
    let cfg = GridWorldConfig {
        width: 24,
        height: 24,
        n_objects: 2,
        object_side: 8,
        ..Default::default()
    };
    let streams = Streams::new(4);
    let patches = draw_patches(&cfg, &mut streams.stream("patches"));
    let mut background = draw_background(&cfg, &mut streams.stream("background"));
    let mut rng = streams.stream("scenes");
    let first = grid_build_scene(&cfg, &patches, &mut background, &mut rng, false, true).unwrap();
    for _ in 0..10 {
        let later =
            grid_build_scene(&cfg, &patches, &mut background, &mut rng, true, true).unwrap();
        for o in 0..patches.len() {
            let (ax, ay) = first.placements()[o];
            let (bx, by) = later.placements()[o];
            for v in 1..7 {
                for u in 1..7 {
                    let pa = ((ax + u) % 24, (ay + v) % 24);
                    let pb = ((bx + u) % 24, (by + v) % 24);
                    assert_eq!(
                        grid_sense(&first, pa).unwrap(),
                        grid_sense(&later, pb).unwrap()
                    );
                    assert_eq!(later.truth_at(pb).unwrap(), HiddenLabel::object(o));
                }
            }
        }
    }
}
