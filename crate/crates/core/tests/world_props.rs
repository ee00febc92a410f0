mod oracles;

use huro_teleop::world::{load_course, save_course, CourseMap, Obstacle, Point, Pose2D, ROBOT_RADIUS};
use oracles::{gen, SampledCourse};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-3;

#[test]
fn contact_matches_boundary_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 2000 {
        let m = gen::course(&mut rng, 4);
        let sampler = SampledCourse::new(&m);
        for _ in 0..20 {
            let c = Point::new(rng.random_range(-0.2..m.width + 0.2), rng.random_range(-0.2..m.height + 0.2));
            let r = rng.random_range(0.01..0.6);
            let got: std::collections::BTreeSet<String> = m.check_contact(c, r).into_iter().collect();
            let want = sampler.disc(c, r, TOL);
            for id in got.symmetric_difference(&want.hits) {
                assert!(want.ambiguous.contains(id), "disagree on {id} at {c:?} r={r} in {m:?}");
            }
            checked += 1;
        }
    }
}

#[test]
fn sweep_matches_path_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..300 {
        let m = gen::course(&mut rng, 4);
        let sampler = SampledCourse::new(&m);
        for _ in 0..5 {
            let a = Point::new(rng.random_range(0.0..m.width), rng.random_range(0.0..m.height));
            let len = rng.random_range(0.0..0.6);
            let dir = rng.random_range(-3.2..3.2_f64);
            let b = Point::new(a.x + len * dir.cos(), a.y + len * dir.sin());
            let r = rng.random_range(0.05..0.3);
            let got: std::collections::BTreeSet<String> = m.sweep_contact(a, b, r).into_iter().collect();
            assert_eq!(got, sampler.sweep(a, b, r), "sweep {a:?} -> {b:?} r={r} in {m:?}");
            // Superset of the endpoint checks, and symmetric.
            for end in [a, b] {
                for id in m.check_contact(end, r) {
                    assert!(got.contains(&id));
                }
            }
            assert_eq!(m.sweep_contact(b, a, r), m.sweep_contact(a, b, r));
        }
    }
}

#[test]
fn contact_ignores_obstacle_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let m = gen::course(&mut rng, 6);
        let mut reversed = m.clone();
        reversed.obstacles.reverse();
        for _ in 0..10 {
            let c = Point::new(rng.random_range(0.0..m.width), rng.random_range(0.0..m.height));
            assert_eq!(m.check_contact(c, 0.3), reversed.check_contact(c, 0.3));
        }
    }
}

#[test]
fn edit_sequences_preserve_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let mut m = gen::course(&mut rng, 3);
        for step in 0..40 {
            let before = m.clone();
            let ids: Vec<String> = m.obstacles.iter().map(|o| o.id.clone()).collect();
            let pick = |rng: &mut ChaCha8Rng| {
                if ids.is_empty() || rng.random_bool(0.2) {
                    "missing".to_string()
                } else {
                    ids[rng.random_range(0..ids.len())].clone()
                }
            };
            let result = match rng.random_range(0..4) {
                0 => m.place_obstacle(Obstacle::circle(
                    if rng.random_bool(0.2) && !ids.is_empty() { ids[0].clone() } else { format!("n{step}") },
                    rng.random_range(-0.5..m.width + 0.5),
                    rng.random_range(-0.5..m.height + 0.5),
                    rng.random_range(0.01..0.4),
                )),
                1 => {
                    let id = pick(&mut rng);
                    m.move_obstacle(&id, rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5))
                }
                2 => {
                    let id = pick(&mut rng);
                    m.remove_obstacle(&id)
                }
                _ => m.set_start_pose(Pose2D::new(
                    rng.random_range(0.0..m.width),
                    rng.random_range(0.0..m.height),
                    rng.random_range(-7.0..7.0),
                )),
            };
            assert_eq!(m, before, "edit ops must not mutate their input");
            if let Ok(next) = result {
                next.validate().expect("edit produced an invalid course");
                assert!(next.check_contact(next.start.position(), ROBOT_RADIUS).is_empty());
                m = next;
            }
        }
    }
}

#[test]
fn save_load_round_trip_generated_courses() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..300 {
        let m = gen::course(&mut rng, 10);
        let bytes = save_course(&m);
        assert_eq!(load_course(&bytes).unwrap(), m);
        assert_eq!(save_course(&load_course(&bytes).unwrap()), bytes);
    }
}

#[test]
fn shipped_courses_load() {
    for name in ["fira_obstacle_run.json", "empty_3x6.json"] {
        let path = format!("{}/../../courses/{name}", env!("CARGO_MANIFEST_DIR"));
        let m: CourseMap = load_course(&std::fs::read(path).unwrap()).unwrap();
        assert_eq!((m.width, m.height), (3.0, 6.0));
    }
}

#[test]
fn reached_finish_is_monotone_along_forward_paths() {
    let m = CourseMap::default();
    let mut seen = false;
    for i in 0..700 {
        let p = Pose2D::new(1.0, i as f64 * 0.01, 0.0);
        let now = m.reached_finish(&p);
        assert!(!seen || now);
        seen = now;
    }
    assert!(seen);
}
