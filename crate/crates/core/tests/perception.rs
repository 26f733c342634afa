use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use tendon_hand::geometry::Vec2;
use tendon_hand::tactile::*;
use tendon_hand::Execution;

const EXEC: Execution = Execution::Sequential;

fn naive_density(markers: &[Vec2], h: f64, spec: &GridSpec) -> Vec<f64> {
    let mut out = Vec::new();
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let x = spec.x0 + i as f64 * spec.step;
            let y = spec.y0 + j as f64 * spec.step;
            let mut s = 0.0;
            for m in markers {
                let d2 = (x - m.x) * (x - m.x) + (y - m.y) * (y - m.y);
                s += (-d2 / (2.0 * h * h)).exp() / ((2.0 * PI).sqrt() * h * h);
            }
            out.push(s / markers.len() as f64);
        }
    }
    out
}

fn random_markers(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec2> {
    (0..n).map(|_| Vec2::new(rng.gen_range(40.0..200.0), rng.gen_range(40.0..200.0))).collect()
}

#[test]
fn bright_pixel_area_matches_disc_area() {
    let l = MarkerLayout::default();
    let f = render_frame(&l.positions, &l, EXEC);
    let b = preprocess(&f, Rect::full(&f), DEFAULT_THRESHOLD).unwrap();
    let ideal = l.len() as f64 * PI * l.marker_radius * l.marker_radius;
    let rel = (b.count() as f64 - ideal).abs() / ideal;
    assert!(rel < 0.05, "{} vs {ideal}", b.count());
}

#[test]
fn single_disc_matches_exhaustive_hessian_scan() {
    let layout = MarkerLayout {
        positions: vec![Vec2::new(20.0, 20.0)],
        marker_radius: 4.0,
        image_size: (40, 40),
    };
    let f = render_frame(&layout.positions, &layout, EXEC);
    let b = preprocess(&f, Rect::full(&f), DEFAULT_THRESHOLD).unwrap();
    let params = DohParams::default();
    let found = detect_markers_doh(&b, &params, EXEC);
    assert_eq!(found.len(), 1);
    let m = found.markers[0].position();
    assert!(m.distance(Vec2::new(20.0, 20.0)) < 1.0);

    let img: Vec<f64> = b.data.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for s in params.sigmas() {
        let r = doh_response(&img, 40, 40, s, EXEC);
        for y in 0..40 {
            for x in 0..40 {
                if r[y * 40 + x] > best.0 {
                    best = (r[y * 40 + x], x, y);
                }
            }
        }
    }
    assert!(m.distance(Vec2::new(best.1 as f64, best.2 as f64)) <= 0.5 * 2f64.sqrt() + 1e-12);
}

#[test]
fn every_reference_marker_is_found() {
    let l = MarkerLayout::default();
    let p = TactilePipeline::new(PipelineConfig::default(), EXEC).unwrap();
    let found = p.detect(p.reference()).unwrap().positions();
    assert_eq!(found.len(), l.len());
    for truth in &l.positions {
        let d = found.iter().map(|q| q.distance(*truth)).fold(f64::INFINITY, f64::min);
        assert!(d < 1.0, "marker at {truth:?} off by {d}");
    }
}

#[test]
fn kernel_width_of_a_lattice_is_its_pitch() {
    for pitch in [16.0, 24.0, 31.5] {
        let l = MarkerLayout::hexagonal(4, pitch, Vec2::new(150.0, 150.0), 4.0, (300, 300));
        assert!((kernel_width(&l.positions).unwrap() - pitch).abs() < 1e-9);
    }
    assert!(kernel_width(&[Vec2::ZERO]).is_err());
}

#[test]
fn density_matches_naive_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = GridSpec::default();
    for _ in 0..5 {
        let m = random_markers(&mut rng, 20);
        let h = rng.gen_range(8.0..30.0);
        let g = density_map(&m, h, &spec, Execution::default()).unwrap();
        for (a, b) in g.values.iter().zip(naive_density(&m, h, &spec)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    assert!(density_map(&[], 1.0, &spec, EXEC).is_err());
    assert!(density_map(&[Vec2::ZERO], 0.0, &spec, EXEC).is_err());
}

#[test]
fn central_press_is_located() {
    let p = TactilePipeline::new(PipelineConfig::default(), EXEC).unwrap();
    let truth = Vec2::new(120.0, 120.0);
    let frame = p.render(&Indentation::new(truth, 0.6, p.config.mapping.radius));
    let a = p.analyze(&frame).unwrap();
    assert!(a.contact.is_contact);
    let c = a.contact.center.unwrap();
    assert!(c.distance(truth) <= p.kernel_width() / 2.0, "{c:?}");
    // argmin against an exhaustive scan of the grid
    let mut best = (f64::INFINITY, Vec2::ZERO);
    for j in 0..a.density.spec.ny {
        for i in 0..a.density.spec.nx {
            if a.density.get(i, j) < best.0 {
                best = (a.density.get(i, j), a.density.spec.point(i, j));
            }
        }
    }
    assert_eq!(c, best.1);
    assert!(a.contact.contact_area > 0.0);
}

#[test]
fn ssim_closed_forms() {
    let mut black = TactileFrame::new(16, 12);
    let mut white = TactileFrame::new(16, 12);
    black.pixels.fill(0);
    white.pixels.fill(255);
    let c1 = (0.01f64 * 255.0).powi(2);
    let s = ssim(&black, &white, &SsimParams::default(), EXEC).unwrap();
    assert!((s - c1 / (255.0f64.powi(2) + c1)).abs() < 1e-15);
    assert!((deformation(&black, &white, EXEC).unwrap() - 0.9999).abs() < 1e-4);
    let p = TactilePipeline::new(PipelineConfig::default(), EXEC).unwrap();
    assert_eq!(ssim(p.reference(), p.reference(), &SsimParams::default(), EXEC).unwrap(), 1.0);
}

#[test]
fn deformation_grows_with_depth() {
    let p = TactilePipeline::new(PipelineConfig::default(), EXEC).unwrap();
    let d: Vec<f64> = (1..=9)
        .map(|k| {
            let f = p.render(&Indentation::new(Vec2::new(120.0, 120.0), k as f64 / 10.0, p.config.mapping.radius));
            deformation(&f, p.reference(), EXEC).unwrap()
        })
        .collect();
    assert!(d.windows(2).all(|w| w[1] > w[0]), "{d:?}");
}

#[test]
fn slip_needs_two_contact_frames_and_a_jump() {
    let touch = |x: f64| ContactEstimate {
        is_contact: true,
        center: Some(Vec2::new(x, 100.0)),
        contact_area: 10.0,
    };
    let s0 = SlipState::default();
    let s1 = detect_slip(&s0, &touch(100.0), 3.0);
    assert!(s1.is_contact && !s1.is_slip);
    let s2 = detect_slip(&s1, &touch(102.0), 3.0);
    assert!(!s2.is_slip);
    let s3 = detect_slip(&s2, &touch(106.0), 3.0);
    assert!(s3.is_slip);
    assert_eq!(s3.displacement, 4.0);
    let s4 = detect_slip(&s3, &ContactEstimate::NONE, 3.0);
    assert!(!s4.is_contact && !s4.is_slip);
    let s5 = detect_slip(&s4, &touch(150.0), 3.0);
    assert!(!s5.is_slip);
}

#[test]
fn pgm_round_trip() {
    let p = TactilePipeline::new(PipelineConfig::default(), EXEC).unwrap();
    let bytes = p.reference().to_pgm_bytes();
    assert!(bytes.starts_with(b"P5"));
    assert_eq!(&TactileFrame::from_pgm_bytes(&bytes).unwrap(), p.reference());
    assert!(TactileFrame::from_pgm_bytes(b"P2 1 1 255\n0").is_err());
}

#[test]
fn crop_must_fit() {
    let f = TactileFrame::new(10, 10);
    assert!(preprocess(&f, Rect::new(5, 5, 6, 2), 180).is_err());
    assert!(preprocess(&f, Rect::new(0, 0, 0, 2), 180).is_err());
    let b = preprocess(&f, Rect::new(2, 3, 4, 5), 180).unwrap();
    assert_eq!((b.origin, b.width, b.height), ((2, 3), 4, 5));
}

#[test]
fn analysis_is_the_same_in_both_modes() {
    let cfg = PipelineConfig::default();
    let a = TactilePipeline::new(cfg.clone(), Execution::Sequential).unwrap();
    let b = TactilePipeline::new(cfg, Execution::Parallel).unwrap();
    let ind = Indentation::new(Vec2::new(130.0, 115.0), 0.5, 76.0);
    let fa = a.render(&ind);
    assert_eq!(fa, b.render(&ind));
    assert_eq!(a.analyze(&fa).unwrap(), b.analyze(&fa).unwrap());
    assert_eq!(a.analyze(&fa).unwrap(), a.analyze(&fa).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn displacement_keeps_count_and_commutes_with_rotation(
        depth in 0.0..1.0f64, angle in 0.0..(2.0 * PI), cx in 60.0..180.0f64, cy in 60.0..180.0f64,
    ) {
        let l = MarkerLayout::default();
        let c = Vec2::new(cx, cy);
        let ind = Indentation::new(c, depth, 76.0);
        let moved = displace_markers(&l.positions, &ind);
        prop_assert_eq!(moved.len(), l.len());
        let rot = |p: Vec2| c + (p - c).rotate(angle);
        let rotated: Vec<Vec2> = l.positions.iter().map(|&p| rot(p)).collect();
        let a = displace_markers(&rotated, &ind);
        for (x, y) in a.iter().zip(moved.iter().map(|&p| rot(p))) {
            prop_assert!(x.distance(y) < 1e-9);
        }
    }

    #[test]
    fn mean_distance_grows_with_depth(d1 in 0.0..1.0f64, d2 in 0.0..1.0f64, cx in 60.0..180.0f64) {
        let l = MarkerLayout::default();
        let c = Vec2::new(cx, 120.0);
        let mean = |d| {
            let m = displace_markers(&l.positions, &Indentation::new(c, d, 76.0));
            m.iter().map(|p| p.distance(c)).sum::<f64>() / m.len() as f64
        };
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(mean(hi) >= mean(lo));
    }

    #[test]
    fn contact_decision_is_scale_invariant(seed in any::<u64>(), k in 0.01..100.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = GridSpec::default();
        let base = density_map(&MarkerLayout::default().positions, 20.0, &spec, EXEC).unwrap();
        let m = random_markers(&mut rng, 40);
        let g = density_map(&m, 20.0, &spec, EXEC).unwrap();
        let scale = |d: &DensityGrid| DensityGrid { values: d.values.iter().map(|v| v * k).collect(), ..d.clone() };
        let a = contact_estimate(&g, &base, 0.6).unwrap();
        let b = contact_estimate(&scale(&g), &scale(&base), 0.6).unwrap();
        prop_assert_eq!(a.is_contact, b.is_contact);
        prop_assert_eq!(g.argmin(), scale(&g).argmin());
    }

    #[test]
    fn grid_aligned_shift_moves_the_minimum(seed in any::<u64>(), dx in -10i32..10, dy in -10i32..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m: Vec<Vec2> = (0..30)
            .map(|_| Vec2::new(rng.gen_range(0..60) as f64 + 60.0, rng.gen_range(0..60) as f64 + 60.0))
            .collect();
        let spec = GridSpec { x0: 50.0, y0: 50.0, step: 1.0, nx: 80, ny: 80 };
        let shifted_spec = GridSpec { x0: 50.0 + dx as f64, y0: 50.0 + dy as f64, ..spec };
        let shifted: Vec<Vec2> = m.iter().map(|p| Vec2::new(p.x + dx as f64, p.y + dy as f64)).collect();
        let a = density_map(&m, 12.0, &spec, EXEC).unwrap();
        let b = density_map(&shifted, 12.0, &shifted_spec, EXEC).unwrap();
        let (i, j) = a.argmin().unwrap();
        prop_assert_eq!(b.argmin(), Some((i, j)));
        let pa = spec.point(i, j);
        prop_assert_eq!(shifted_spec.point(i, j), Vec2::new(pa.x + dx as f64, pa.y + dy as f64));
    }

    #[test]
    fn slip_flags_are_a_function_of_the_centres(xs in prop::collection::vec(proptest::option::of(0.0..240.0f64), 1..30)) {
        let run = || {
            let mut s = SlipState::default();
            xs.iter()
                .map(|x| {
                    let e = match x {
                        Some(x) => ContactEstimate { is_contact: true, center: Some(Vec2::new(*x, 120.0)), contact_area: 1.0 },
                        None => ContactEstimate::NONE,
                    };
                    s = detect_slip(&s, &e, 3.0);
                    s.is_slip
                })
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }
}
