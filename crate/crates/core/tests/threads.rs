use lrss_core::eval::synth::{inject, synth_cube, AngleSpec, InjectionSpec, SynthSpec};
use lrss_core::{build_dictionary, detection_map, make_gaussian_psf, solve, CorrelationPath, SolverConfig};

fn pool(n: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()
}

#[test]
fn solver_output_independent_of_thread_count() {
    let psf = make_gaussian_psf(7, 3.0).unwrap();
    let spec = SynthSpec {
        t: 8,
        h: 32,
        w: 32,
        angles: AngleSpec::Span {
            start_deg: 0.0,
            end_deg: 100.0,
        },
        bg_rank: 2,
        bg_scale: 2.0,
        noise_sigma: 0.5,
        seed: 99,
    };
    let cube = synth_cube(&spec).unwrap();
    let cube = inject(&cube, &InjectionSpec { ref_pos: (8.0, 20.0), flux: 1.5, psf: psf.clone() }).unwrap();
    let dict = build_dictionary(cube.shape(), cube.center(), cube.angles_deg(), &psf, 5.0, 12.0, 1).unwrap();
    let cfg = SolverConfig::new(2, 2);

    let run = |n: usize| {
        pool(n).install(|| {
            let dec = solve(&cube, &dict, &cfg).unwrap();
            let maps = detection_map(&cube, &dec, &dict).unwrap();
            let fast = dict.correlate_all(cube.cube(), CorrelationPath::Fast).unwrap();
            (dec, maps, fast)
        })
    };
    let (a, ma, fa) = run(1);
    let (b, mb, fb) = run(4);
    assert_eq!(a.support, b.support);
    assert_eq!(a.iters_run, b.iters_run);
    for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
        assert!((x - y).abs() <= 1e-12);
    }
    for (x, y) in a.background.data().iter().zip(b.background.data()) {
        assert!((x - y).abs() <= 1e-12);
    }
    for (x, y) in ma.dense_values.iter().zip(&mb.dense_values).chain(fa.iter().zip(&fb)) {
        assert!((x - y).abs() <= 1e-12);
    }
}
