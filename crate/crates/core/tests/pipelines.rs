use proptest::prelude::*;
use revspec::flow::{self, FlowOptions};
use revspec::rearrange;
use revspec::spectral::{self, GfOptions};
use revspec::tangent::{self, PieceKind};
use revspec::{builtins, Execution};

#[test]
fn generating_function_is_recovered_from_its_tangents() {
    let p = builtins::two_harmonic_deformed();
    let gf = spectral::build_generating_function(&p, &GfOptions { n_grid: 128, ..GfOptions::default() }).unwrap();
    let pieces = tangent::split_pieces(&gf.eta, &gf.fsecond());
    // Clip to η > 0, where the tangents come from the closed forms.
    let (a, b) = pieces
        .iter()
        .filter(|q| q.kind != PieceKind::Affine)
        .map(|q| (q.start.max(0.05), q.end.min(0.95)))
        .max_by(|x, y| (x.1 - x.0).total_cmp(&(y.1 - y.0)))
        .expect("a strictly convex or concave piece");
    assert!(b - a > 0.2, "piece [{a}, {b}] too short");
    let f = |e: f64| {
        let (v, d, _) = gf.eval(e).unwrap();
        (v, d)
    };
    let lines = tangent::tangent_set(f, &tangent::uniform_grid(a, b, 64));
    let rec = tangent::reconstruct(&lines).unwrap();
    assert!(rec.derivative_monotone);
    let (lo, hi) = rec.domain();
    let worst = tangent::uniform_grid(lo, hi, 301)
        .into_iter()
        .map(|x| (rec.eval(x).unwrap().0 - f(x).0).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-5, "max |F_rec - F| = {worst:e} on [{lo}, {hi}]");
}

#[test]
fn parallel_and_sequential_sweeps_agree_bitwise() {
    let p = builtins::two_harmonic_deformed();
    let betas: Vec<f64> = (0..24).map(|i| std::f64::consts::PI * (i as f64 + 0.5) / 24.0).collect();
    let opts = FlowOptions::default();
    let par: Vec<_> = flow::return_map(&p, &betas, Execution::Parallel, &opts).into_iter().map(Result::unwrap).collect();
    let seq: Vec<_> = flow::return_map(&p, &betas, Execution::Sequential, &opts).into_iter().map(Result::unwrap).collect();
    assert_eq!(par, seq);

    let g = |exec| {
        let gf = spectral::build_generating_function(&p, &GfOptions { n_grid: 64, exec, ..GfOptions::default() }).unwrap();
        spectral::spectrum(&gf, 4, false, exec).unwrap()
    };
    assert_eq!(g(Execution::Parallel), g(Execution::Sequential));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    /// f(u) = a (u³ − u) + b (u⁵ − u) is odd with f(1) = 0; |f| < 1 holds
    /// for these ranges.
    #[test]
    fn family_members_are_isospectral_to_their_base(a in -0.4f64..0.4, b in -0.3f64..0.3) {
        let base = builtins::two_harmonic();
        let member = rearrange::cor_d_family(&base, &[0.0, -(a + b), 0.0, a, 0.0, b]).unwrap();
        let rep = spectral::isospectral_check(&base, &member, 1e-8);
        prop_assert!(rep.isospectral, "residual {}", rep.superlevel_residual);
        let rs = rearrange::symmetric_rearrangement(&member);
        for i in 1..32 {
            let s = base.m() * i as f64 / 32.0;
            prop_assert!((rs.eval(s).r - base.eval(s).r).abs() < 1e-9);
        }
    }
}
