use christoffel_dr::christoffel::factorize;
use christoffel_dr::dist_reg::{Bag, Dataset, Model, YMap};
use christoffel_dr::io::{read_bags, write_bags, DataFormat};
use christoffel_dr::poly_basis::{
    accumulate_moments, domain_map_from_data, gram_from_moments, BasisFamily, BasisSpec,
    GramMatrix,
};
use christoffel_dr::quadrature::gauss_rule_from_moments;
use christoffel_dr::report::matrix_rel_err;
use christoffel_dr::synth::{generate, SynthConfig};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = BasisFamily> {
    prop_oneof![
        Just(BasisFamily::Chebyshev),
        Just(BasisFamily::Legendre),
        Just(BasisFamily::Hermite),
        Just(BasisFamily::Laguerre),
    ]
}

/// A canonical-coordinate point in the natural range of the family.
fn natural_point(fam: BasisFamily, s: f64) -> f64 {
    match fam {
        BasisFamily::Chebyshev | BasisFamily::Legendre => s,
        BasisFamily::Hermite => 3.0 * s,
        BasisFamily::Laguerre => 5.0 * (s + 1.0),
    }
}

#[test]
fn chebyshev_matches_cosine_form() {
    let spec = BasisSpec::canonical(BasisFamily::Chebyshev, 21).unwrap();
    for i in 0..=400 {
        let u = -1.0 + i as f64 / 200.0;
        let theta = u.acos();
        for (k, v) in spec.eval(u).iter().enumerate() {
            let expect = (k as f64 * theta).cos();
            assert!((v - expect).abs() < 1e-12, "k={k} u={u}: {v} vs {expect}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linearization_is_exact(
        fam in family(),
        q in 0usize..=8,
        r in 0usize..=8,
        pts in prop::collection::vec(-1.0f64..1.0, 20),
    ) {
        let c = fam.linearize_product(q, r);
        prop_assert_eq!(c.len(), q + r + 1);
        let spec = BasisSpec::canonical(fam, q + r + 1).unwrap();
        for s in pts {
            let u = natural_point(fam, s);
            let qs = spec.eval(u);
            let lhs: f64 = c.iter().zip(&qs).map(|(a, b)| a * b).sum();
            let rhs = qs[q] * qs[r];
            let scale: f64 = c.iter().zip(&qs).map(|(a, b)| (a * b).abs()).sum::<f64>().max(rhs.abs());
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE),
                "{fam} q={q} r={r} u={u}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn gram_is_psd(
        fam in family(),
        d in 1usize..=10,
        pts in prop::collection::vec(-5.0f64..5.0, 1..200),
        seed_w in prop::collection::vec(0.0f64..3.0, 200),
    ) {
        let w = &seed_w[..pts.len()];
        let spec = BasisSpec::fitted(fam, d, &pts).unwrap();
        let m = accumulate_moments(&spec, &pts, Some(w), 2 * d - 1).unwrap();
        let g = gram_from_moments(&spec, &m).unwrap();
        let entries = g.entries();
        prop_assert!(matrix_rel_err(entries, &entries.transpose()) == 0.0);
        let trace = g.trace();
        let eig = entries.clone().symmetric_eigenvalues();
        prop_assert!(eig.iter().all(|&v| v >= -1e-8 * trace), "{eig:?}");
    }

    #[test]
    fn kernel_symmetric_and_lambda_positive(
        fam in family(),
        d in 1usize..=8,
        pts in prop::collection::vec(-2.0f64..2.0, 40..120),
        probes in prop::collection::vec(-3.0f64..3.0, 10),
    ) {
        let spec = BasisSpec::fitted(fam, d, &pts).unwrap();
        let g = GramMatrix::direct(&spec, &pts, None);
        let st = factorize(&g, None).unwrap();
        for w in probes.windows(2) {
            let (a, b) = (st.kernel(w[0], w[1]), st.kernel(w[1], w[0]));
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300));
            prop_assert!(st.christoffel(w[0]) > 0.0);
        }
    }

    #[test]
    fn quadrature_nodes_inside_support(
        fam in family(),
        d in 1usize..=8,
        pts in prop::collection::vec(-1.0f64..1.0, 30..150),
    ) {
        let spec = BasisSpec::fitted(fam, d, &pts).unwrap();
        let m = accumulate_moments(&spec, &pts, None, 2 * d - 1).unwrap();
        let rule = gauss_rule_from_moments(&spec, &m, None).unwrap();
        let lo = pts.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let slack = 1e-9 * (hi - lo);
        prop_assert!(rule.nodes().windows(2).all(|w| w[0] <= w[1]));
        for (&y, &w) in rule.nodes().iter().zip(rule.weights()) {
            prop_assert!(y >= lo - slack && y <= hi + slack, "{y} outside [{lo}, {hi}]");
            prop_assert!(w > 0.0);
        }
        let st = factorize(&gram_from_moments(&spec, &m).unwrap(), None).unwrap();
        let lambda_mass: f64 = rule.nodes().iter().map(|&y| st.christoffel(y)).sum();
        for mass in [rule.total_weight(), lambda_mass] {
            prop_assert!((mass - pts.len() as f64).abs() <= 1e-8 * pts.len() as f64);
        }
    }

    #[test]
    fn dataset_round_trips_bit_exact(
        ys in prop::collection::vec(-1e6f64..1e6, 1..8),
        xs in prop::collection::vec(prop::num::f64::NORMAL, 1..6),
    ) {
        let bags: Vec<Bag> = ys
            .iter()
            .enumerate()
            .map(|(i, &y)| Bag::new(format!("bag {i}"), xs.clone(), y))
            .collect();
        for fmt in [DataFormat::Jsonl, DataFormat::Csv] {
            let mut buf = Vec::new();
            write_bags(&mut buf, &bags, fmt, None).unwrap();
            let back = read_bags(buf.as_slice(), fmt).unwrap();
            prop_assert_eq!(back.len(), bags.len());
            for (a, b) in back.iter().zip(&bags) {
                prop_assert_eq!(&a.id, &b.id);
                prop_assert_eq!(a.y.to_bits(), b.y.to_bits());
                let abits: Vec<u64> = a.xs.iter().map(|v| v.to_bits()).collect();
                let bbits: Vec<u64> = b.xs.iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(abits, bbits);
            }
        }
    }
}

#[test]
fn degenerate_maps_send_value_to_origin() {
    for fam in BasisFamily::ALL {
        let m = domain_map_from_data(&[-3.25; 4], fam).unwrap();
        assert_eq!(m.to_canonical(-3.25), 0.0, "{fam}");
    }
}

fn synthetic(noise: f64, dx: usize, dy: usize) -> Dataset {
    let bags = generate(&SynthConfig::new(300, 60, noise, 11));
    Dataset::fit(bags, BasisFamily::Chebyshev, dx, dy).unwrap()
}

#[test]
fn conditional_mass_identity_random_probes() {
    let model = Model::build(synthetic(0.2, 5, 6), None).unwrap();
    for x in [-0.93, -0.41, 0.07, 0.38, 0.88] {
        let cond = model.conditional(x).unwrap();
        let lambda_mass: f64 = cond.rule().unwrap().nodes().iter().map(|&y| cond.lambda(y)).sum();
        let expect: f64 = model.bag_weights(x).iter().sum();
        assert!((lambda_mass - expect).abs() <= 1e-8 * expect, "x={x}");
    }
}

#[test]
fn constant_bags_reduce_to_unconditional() {
    let bags: Vec<Bag> = generate(&SynthConfig::new(120, 25, 0.3, 5));
    let ds = Dataset::fit(bags, BasisFamily::Legendre, 1, 5).unwrap();
    let model = Model::build(ds, None).unwrap();
    let unc = model.unconditional().unwrap();
    for x in [-0.6, 0.0, 0.45] {
        let cond = model.conditional(x).unwrap();
        for i in 0..=20 {
            let y = -1.0 + 0.1 * i as f64;
            let ratio = cond.lambda(y) / unc.lambda(y);
            assert!((ratio - 25.0).abs() < 25.0 * 1e-8, "x={x} y={y} ratio={ratio}");
        }
    }
}

#[test]
fn weighted_gram_matches_direct_sum() {
    let ds = synthetic(0.3, 4, 7);
    let model = Model::build(ds.clone(), None).unwrap();
    for x in [-0.5, 0.2] {
        let cond = model.conditional(x).unwrap();
        let direct = GramMatrix::direct(cond.state().spec(), &ds.outcomes(), Some(cond.weights()));
        assert!(matrix_rel_err(cond.gram().entries(), direct.entries()) < 1e-10);
    }
}

#[test]
fn fixed_and_adaptive_maps_agree_where_both_are_stable() {
    let ds = synthetic(0.5, 4, 5);
    let adaptive = Model::build(ds.clone(), None).unwrap();
    let fixed = adaptive.clone().with_y_map(YMap::Fixed);
    for x in [-0.3, 0.6] {
        let a = adaptive.conditional(x).unwrap();
        let f = fixed.conditional(x).unwrap();
        for y in [-0.8, -0.1, 0.5] {
            let (la, lf) = (a.lambda(y), f.lambda(y));
            assert!((la - lf).abs() < 1e-8 * lf, "x={x} y={y}: {la} vs {lf}");
        }
    }
}

#[test]
fn repeated_runs_are_bit_identical() {
    let run = || {
        let model = Model::build(synthetic(0.1, 6, 6), None).unwrap();
        let d = model.outcomes(0.25).unwrap();
        (d.nodes, d.weights, model.conditional(0.25).unwrap().lambda(0.3))
    };
    let (a, b) = (run(), run());
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.0), bits(&b.0));
    assert_eq!(bits(&a.1), bits(&b.1));
    assert_eq!(a.2.to_bits(), b.2.to_bits());
}

#[test]
fn csv_and_jsonl_build_identical_models() {
    let bags = generate(&SynthConfig::new(50, 12, 0.2, 2));
    let mut models = Vec::new();
    for fmt in [DataFormat::Jsonl, DataFormat::Csv] {
        let mut buf = Vec::new();
        write_bags(&mut buf, &bags, fmt, Some("test")).unwrap();
        let ds = Dataset::fit(read_bags(buf.as_slice(), fmt).unwrap(), BasisFamily::Chebyshev, 3, 4)
            .unwrap();
        models.push(Model::build(ds, None).unwrap().outcomes(0.1).unwrap());
    }
    assert_eq!(models[0], models[1]);
}

#[test]
fn far_query_weight_is_small_but_positive() {
    let bag = Bag::new("a", (0..30).map(|i| -0.2 + 0.4 * i as f64 / 29.0).collect(), 0.0);
    let spec = BasisSpec::canonical(BasisFamily::Chebyshev, 5).unwrap();
    let ev = christoffel_dr::dist_reg::bag_evaluator(&bag, &spec, None).unwrap();
    let mid = ev.weight(0.0);
    for x in [0.5, -1.0, 3.0, 40.0] {
        let w = ev.weight(x);
        assert!(w > 0.0 && w < mid, "x={x} w={w} mid={mid}");
    }
}
