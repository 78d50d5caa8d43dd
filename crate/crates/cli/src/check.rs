//! Built-in invariant suite behind `nsl check`: small, fast instances of the
//! properties every module promises.

use std::time::Instant;

use nsl_core::cutting::{cut_energy, CutDensity};
use nsl_core::density::{airy_orthogonality, airy_potential, hperp_basis, maly_martio, orthogonality_residual};
use nsl_core::experiments::{run_stability, Coefficient, DomainSequence, SequenceKind, StabilityProblem, Verdict};
use nsl_core::geometry::hausdorff_distance;
use nsl_core::mesh::triangulate;
use nsl_core::solver::{check_structure, solve};
use nsl_core::{BoundingBox, CompactSet, CutPath, NodalField, PixelDomain, ProblemSpec, Result};

type Check = fn() -> Result<(bool, String)>;

fn unit_box(n: usize) -> Result<PixelDomain> {
    PixelDomain::full(n, BoundingBox::unit())
}

fn constant_solutions() -> Result<(bool, String)> {
    let mesh = triangulate(&unit_box(16)?)?;
    let lin = solve(&mesh, &ProblemSpec::uniform(&mesh, 2.0, 1.0, 1.0))?;
    let e2 = lin.solution.values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let nl = solve(&mesh, &ProblemSpec::uniform(&mesh, 1.5, 1.0, 8.0))?;
    let e15 = nl.solution.values.iter().map(|v| (v / 64.0 - 1.0).abs()).fold(0.0, f64::max);
    Ok((e2 < 1e-8 && e15 < 1e-6, format!("sup|u-1| = {e2:.1e}, rel |u-64| = {e15:.1e}")))
}

fn structure() -> Result<(bool, String)> {
    let mesh = triangulate(&unit_box(4)?)?;
    let r = check_structure(&ProblemSpec::uniform(&mesh, 1.5, 1.0, 1.0), 500, 1);
    Ok((r.pass, format!("monotonicity gap {:.1e}", r.min_monotonicity_gap)))
}

fn hausdorff_axioms() -> Result<(bool, String)> {
    let b = BoundingBox::unit();
    let sets = [
        CompactSet::pixels(8, b, vec![0, 9, 18]),
        CompactSet::pixels(8, b, vec![63]),
        CompactSet::points(vec![[0.5, 0.5], [0.1, 0.9]]),
    ];
    let d = |i: usize, j: usize| hausdorff_distance(&sets[i], &sets[j], b.diameter());
    let tri = d(0, 2)? <= d(0, 1)? + d(1, 2)? + 1e-12;
    let sym = (d(0, 1)? - d(1, 0)?).abs() < 1e-15;
    let empty = hausdorff_distance(&CompactSet::points(vec![]), &sets[0], b.diameter())? == b.diameter();
    Ok((tri && sym && empty, format!("d(K1,K3) = {:.4}", d(0, 2)?)))
}

fn three_holes() -> Result<PixelDomain> {
    PixelDomain::from_fn(16, BoundingBox::unit(), |x, y| {
        let hole = |a: f64, b: f64, c: f64, d: f64| x > a && x < b && y > c && y < d;
        !(hole(0.125, 0.25, 0.125, 0.25) || hole(0.625, 0.8125, 0.1875, 0.3125) || hole(0.3125, 0.4375, 0.625, 0.875))
    })
}

fn hperp_orthogonality() -> Result<(bool, String)> {
    let omega = three_holes()?;
    let bm = triangulate(&unit_box(16)?)?;
    let om = triangulate(&omega)?;
    let mut worst: f64 = 0.0;
    for e in hperp_basis(&omega, &bm, 3, 5)? {
        let u = NodalField::interpolate(&om, |x, y| (4.0 * x).sin() + x * y * y);
        worst = worst.max(orthogonality_residual(&om, &u, &e, 1.5)?);
    }
    Ok((worst < 1e-10, format!("max residual {worst:.1e}")))
}

fn cut_antitonicity() -> Result<(bool, String)> {
    let mesh = triangulate(&unit_box(4)?)?;
    let g = NodalField::interpolate(&mesh, |x, y| x + 0.5 * y);
    let density = CutDensity::new(1.5, 1e-6);
    let e = |a: usize, b: usize| mesh.edge_id(a, b).expect("grid edge");
    let small = CutPath::new(vec![e(6, 7)], Some([6, 7]));
    let large = CutPath::new(vec![e(6, 7), e(7, 8), e(8, 13)], Some([6, 7]));
    let es = cut_energy(&mesh, &small, &density, &g)?.energy;
    let el = cut_energy(&mesh, &large, &density, &g)?.energy;
    Ok((el <= es + 1e-10, format!("E(K) = {es:.6}, E(K') = {el:.6}")))
}

fn maly_budget() -> Result<(bool, String)> {
    let out = maly_martio(4, None, 32)?;
    let ok = out
        .stages
        .iter()
        .all(|s| s.increment_norm <= 0.5f64.powi(s.index as i32) * (1.0 + 1e-12) && s.coverage >= 1.0 - 0.5f64.powi(s.index as i32));
    let last = out.stages.last().expect("stages");
    Ok((ok, format!("stage 4 coverage {:.4}", last.coverage)))
}

fn airy_pairing() -> Result<(bool, String)> {
    let omega = three_holes()?;
    let mesh = nsl_core::mesh::refine(&triangulate(&omega)?);
    let lin = [([0.0, 0.0], 0.0), ([0.3, -0.2], 0.1), ([-1.0, 0.5], 0.7), ([0.2, 0.9], -0.4)];
    let phi = airy_potential(&omega, 1.0, &lin, 3)?;
    let v1 = NodalField::interpolate(&mesh, |x, y| (3.0 * x).sin() * y);
    let v2 = NodalField::interpolate(&mesh, |x, y| x * x - y);
    let r = airy_orthogonality(&mesh, (&v1, &v2), &phi)?;
    Ok((r.normalized < 1e-8, format!("normalized pairing {:.1e}", r.normalized)))
}

fn shrinking_hole_stable() -> Result<(bool, String)> {
    let seq = DomainSequence::new(SequenceKind::ShrinkingHole, 5, 32);
    let mut problem = StabilityProblem::new(1.5);
    problem.f = Coefficient::Affine([0.0, 1.0, 0.0]);
    let r = run_stability(&seq, &problem)?;
    let g = r.grad_gaps();
    Ok((
        r.verdict == Verdict::Stable,
        format!("{} (gap {:.2e} -> {:.2e})", r.verdict, g[0], g[g.len() - 1]),
    ))
}

const CHECKS: [(&str, Check); 8] = [
    ("constant solutions", constant_solutions),
    ("operator structure", structure),
    ("hausdorff axioms", hausdorff_axioms),
    ("hperp orthogonality", hperp_orthogonality),
    ("cut antitonicity", cut_antitonicity),
    ("maly-martio budget", maly_budget),
    ("airy pairing", airy_pairing),
    ("shrinking hole stable", shrinking_hole_stable),
];

/// Prints one line per check; true when all pass.
pub fn run() -> bool {
    let mut all = true;
    println!("{:<24} {:<6} {:>9}  detail", "check", "result", "seconds");
    for (name, f) in CHECKS {
        let t = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, e.to_string()),
        };
        all &= ok;
        println!(
            "{name:<24} {:<6} {:>9.3}  {detail}",
            if ok { "pass" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    all
}
