#![allow(dead_code)]

use std::sync::Arc;

use cnp_core::kernels::{evaluate, schur_product, KernelMatrix, KernelSpec, Point, SampleSet};
use cnp_core::linalg::{c, CMat};
use cnp_core::samplespace::{PointConstraint, PointwiseConstraintSpec, SampleSpace, Subspace};
use cnp_core::sampling::{uniform_ball, uniform_disc, SplitMix64};
use cnp_core::DEFAULT_TOL_RANK;

/// A kernel `k` together with a CNP factor `s` of it, on one sample.
pub struct Pair {
    pub name: &'static str,
    pub k: KernelMatrix,
    pub s: KernelMatrix,
}

/// Smallest pairwise distance allowed in generated samples. Nearly coincident
/// points make the kernel matrices singular below the PSD tolerances.
const MIN_SEPARATION: f64 = 0.02;

fn separated(points: &[Point]) -> bool {
    points.iter().enumerate().all(|(i, p)| {
        points[..i].iter().all(|q| {
            let d: f64 = p.coords().iter().zip(q.coords()).map(|(a, b)| (a - b).norm_sqr()).sum();
            d.sqrt() >= MIN_SEPARATION
        })
    })
}

fn separated_sample(seed: u64, draw: impl Fn(u64) -> Vec<Point>) -> Arc<SampleSet> {
    let points = (0..)
        .map(|k: u64| draw(seed.wrapping_add(k)))
        .find(|pts| separated(pts))
        .unwrap();
    Arc::new(SampleSet::new(points, None).unwrap())
}

pub fn disc_sample(n: usize, seed: u64) -> Arc<SampleSet> {
    separated_sample(seed, |s| uniform_disc(n, 0.85, s))
}

pub fn ball_sample(n: usize, seed: u64) -> Arc<SampleSet> {
    separated_sample(seed, |s| uniform_ball(n, 2, 0.8, s))
}

/// The catalog pairs `(k, s)` with `k/s ⪰ 0`, indexed `0..4`.
pub fn catalog_pair(which: usize, n: usize, seed: u64) -> Pair {
    match which % 4 {
        0 => {
            let x = disc_sample(n, seed);
            let s = evaluate(&KernelSpec::Szego, &x).unwrap();
            Pair { name: "szego/szego", k: s.clone(), s }
        }
        1 => {
            let x = disc_sample(n, seed);
            Pair {
                name: "bergman/szego",
                k: evaluate(&KernelSpec::Bergman, &x).unwrap(),
                s: evaluate(&KernelSpec::Szego, &x).unwrap(),
            }
        }
        2 => {
            let x = disc_sample(n, seed);
            Pair {
                name: "power2/power1",
                k: evaluate(&KernelSpec::PowerAlpha { alpha: 2.0 }, &x).unwrap(),
                s: evaluate(&KernelSpec::PowerAlpha { alpha: 1.0 }, &x).unwrap(),
            }
        }
        _ => {
            let x = ball_sample(n, seed);
            let s = evaluate(&KernelSpec::DruryArveson { d: 2 }, &x).unwrap();
            Pair {
                name: "da^2/da",
                k: schur_product(&s, &s).unwrap(),
                s,
            }
        }
    }
}

/// A random pointwise-invariant subspace of `H_k ⊗ ℂ^p`: at a few points the
/// values are forced to zero or into a random line.
pub fn random_invariant_subspace(k: &KernelMatrix, p: usize, seed: u64) -> Subspace {
    let mut rng = SplitMix64::new(seed ^ 0x5EED);
    let n = k.n();
    let space = SampleSpace::new(k.tensor_identity(p).unwrap(), DEFAULT_TOL_RANK).unwrap();
    let count = 1 + rng.next_index(n - 1);
    let mut constraints = Vec::new();
    let mut used = vec![false; n];
    for _ in 0..count {
        let i = rng.next_index(n);
        if used[i] {
            continue;
        }
        used[i] = true;
        if p > 1 && rng.next_f64() < 0.5 {
            let dir = CMat::from_fn(p, 1, |_, _| {
                cnp_core::Complex64::new(rng.next_signed(), rng.next_signed())
            });
            let norm = dir.norm();
            constraints.push(PointConstraint::spanned_by(i, &(dir / c(norm))));
        } else {
            constraints.push(PointConstraint::zero(i, p));
        }
    }
    space
        .subspace_from_constraints(&PointwiseConstraintSpec::new(constraints), DEFAULT_TOL_RANK)
        .unwrap()
}
