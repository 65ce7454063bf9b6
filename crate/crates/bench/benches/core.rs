use std::sync::Arc;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rado_core::ambient::{least_orbit_member, verify_copy};
use rado_core::fusion::{fuse, OracleSpec, ValueRule};
use rado_core::labeling::label;
use rado_core::orbits::{intersect, is_suborbit};
use rado_core::ramsey::{find_strong_subtree, truncate_tree, unsplit};
use rado_core::{CopyHandle, OrbitType, Vertex, VertexPredicate, DEFAULT_SEARCH_BOUND as B};

fn orbits(c: &mut Criterion) {
    let a = OrbitType::of(&[0, 1, 2, 3], &[0, 2]);
    let b = OrbitType::of(&[2, 3, 4], &[2, 4]);
    c.bench_function("orbit intersect", |bch| {
        bch.iter(|| intersect(black_box(&a), black_box(&b)))
    });
    c.bench_function("orbit is_suborbit", |bch| {
        bch.iter(|| is_suborbit(black_box(&a), black_box(&b)))
    });
    let far = OrbitType::of(&[0, 1, 2, 3, 4, 5, 6, 7], &[1, 3, 5, 7]);
    let amb = CopyHandle::ambient();
    c.bench_function("least member (8-vertex H)", |bch| {
        bch.iter(|| least_orbit_member(black_box(&far), Vertex(0), &amb, B).unwrap())
    });
    c.bench_function("verify_copy ambient depth 4", |bch| {
        bch.iter(|| verify_copy(&amb, 4, B).unwrap())
    });
}

fn labelings(c: &mut Criterion) {
    let amb = CopyHandle::ambient();
    c.bench_function("label ambient depth 3", |bch| {
        bch.iter(|| label(&amb, 3, 0, None, B).unwrap())
    });
    let lab = label(&amb, 3, 0, None, B).unwrap();
    c.bench_function("truncate tree depth 3", |bch| {
        bch.iter(|| truncate_tree(&lab, 3).unwrap())
    });
}

fn fusion_and_ramsey(c: &mut Criterion) {
    let amb = CopyHandle::ambient();
    let spec = Arc::new(OracleSpec::new(
        ValueRule::Hash(1),
        VertexPredicate::Residue { modulus: 3, residue: 0 },
    ));
    c.bench_function("fuse depth 2 (mod 3)", |bch| {
        bch.iter(|| fuse(&amb, spec.clone(), 2, 1 << 22).unwrap())
    });
    let lab = label(&amb, 3, 0, None, B).unwrap();
    let tt = truncate_tree(&lab, 3).unwrap();
    let parity: Vec<usize> = tt.nodes.iter().map(|q| q.n % 2).collect();
    c.bench_function("strong subtree height 2 (depth-3 tree)", |bch| {
        bch.iter(|| find_strong_subtree(&tt.tree, &parity, 2).unwrap())
    });
    let fr = fuse(
        &amb,
        Arc::new(OracleSpec::new(ValueRule::LevelParity, VertexPredicate::All)),
        3,
        B,
    )
    .unwrap();
    c.bench_function("unsplit height 2", |bch| bch.iter(|| unsplit(&fr, 2).unwrap()));
}

criterion_group!(benches, orbits, labelings, fusion_and_ramsey);
criterion_main!(benches);
