//! Parallel-vs-sequential comparison of the data-parallel hot paths:
//! feature extraction (convolution stacks), dense patch matching, and
//! bilateral filtering. Each workload runs once through the rayon pool and
//! once inside `par::sequential_scope`, so one build measures both paths.
//! Without the `parallel` feature both variants take the sequential path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng as _;
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;

use sketchforge::eval::{bilateral_filter, BilateralParams};
use sketchforge::features::{Extractor, ExtractorSpec, Tap};
use sketchforge::par;
use sketchforge::patchmatch::{build_reference_store, extract_patches, match_patches};
use sketchforge::tensor::{Real, Tensor};

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<Real> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    Tensor::new(shape, data).unwrap()
}

fn bench_extraction(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let extractor = Extractor::random(ExtractorSpec::small([8, 16, 16, 32, 32]), 1);
    let image = random_tensor(&mut rng, &[1, 128, 128]);
    let taps = [Tap::RELU3_1, Tap::RELU4_1, Tap::RELU5_1];

    let mut group = c.benchmark_group("feature_extraction");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("128x128", "parallel"), |b| {
        b.iter(|| extractor.extract(&image, &taps).unwrap())
    });
    group.bench_function(BenchmarkId::new("128x128", "sequential"), |b| {
        b.iter(|| par::sequential_scope(|| extractor.extract(&image, &taps).unwrap()))
    });
    group.finish();
}

fn bench_matching(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let extractor = Extractor::random(ExtractorSpec::small([6, 8, 8, 8, 8]), 2);
    let pairs: Vec<(Tensor, Tensor, String)> = (0..5)
        .map(|i| {
            (
                random_tensor(&mut rng, &[1, 96, 96]),
                random_tensor(&mut rng, &[1, 96, 96]),
                format!("p{i}"),
            )
        })
        .collect();
    let tap = Tap::RELU3_1;
    let store = build_reference_store(&pairs, &extractor, &[tap, Tap::RELU5_1], 3).unwrap();
    let query = random_tensor(&mut rng, &[1, 96, 96]);
    let feats = extractor.extract(&query, &[tap]).unwrap();
    let (grid, patches) = extract_patches(feats.get(tap).unwrap(), 3, tap).unwrap();
    let cands: Vec<usize> = (0..store.pairs.len()).collect();

    let mut group = c.benchmark_group("patch_matching");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("5x96x96", "parallel"), |b| {
        b.iter(|| match_patches(&grid, &patches, &store, &cands, tap).unwrap())
    });
    group.bench_function(BenchmarkId::new("5x96x96", "sequential"), |b| {
        b.iter(|| {
            par::sequential_scope(|| match_patches(&grid, &patches, &store, &cands, tap).unwrap())
        })
    });
    group.finish();
}

fn bench_bilateral(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let image = random_tensor(&mut rng, &[1, 250, 200]);
    let params = BilateralParams::default();

    let mut group = c.benchmark_group("bilateral_filter");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("250x200", "parallel"), |b| {
        b.iter(|| bilateral_filter(&image, &params))
    });
    group.bench_function(BenchmarkId::new("250x200", "sequential"), |b| {
        b.iter(|| par::sequential_scope(|| bilateral_filter(&image, &params)))
    });
    group.finish();
}

criterion_group!(benches, bench_extraction, bench_matching, bench_bilateral);
criterion_main!(benches);
