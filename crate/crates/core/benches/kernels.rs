//! Rayon pool against a one-thread pool on the main kernels. Build with
//! `--no-default-features` for the fully sequential code path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use levy_rg::density::{from_spectral, GridDensity, GridSpec, SpectralFunction};
use levy_rg::stable::{self, StableParams};
use levy_rg::transform::{apply_spatial, ScaleParam};
use levy_rg::{ClosedForm, C64};
use std::hint::black_box;

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let all = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut out = vec![("threads=1".to_string(), rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap())];
    if all > 1 {
        out.push((format!("threads={all}"), rayon::ThreadPoolBuilder::new().num_threads(all).build().unwrap()));
    }
    out
}

fn kernels(c: &mut Criterion) {
    let spec = GridSpec::symmetric(1 << 14, 20.0).unwrap();
    let gauss = GridDensity::from_fn(spec, |x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()).unwrap();
    let a = ScaleParam::new(std::f64::consts::SQRT_2).unwrap();
    let cauchy = SpectralFunction::from_closed_form(ClosedForm::Cauchy { scale: 1.0 }, 40.0, 1 << 14).unwrap();
    let inv_spec = GridSpec::symmetric(1 << 12, 50.0).unwrap();
    let p = StableParams::new(0.7, C64::new(1.0, 0.4));
    let stable_spec = GridSpec::symmetric(1 << 12, 40.0).unwrap();

    let mut g = c.benchmark_group("kernels");
    g.sample_size(10);
    for (label, pool) in pools() {
        g.bench_with_input(BenchmarkId::new("apply_spatial_2^14", &label), &pool, |b, pool| {
            b.iter(|| pool.install(|| apply_spatial(black_box(&gauss), a).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("from_spectral_2^12", &label), &pool, |b, pool| {
            b.iter(|| pool.install(|| from_spectral(black_box(&cauchy), inv_spec).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("stable_density_2^12", &label), &pool, |b, pool| {
            b.iter(|| pool.install(|| stable::density(black_box(&p), stable_spec).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("test_density_cf_4096", &label), &pool, |b, pool| {
            let tp = levy_rg::TestDensityParams::new(1.0, 2.0, 0.5).unwrap();
            b.iter(|| pool.install(|| SpectralFunction::from_closed_form(black_box(tp.closed_form()), 20.0, 4096).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
