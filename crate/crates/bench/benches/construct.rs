use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ftspan_bench::{config, instance};
use ftspan_core::gen::Distribution;
use ftspan_core::verify::sampled_ft_check;
use ftspan_core::{build_ft_spanner, light_spanner, NetTree};

fn net_tree(c: &mut Criterion) {
    let mut g = c.benchmark_group("net_tree");
    for n in [256, 1024] {
        let m = instance(n, Distribution::Uniform).normalize().unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| b.iter(|| NetTree::build(m)));
    }
    g.finish();
}

fn guide(c: &mut Criterion) {
    let mut g = c.benchmark_group("light_spanner");
    g.sample_size(10);
    for n in [256, 1024] {
        let m = instance(n, Distribution::Uniform).normalize().unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| {
            b.iter(|| light_spanner(m, 0.1).unwrap())
        });
    }
    g.finish();
}

fn construction(c: &mut Criterion) {
    let mut g = c.benchmark_group("build");
    g.sample_size(10);
    for n in [128, 512] {
        for (label, fast, xi) in [
            ("reference", false, 16.0),
            ("fast", true, 16.0),
            ("fast-saturating", true, 0.1),
        ] {
            let m = instance(n, Distribution::Uniform);
            let cfg = config(1, fast, xi);
            g.bench_with_input(BenchmarkId::new(label, n), &m, |b, m| {
                b.iter(|| build_ft_spanner(m.clone(), &cfg).unwrap())
            });
        }
    }
    g.finish();
}

fn verification(c: &mut Criterion) {
    let mut g = c.benchmark_group("sampled_ft_check");
    g.sample_size(10);
    let build = build_ft_spanner(instance(200, Distribution::Clustered), &config(2, false, 16.0)).unwrap();
    g.bench_function("n200_f2_100_sets", |b| {
        b.iter(|| sampled_ft_check(&build.spanner.graph, &build.metric, 0.1, 2, 100, 1, &[]))
    });
    g.finish();
}

criterion_group!(benches, net_tree, guide, construction, verification);
criterion_main!(benches);
